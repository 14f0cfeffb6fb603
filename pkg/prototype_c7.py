import time

import numpy as np

from cbsurv import (
    CaseBaseLogisticRegression,
    CaseBaseNeuralNetwork,
    SplitSpec,
    bootstrap_evaluate,
    default_eval_grid,
    default_hazard_spec,
    grid_search,
    oracle_feature_map,
    simulate_dataset,
    split_dataset,
)
from cbsurv._seeds import subseed

t0 = time.time()
SEED = 20260809
spec = default_hazard_spec()
data = simulate_dataset(2000, spec, seed=subseed(SEED, "simulate"))
train, validation, test = split_dataset(
    data, SplitSpec(0.15, 0.15, seed=subseed(SEED, "split"))
)
print("sizes", len(train), len(validation), len(test), "train events", train.n_events)

EPOCHS_NET = 100
reduced = [(
    "lr0.01_do0.05_h50x25_relu",
    CaseBaseNeuralNetwork(hidden_layers=(50, 25), activation="relu", dropout=0.05,
                          learning_rate=0.01, num_batches=100, epochs=EPOCHS_NET,
                          ratio=100),
)]
gs = grid_search(train, reduced, folds=3, seed=subseed(SEED, "grid"))
print("grid done", round(time.time() - t0, 1), "s; fold ibs",
      [round(v, 5) for v in gs.best.fold_ibs])

models = {
    "oracle": CaseBaseLogisticRegression(
        feature_map=oracle_feature_map(spec), learning_rate=0.05, num_batches=20,
        epochs=500, ratio=100),
    "cbnn": CaseBaseNeuralNetwork(hidden_layers=(50, 25), activation="relu",
                                  dropout=0.05, learning_rate=0.01, num_batches=100,
                                  epochs=EPOCHS_NET, ratio=100),
    "cblr": CaseBaseLogisticRegression(learning_rate=0.05, num_batches=20,
                                       epochs=500, ratio=100),
}
grid = default_eval_grid(test, 60)
boot_seed = subseed(SEED, "bootstrap")
results = {}
for name, est in models.items():
    t1 = time.time()
    results[name] = bootstrap_evaluate(est, train, test, n_boot=20, grid=grid,
                                       seed=boot_seed)
    print(name, "bootstrap done in", round(time.time() - t1, 1), "s")

idx75 = int(np.argmin(np.abs(grid - (grid[0] + 0.75 * (grid[-1] - grid[0])))))
print("t75 =", round(grid[idx75], 4))
for metric in ("ipa", "auc"):
    print("==", metric)
    reps = {name: results[name].replicate_values[metric][:, idx75] for name in results}
    for name in results:
        print(f"  {name}: mean {np.nanmean(reps[name]):.4f} point "
              f"{results[name].curves[metric].estimates[idx75]:.4f}")
    diff = reps["cbnn"] - reps["cblr"]
    print("  cbnn - cblr > 0 fraction:", float(np.mean(diff > 0)))
    print("  oracle mean - cbnn mean:",
          round(float(np.nanmean(reps["oracle"]) - np.nanmean(reps["cbnn"])), 5))
print("total", round(time.time() - t0, 1), "s")
