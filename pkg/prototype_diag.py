import time

import numpy as np

from cbsurv import (
    CaseBaseLogisticRegression,
    CaseBaseNeuralNetwork,
    PredictionMatrix,
    SplitSpec,
    brier_curve,
    cumulative_hazard,
    default_eval_grid,
    default_hazard_spec,
    evaluate_suite,
    ipa,
    auc_curve,
    oracle_feature_map,
    simulate_dataset,
    split_dataset,
)


class TrueModel:
    """Risk directly from the generating cumulative hazard."""

    def __init__(self, spec):
        self.spec = spec

    def predict_risk(self, X, times):
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], len(times)))
        for i, z in enumerate(X):
            out[i] = 1.0 - np.exp(-np.asarray(
                [cumulative_hazard(self.spec, z, float(t)) for t in times]))
        return out


spec = default_hazard_spec()
data = simulate_dataset(2000, spec, seed=1)
train, validation, test = split_dataset(data, SplitSpec(0.15, 0.15, seed=2))
print("train events", train.n_events, "| test events", test.n_events)
print("time quantiles", np.quantile(data.time, [0.1, 0.25, 0.5, 0.75, 0.9, 0.99]).round(3))

grid = default_eval_grid(test, 60)
models = {
    "true": TrueModel(spec),
    "oracle_long": CaseBaseLogisticRegression(
        feature_map=oracle_feature_map(spec), learning_rate=0.05, num_batches=20,
        epochs=800, ratio=100, random_state=5),
    "cbnn": CaseBaseNeuralNetwork(hidden_layers=(50, 25), activation="relu",
                                  dropout=0.05, learning_rate=0.01, num_batches=100,
                                  epochs=100, ratio=100, random_state=5),
    "cblr": CaseBaseLogisticRegression(learning_rate=0.05, num_batches=20,
                                       epochs=800, ratio=100, random_state=5),
}
for name, est in models.items():
    t0 = time.time()
    if hasattr(est, "fit"):
        if isinstance(est, TrueModel):
            pass
        else:
            est.fit(train.covariates, train.survival_target())
    print(f"fitted {name} in {time.time()-t0:.1f}s")

suite = evaluate_suite(models, test, grid)
print("IBS:", {k: round(v, 5) for k, v in suite.ibs.items()})
for q in (0.25, 0.5, 0.75, 1.0):
    idx = min(int(round(q * (len(grid) - 1))), len(grid) - 1)
    t = grid[idx]
    row = {name: round(float(suite.curves[name]["ipa"].estimates[idx]), 4) for name in models}
    row_auc = {name: round(float(suite.curves[name]["auc"].estimates[idx]), 4) for name in models}
    print(f"t={t:.2f} (q{q}): IPA {row}")
    print(f"              AUC {row_auc}")

# oracle coefficient recovery
oracle = models["oracle_long"]
true_w = np.concatenate([spec.gamma, spec.beta, [spec.tau[0]], [spec.tau[1]]])
print("oracle coef vs truth:")
print("  fitted:", np.round(oracle.coefficients_, 3))
print("  truth: ", np.round(true_w, 3))
print("  intercept:", round(oracle.intercept_, 4))
print("  final grad max:", oracle.history_.final_grad_max)
