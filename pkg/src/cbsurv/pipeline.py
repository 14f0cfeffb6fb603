"""End-to-end runs: data, split, selection, fits, metrics, bands, manifest.

A pipeline is fully described by one JSON-serializable config; rerunning the
manifest it writes reproduces every output byte for byte. Stage failures
abort with the stage name; outputs written so far stay on disk.
"""

from __future__ import annotations

import contextlib
import dataclasses
import json
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from ._seeds import subseed
from .data import CsvSchema, SplitSpec, SurvivalData, load_survival_csv, split_dataset
from .errors import CBSurvError, ConfigurationError
from .estimators import (
    CaseBaseLogisticRegression,
    CaseBaseNeuralNetwork,
    KaplanMeierEstimator,
    model_to_dict,
)
from .metrics import default_eval_grid, evaluate_suite
from .model_selection import SearchSpace, bootstrap_evaluate, grid_search
from .simulation import SimulationHazardSpec, default_hazard_spec, oracle_feature_map, simulate_dataset

DEFAULT_MODELS = (
    {"name": "net", "type": "cbnn"},
    {"name": "linear", "type": "cblr"},
    {"name": "km", "type": "km"},
)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=_json_default, sort_keys=True)
        fh.write("\n")


@dataclasses.dataclass
class PipelineConfig:
    """Validated pipeline settings; ``raw`` keeps the resolved dict for the manifest."""

    raw: dict

    def __post_init__(self):
        cfg = self.raw
        if "data" not in cfg:
            raise ConfigurationError("pipeline config needs a 'data' section")
        data = cfg["data"]
        if ("csv" in data) == ("simulate" in data):
            raise ConfigurationError("data section must have exactly one of 'csv' or 'simulate'")
        if ("search_space" in cfg) == ("network" in cfg):
            raise ConfigurationError(
                "pipeline config must have exactly one of 'search_space' or 'network'"
            )
        models = cfg.get("models") or [dict(m) for m in DEFAULT_MODELS]
        names = [m.get("name") for m in models]
        if len(set(names)) != len(names) or not all(names):
            raise ConfigurationError(f"model names must be unique and nonempty, got {names}")
        for m in models:
            if m.get("type") not in ("cbnn", "cblr", "km"):
                raise ConfigurationError(f"unknown model type in {m}")
        cfg["models"] = models

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def ratio(self) -> int:
        return int(self.raw.get("ratio", 100))

    @property
    def epochs(self) -> int:
        return int(self.raw.get("epochs", 200))

    @property
    def n_jobs(self) -> int:
        return int(self.raw.get("jobs", 1))

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        raw = json.loads(json.dumps(raw))  # deep copy, reject non-JSON content
        if raw.get("tool") == "cbsurv" and "config" in raw:
            raw = raw["config"]  # accept a previously written manifest
        return cls(raw)


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except CBSurvError as exc:
        exc.args = (f"stage '{name}': {exc}",)
        raise


def _acquire_data(cfg: PipelineConfig, out: Path, outputs: list[str]):
    data_cfg = cfg.raw["data"]
    if "simulate" in data_cfg:
        sim = data_cfg["simulate"]
        spec = SimulationHazardSpec.from_dict(sim.get("spec", {}))
        dataset = simulate_dataset(int(sim["n"]), spec, subseed(cfg.seed, "simulate"))
        dataset.save_csv(out / "dataset.csv")
        write_json(out / "dataset.meta.json", dataset.meta)
        outputs += ["dataset.csv", "dataset.meta.json"]
        return dataset, spec
    schema = CsvSchema(
        time_col=data_cfg["time_col"],
        status_col=data_cfg["status_col"],
        covariates=tuple(data_cfg["covariates"]),
    )
    return load_survival_csv(data_cfg["csv"], schema), None


def build_model(entry: dict, network_params: dict,
                sim_spec: SimulationHazardSpec | None, seed: int,
                ratio: int = 100, epochs: int = 200):
    """Unfitted estimator for one model entry of a pipeline config."""
    kind = entry.get("type", "cbnn")
    if kind == "km":
        return KaplanMeierEstimator()
    if kind == "cbnn":
        return CaseBaseNeuralNetwork(
            hidden_layers=tuple(network_params.get("hidden_layers", (50, 25))),
            activation=network_params.get("activation", "relu"),
            dropout=float(network_params.get("dropout", 0.05)),
            learning_rate=float(network_params.get("learning_rate", 0.01)),
            num_batches=int(network_params.get("num_batches", 100)),
            epochs=int(entry.get("epochs", epochs)),
            ratio=ratio,
            random_state=seed,
        )
    if kind != "cblr":
        raise ConfigurationError(f"unknown model type '{kind}'")
    fmap = entry.get("feature_map")
    if fmap == "oracle":
        if sim_spec is None:
            raise ConfigurationError(
                "feature_map 'oracle' is only available for simulated data"
            )
        fmap = oracle_feature_map(sim_spec)
    return CaseBaseLogisticRegression(
        feature_map=fmap,
        learning_rate=float(entry.get("learning_rate", 0.01)),
        num_batches=int(entry.get("num_batches", 100)),
        epochs=int(entry.get("epochs", epochs)),
        ratio=ratio,
        random_state=seed,
    )


def run_pipeline(config: PipelineConfig | dict, out_dir) -> dict:
    """Execute every stage and write the output bundle under ``out_dir``.

    Returns the manifest dict (also written as ``manifest.json``).
    """
    if not isinstance(config, PipelineConfig):
        config = PipelineConfig.from_dict(config)
    cfg = config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    manifest: dict = {"tool": "cbsurv", "version": __version__, "config": cfg.raw}

    with _stage("data"):
        dataset, sim_spec = _acquire_data(cfg, out, outputs)
        if dataset.meta:
            manifest["accounting"] = dataset.meta["accounting"]

    with _stage("split"):
        split_cfg = cfg.raw.get("split", {})
        spec = SplitSpec(
            test_fraction=float(split_cfg.get("test_fraction", 0.15)),
            validation_fraction=float(split_cfg.get("validation_fraction", 0.15)),
            seed=subseed(cfg.seed, "split"),
        )
        train, validation, test = split_dataset(dataset, spec)
        manifest["split_sizes"] = {
            "train": len(train), "validation": len(validation), "test": len(test),
        }

    network_params = dict(cfg.raw.get("network", {}))
    if "search_space" in cfg.raw:
        with _stage("gridsearch"):
            space = SearchSpace.from_dict(cfg.raw["search_space"])
            result = grid_search(
                train, space.candidates(epochs=cfg.epochs, ratio=cfg.ratio),
                folds=int(cfg.raw.get("folds", 3)),
                seed=subseed(cfg.seed, "gridsearch"),
                n_jobs=cfg.n_jobs,
            )
            result.to_frame().to_csv(out / "grid.csv", index=False)
            outputs.append("grid.csv")
            best = result.best
            network_params = {
                "hidden_layers": list(best.params["hidden_layers"]),
                "activation": best.params["activation"],
                "dropout": best.params["dropout"],
                "learning_rate": best.params["learning_rate"],
                "num_batches": best.params["num_batches"],
            }
            manifest["selected"] = {"cell": best.name, "mean_ibs": best.mean_ibs,
                                    "network": network_params}

    with _stage("fit"):
        models = {}
        for entry in cfg.raw["models"]:
            name = entry["name"]
            est = build_model(entry, network_params, sim_spec,
                              subseed(cfg.seed, "fit", name),
                              ratio=cfg.ratio, epochs=cfg.epochs)
            est.fit(train.covariates, train.survival_target())
            models[name] = est
        write_json(out / "model.json",
                   {"models": {name: model_to_dict(est) for name, est in models.items()}})
        outputs.append("model.json")

    with _stage("evaluate"):
        grid_size = int(cfg.raw.get("evaluation", {}).get("grid_size", 100))
        grid = default_eval_grid(test, grid_size)
        suite = evaluate_suite(models, test, grid)
        suite.ibs_frame().to_csv(out / "ibs.csv", index=False)
        outputs.append("ibs.csv")
        curves = []
        for name, est in models.items():
            risks = est.predict_risk(test.covariates, grid)
            frame = pd.DataFrame(risks, columns=[f"t{j}" for j in range(grid.size)])
            frame.insert(0, "subject", np.arange(len(test)))
            frame.insert(0, "model", name)
            long = frame.melt(id_vars=["model", "subject"], var_name="grid_index",
                              value_name="risk")
            long["time"] = grid[long["grid_index"].str.slice(1).astype(int)]
            curves.append(long[["model", "subject", "time", "risk"]])
        risk_frame = pd.concat(curves, ignore_index=True)
        risk_frame = risk_frame.sort_values(["model", "subject", "time"], kind="stable")
        risk_frame.to_csv(out / "risk_curves.csv", index=False)
        outputs.append("risk_curves.csv")

    with _stage("bootstrap"):
        n_boot = int(cfg.raw.get("bootstrap", {}).get("n_boot", 100))
        rows = []
        if n_boot > 0:
            boot_seed = subseed(cfg.seed, "bootstrap")
            for name, est in models.items():
                boot = bootstrap_evaluate(
                    est, train, test, n_boot=n_boot, grid=grid,
                    seed=boot_seed, n_jobs=cfg.n_jobs,
                )
                for metric, curve in boot.curves.items():
                    rows.append(curve.to_frame(model=name, metric=metric))
        else:
            for name, metrics_ in suite.curves.items():
                for metric, curve in metrics_.items():
                    rows.append(curve.to_frame(model=name, metric=metric))
        pd.concat(rows, ignore_index=True).to_csv(out / "metrics.csv", index=False)
        outputs.append("metrics.csv")

    manifest["ibs_weighting"] = "w(t) = t / t_max over the evaluation grid"
    manifest["outputs"] = sorted(set(outputs + ["manifest.json", "summary.json"]))
    write_json(out / "summary.json", {
        "ibs": suite.ibs,
        "split_sizes": manifest["split_sizes"],
        "selected": manifest.get("selected"),
        "n_boot": int(cfg.raw.get("bootstrap", {}).get("n_boot", 100)),
    })
    write_json(out / "manifest.json", manifest)
    return manifest
