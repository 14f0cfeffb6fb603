"""Command-line interface.

Subcommands: simulate, split, gridsearch, fit, evaluate, bootstrap,
pipeline. Every subcommand accepts ``--config <json>`` supplying defaults
for its flags; explicit flags win. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from ._seeds import subseed
from .data import CsvSchema, SplitSpec, load_survival_csv, split_dataset
from .errors import CBSurvError, ConfigurationError, DataError
from .estimators import load_model, save_model
from .metrics import default_eval_grid, evaluate_suite
from .model_selection import SearchSpace, bootstrap_evaluate, grid_search
from .pipeline import PipelineConfig, build_model, run_pipeline, write_json
from .sampling import sample_case_base
from .simulation import SimulationHazardSpec, simulate_dataset


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON in {path}: {exc}") from None


class _Command:
    """Merges flag values over --config JSON defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _load_json(args.config) if getattr(args, "config", None) else {}

    def get(self, key: str, default=None, required: bool = False):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config.get(key, default)
        if required and value is None:
            raise ConfigurationError(f"missing required option --{key.replace('_', '-')}")
        return value

    def schema(self) -> CsvSchema:
        covariates = self.get("covariates", required=True)
        if isinstance(covariates, str):
            covariates = [c.strip() for c in covariates.split(",") if c.strip()]
        return CsvSchema(
            time_col=self.get("time_col", "time"),
            status_col=self.get("status_col", "status"),
            covariates=tuple(covariates),
        )

    def load_data(self, key: str = "data"):
        path = self.get(key, required=True)
        return load_survival_csv(path, self.schema())


def _add_data_flags(parser: argparse.ArgumentParser, name: str = "--data"):
    parser.add_argument(name, help="survival CSV with a header row")
    parser.add_argument("--time-col", dest="time_col", help="follow-up time column")
    parser.add_argument("--status-col", dest="status_col", help="event status column (0/1)")
    parser.add_argument("--covariates", help="comma-separated covariate columns")


def _warn_extrapolation(model, grid) -> None:
    rng = getattr(model, "follow_up_range_", None)
    if rng and grid[-1] > rng[1]:
        print(
            f"warning: evaluation grid reaches {grid[-1]:g}, beyond the training "
            f"follow-up range [{rng[0]:g}, {rng[1]:g}]",
            file=sys.stderr,
        )


def cmd_simulate(cmd: _Command) -> int:
    spec = SimulationHazardSpec.from_dict(_load_json(cmd.get("spec")) if cmd.get("spec") else {})
    n = int(cmd.get("n", required=True))
    seed = int(cmd.get("seed", 0))
    out = Path(cmd.get("out", required=True))
    dataset = simulate_dataset(n, spec, seed)
    dataset.save_csv(out)
    sidecar = out.with_suffix(".meta.json") if out.suffix == ".csv" else Path(f"{out}.meta.json")
    write_json(sidecar, dataset.meta)
    print(f"wrote {len(dataset)} subjects to {out} "
          f"({dataset.meta['accounting']})")
    return 0


def cmd_split(cmd: _Command) -> int:
    data = cmd.load_data()
    spec = SplitSpec(
        test_fraction=float(cmd.get("test_fraction", 0.15)),
        validation_fraction=float(cmd.get("validation_fraction", 0.15)),
        seed=int(cmd.get("seed", 0)),
    )
    out = Path(cmd.get("out", required=True))
    out.mkdir(parents=True, exist_ok=True)
    train, validation, test = split_dataset(data, spec)
    schema = cmd.schema()
    for name, part in (("train", train), ("validation", validation), ("test", test)):
        part.save_csv(out / f"{name}.csv", schema)
    print(f"split sizes: train={len(train)} validation={len(validation)} test={len(test)}")
    return 0


def cmd_gridsearch(cmd: _Command) -> int:
    data = cmd.load_data()
    space_cfg = cmd.get("space")
    space = SearchSpace.from_dict(_load_json(space_cfg)) if space_cfg else SearchSpace()
    out = Path(cmd.get("out", required=True))
    out.mkdir(parents=True, exist_ok=True)
    result = grid_search(
        data,
        space.candidates(epochs=int(cmd.get("epochs", 200)), ratio=int(cmd.get("ratio", 100))),
        folds=int(cmd.get("folds", 3)),
        seed=int(cmd.get("seed", 0)),
        n_jobs=int(cmd.get("jobs", 1)),
    )
    result.to_frame().to_csv(out / "grid.csv", index=False)
    best = result.best
    write_json(out / "selected.json",
               {"cell": best.name, "mean_ibs": best.mean_ibs, "params": best.params})
    print(f"selected {best.name} (mean IBS {best.mean_ibs:.6f}) over {len(result.cells)} cells")
    return 0


def _model_from_config(cmd: _Command):
    model_cfg = _load_json(cmd.get("model_config", required=True))
    ratio = int(cmd.get("ratio", model_cfg.get("ratio", 100)))
    epochs = int(cmd.get("epochs", model_cfg.get("epochs", 200)))
    seed = int(cmd.get("seed", 0))
    est = build_model(model_cfg, model_cfg, None, seed, ratio=ratio, epochs=epochs)
    return est, ratio, seed


def cmd_fit(cmd: _Command) -> int:
    data = cmd.load_data()
    est, ratio, seed = _model_from_config(cmd)
    dump = cmd.get("dump_moments")
    if dump:
        # Same derived seed the estimator uses, so the dump is the actual
        # training sample.
        sample = sample_case_base(data, ratio, subseed(seed, "sample"))
        sample.to_frame().to_csv(dump, index=False)
    est.fit(data.covariates, data.survival_target())
    out = cmd.get("out", required=True)
    save_model(est, out)
    print(f"fitted {type(est).__name__} on {len(data)} subjects -> {out}")
    return 0


def cmd_evaluate(cmd: _Command) -> int:
    test = cmd.load_data()
    paths = cmd.get("model", required=True)
    if isinstance(paths, str):
        paths = [paths]
    models = {}
    for path in paths:
        est = load_model(path)
        models[Path(path).stem] = est
    out = Path(cmd.get("out", required=True))
    out.mkdir(parents=True, exist_ok=True)
    grid = default_eval_grid(test, int(cmd.get("grid_size", 100)))
    for est in models.values():
        _warn_extrapolation(est, grid)
    suite = evaluate_suite(models, test, grid)
    rows = []
    for name, metrics_ in suite.curves.items():
        for metric, curve in metrics_.items():
            rows.append(curve.to_frame(model=name, metric=metric))
    pd.concat(rows, ignore_index=True).to_csv(out / "metrics.csv", index=False)
    suite.ibs_frame().to_csv(out / "ibs.csv", index=False)
    curves = []
    for name, est in models.items():
        risks = est.predict_risk(test.covariates, grid)
        for subject in range(risks.shape[0]):
            curves.append(pd.DataFrame({
                "model": name, "subject": subject, "time": grid, "risk": risks[subject],
            }))
    pd.concat(curves, ignore_index=True).to_csv(out / "risk_curves.csv", index=False)
    print(f"wrote metrics for {list(models)} to {out}")
    return 0


def cmd_bootstrap(cmd: _Command) -> int:
    schema = cmd.schema()
    train = load_survival_csv(cmd.get("train", required=True), schema)
    test = load_survival_csv(cmd.get("test", required=True), schema)
    est, _, _ = _model_from_config(cmd)
    grid = default_eval_grid(test, int(cmd.get("grid_size", 100)))
    result = bootstrap_evaluate(
        est, train, test,
        n_boot=int(cmd.get("n_boot", 100)),
        grid=grid,
        seed=int(cmd.get("seed", 0)),
        n_jobs=int(cmd.get("jobs", 1)),
    )
    out = Path(cmd.get("out", required=True))
    out.mkdir(parents=True, exist_ok=True)
    rows = [curve.to_frame(model="model", metric=metric)
            for metric, curve in result.curves.items()]
    pd.concat(rows, ignore_index=True).to_csv(out / "metrics.csv", index=False)
    print(f"bootstrap bands from {int(cmd.get('n_boot', 100)) - result.n_failed} replicates "
          f"({result.n_failed} failed) -> {out}")
    return 0


def cmd_pipeline(cmd: _Command) -> int:
    raw = _load_json(cmd.get("pipeline_config", required=True))
    config = PipelineConfig.from_dict(raw)
    out = cmd.get("out") or config.raw.get("out_dir")
    if not out:
        raise ConfigurationError("pipeline needs --out or an 'out_dir' config entry")
    manifest = run_pipeline(config, out)
    print(f"pipeline complete; outputs: {manifest['outputs']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbsurv",
        description="Case-base survival modeling: simulate, fit, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"cbsurv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic survival dataset")
    p.add_argument("--config", help="JSON with defaults for the flags below")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--spec", help="JSON overriding the generator coefficients/knots")
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("split", help="train/validation/test split")
    p.add_argument("--config")
    _add_data_flags(p)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("gridsearch", help="cross-validated hyperparameter search")
    p.add_argument("--config")
    _add_data_flags(p)
    p.add_argument("--space", help="JSON search space")
    p.add_argument("--folds", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--ratio", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("fit", help="fit one model and serialize it to JSON")
    p.add_argument("--config")
    _add_data_flags(p)
    p.add_argument("--model-config", dest="model_config", help="JSON model settings")
    p.add_argument("--ratio", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dump-moments", dest="dump_moments",
                   help="write the person-moment table as CSV")
    p.add_argument("--out", help="output model JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="metrics for saved models on a test set")
    p.add_argument("--config")
    _add_data_flags(p)
    p.add_argument("--model", action="append", help="model JSON (repeatable)")
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bootstrap", help="bootstrap confidence bands for one model")
    p.add_argument("--config")
    p.add_argument("--train", help="training CSV")
    p.add_argument("--test", help="test CSV")
    p.add_argument("--time-col", dest="time_col")
    p.add_argument("--status-col", dest="status_col")
    p.add_argument("--covariates")
    p.add_argument("--model-config", dest="model_config")
    p.add_argument("--n-boot", dest="n_boot", type=int)
    p.add_argument("--ratio", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("pipeline", help="run the full reproducible pipeline")
    p.add_argument("--config", dest="pipeline_config",
                   help="pipeline config JSON, or a manifest.json to rerun")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(_Command(args))
    except CBSurvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


def entry_point() -> None:
    sys.exit(main())
