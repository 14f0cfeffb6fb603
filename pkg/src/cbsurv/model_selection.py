"""Hyperparameter grid search with cross-validated IBS, and bootstrap bands.

Candidates are named estimators (anything with ``fit``/``predict_risk`` and
scikit-learn ``get_params``), so arbitrary models can compete in the same
grid. Folds, per-fit seeds and replicate resamples all derive from the
master seed, making runs reproducible regardless of execution order.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.base import clone

from ._seeds import subseed
from .data import SurvivalData, bootstrap_resample
from .errors import ConfigurationError, DataError
from .estimators import CaseBaseNeuralNetwork, kaplan_meier
from .metrics import (
    MetricCurve,
    PredictionMatrix,
    auc_curve,
    brier_curve,
    default_eval_grid,
    integrated_brier,
    ipa,
    predictions_for,
)

logger = logging.getLogger(__name__)

DEFAULT_FOLDS = 3


@dataclasses.dataclass(frozen=True)
class SearchSpace:
    """Cartesian hyperparameter grid for the neural hazard model."""

    learning_rates: tuple[float, ...] = (0.001, 0.01)
    dropout_rates: tuple[float, ...] = (0.01, 0.05, 0.1)
    first_layer: tuple[int, ...] = (50, 75, 100)
    second_layer: tuple[int, ...] = (10, 25, 50)
    num_batches: tuple[int, ...] = (100, 500)
    activations: tuple[str, ...] = ("relu", "linear")

    def __post_init__(self):
        for name in ("learning_rates", "dropout_rates", "first_layer",
                     "second_layer", "num_batches", "activations"):
            if not getattr(self, name):
                raise ConfigurationError(f"search space field '{name}' is empty")

    @property
    def n_cells(self) -> int:
        return (
            len(self.learning_rates) * len(self.dropout_rates) * len(self.first_layer)
            * len(self.second_layer) * len(self.num_batches) * len(self.activations)
        )

    def candidates(self, **fixed) -> list[tuple[str, CaseBaseNeuralNetwork]]:
        """One named estimator per grid cell; ``fixed`` pins epochs/ratio/etc."""
        cells = []
        for lr in self.learning_rates:
            for dropout in self.dropout_rates:
                for first in self.first_layer:
                    for second in self.second_layer:
                        for nb in self.num_batches:
                            for act in self.activations:
                                name = (
                                    f"lr{lr:g}_do{dropout:g}_h{first}x{second}"
                                    f"_nb{nb}_{act}"
                                )
                                est = CaseBaseNeuralNetwork(
                                    hidden_layers=(first, second),
                                    activation=act,
                                    dropout=dropout,
                                    learning_rate=lr,
                                    num_batches=nb,
                                    **fixed,
                                )
                                cells.append((name, est))
        return cells

    def to_dict(self) -> dict:
        return {
            "learning_rates": list(self.learning_rates),
            "dropout_rates": list(self.dropout_rates),
            "first_layer": list(self.first_layer),
            "second_layer": list(self.second_layer),
            "num_batches": list(self.num_batches),
            "activations": list(self.activations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        defaults = cls()
        kwargs = {}
        for name in ("learning_rates", "dropout_rates", "first_layer",
                     "second_layer", "num_batches", "activations"):
            kwargs[name] = tuple(d.get(name, getattr(defaults, name)))
        return cls(**kwargs)


def default_search_space() -> SearchSpace:
    return SearchSpace()


@dataclasses.dataclass
class GridCell:
    name: str
    params: dict
    fold_ibs: tuple[float, ...]
    mean_ibs: float
    n_parameters: int
    selected: bool = False


@dataclasses.dataclass
class GridSearchResult:
    cells: list[GridCell]
    folds: int
    seed: int

    @property
    def best(self) -> GridCell:
        return next(cell for cell in self.cells if cell.selected)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for cell in self.cells:
            row = {"cell": cell.name, "mean_ibs": cell.mean_ibs,
                   "n_parameters": cell.n_parameters, "selected": cell.selected}
            for k, v in enumerate(cell.fold_ibs):
                row[f"fold{k}_ibs"] = v
            rows.append(row)
        return pd.DataFrame(rows)


def _fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(perm[k::folds]) for k in range(folds)]


def _draw_folds(train: SurvivalData, folds: int, seed: int) -> list[np.ndarray]:
    for attempt in range(2):
        assignment = _fold_indices(len(train), folds, subseed(seed, "folds", attempt))
        if all(train.event[idx].sum() > 0 for idx in assignment):
            return assignment
    raise DataError(
        f"could not draw {folds} folds with at least one event each; "
        "the dataset has too few events"
    )


def _estimator_parameters(est, n_covariates: int) -> int:
    """Rough parameter count used only for tie-breaking."""
    hidden = tuple(getattr(est, "hidden_layers", ()) or ())
    dims = [n_covariates + 1, *hidden, 1]
    return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))


def _fold_ibs(est, train: SurvivalData, fit_idx: np.ndarray, held_idx: np.ndarray,
              grid_size: int, fit_seed: int) -> float:
    fit_part = train.take(fit_idx)
    held_part = train.take(held_idx)
    model = clone(est)
    if "random_state" in model.get_params():
        model.set_params(random_state=fit_seed)
    model.fit(fit_part.covariates, fit_part.survival_target())
    # Evaluation window from the fitting fold's follow-up range.
    grid = default_eval_grid(fit_part, grid_size)
    pred = predictions_for(model, held_part, grid)
    bs = brier_curve(pred, held_part)
    return integrated_brier(bs, float(grid[-1]))


def grid_search(train: SurvivalData,
                candidates: SearchSpace | Sequence[tuple[str, object]] | Mapping[str, object],
                folds: int = DEFAULT_FOLDS, seed: int = 0,
                grid_size: int = 20, n_jobs: int = 1) -> GridSearchResult:
    """Select the candidate with the lowest mean cross-validated IBS.

    Every candidate sees the same seeded folds; each fold fit gets a fresh
    derived seed, so case-base sampling noise is folded into the selection.
    Ties break toward fewer parameters, then lower learning rate, then cell
    order.
    """
    if isinstance(candidates, SearchSpace):
        candidates = candidates.candidates()
    elif isinstance(candidates, Mapping):
        candidates = list(candidates.items())
    else:
        candidates = list(candidates)
    if not candidates:
        raise ConfigurationError("grid search needs at least one candidate")
    if train.n_events < folds:
        raise DataError(
            f"training data has {train.n_events} events, fewer than {folds} folds"
        )
    assignment = _draw_folds(train, folds, seed)
    all_indices = np.arange(len(train))

    jobs = []
    for ci, (name, est) in enumerate(candidates):
        for k, held_idx in enumerate(assignment):
            fit_idx = np.setdiff1d(all_indices, held_idx)
            jobs.append((ci, k, name, est, fit_idx, held_idx))
    scores = Parallel(n_jobs=n_jobs)(
        delayed(_fold_ibs)(
            est, train, fit_idx, held_idx, grid_size, subseed(seed, "cell", ci, "fold", k)
        )
        for ci, k, name, est, fit_idx, held_idx in jobs
    )

    per_cell: dict[int, list[float]] = {}
    for (ci, *_), score in zip(jobs, scores):
        per_cell.setdefault(ci, []).append(score)

    cells = []
    for ci, (name, est) in enumerate(candidates):
        fold_scores = tuple(per_cell[ci])
        cells.append(GridCell(
            name=name,
            params=est.get_params() if hasattr(est, "get_params") else {},
            fold_ibs=fold_scores,
            mean_ibs=float(np.mean(fold_scores)),
            n_parameters=_estimator_parameters(est, train.n_covariates),
        ))
    order = sorted(
        range(len(cells)),
        key=lambda i: (
            cells[i].mean_ibs,
            cells[i].n_parameters,
            cells[i].params.get("learning_rate", float("inf")),
            i,
        ),
    )
    cells[order[0]].selected = True
    return GridSearchResult(cells=cells, folds=folds, seed=seed)


@dataclasses.dataclass
class BootstrapResult:
    """Banded metric curves plus the raw replicate values behind the bands."""

    curves: dict[str, MetricCurve]          # "bs", "ipa", "auc"
    replicate_values: dict[str, np.ndarray]  # metric -> (n_replicates, len(grid))
    ibs: float
    n_failed: int


def _replicate_metrics(est, train: SurvivalData, test: SurvivalData,
                       grid: np.ndarray, null_bs: MetricCurve, fit_seed: int,
                       resample_seed: int | None):
    data = train if resample_seed is None else bootstrap_resample(train, resample_seed)
    model = clone(est)
    if "random_state" in model.get_params():
        model.set_params(random_state=fit_seed)
    model.fit(data.covariates, data.survival_target())
    pred = predictions_for(model, test, grid)
    bs = brier_curve(pred, test)
    return {
        "bs": bs.estimates,
        "ipa": ipa(bs, null_bs).estimates,
        "auc": auc_curve(pred, test).estimates,
        "ibs": integrated_brier(bs, float(grid[-1])),
    }


def bootstrap_evaluate(est, train: SurvivalData, test: SurvivalData,
                       n_boot: int = 100, grid=None, seed: int = 0,
                       n_jobs: int = 1,
                       max_failure_fraction: float = 0.1) -> BootstrapResult:
    """Percentile bands (2.5/97.5) from refits on resampled training data.

    The point estimate is the fit on the un-resampled training data; every
    replicate refits on a seeded resample and is evaluated against the fixed
    test set. Replicates that fail to train are dropped and logged; more
    than ``max_failure_fraction`` failures aborts.
    """
    if n_boot < 1:
        raise ConfigurationError(f"n_boot must be at least 1, got {n_boot}")
    grid = default_eval_grid(test) if grid is None else np.asarray(grid, dtype=float)
    null_pred = PredictionMatrix(
        grid, np.tile(kaplan_meier(test, "event").risk(grid), (len(test), 1))
    )
    null_bs = brier_curve(null_pred, test)

    point = _replicate_metrics(est, train, test, grid, null_bs,
                               subseed(seed, "point"), None)

    def one(rep: int):
        try:
            return _replicate_metrics(
                est, train, test, grid, null_bs,
                subseed(seed, "boot-fit", rep), subseed(seed, "boot-resample", rep),
            )
        except Exception as exc:  # noqa: BLE001 -- replicate failures are data
            logger.warning("bootstrap replicate %d failed: %s", rep, exc)
            return None

    results = Parallel(n_jobs=n_jobs)(delayed(one)(rep) for rep in range(n_boot))
    ok = [r for r in results if r is not None]
    n_failed = n_boot - len(ok)
    if n_failed > max_failure_fraction * n_boot:
        raise DataError(
            f"{n_failed} of {n_boot} bootstrap replicates failed to train"
        )

    curves: dict[str, MetricCurve] = {}
    replicate_values: dict[str, np.ndarray] = {}
    for metric in ("bs", "ipa", "auc"):
        stack = np.vstack([r[metric] for r in ok])
        replicate_values[metric] = stack
        lower = np.full(grid.shape, np.nan)
        upper = np.full(grid.shape, np.nan)
        defined = ~np.all(np.isnan(stack), axis=0)
        if np.any(defined):
            lower[defined], upper[defined] = np.nanpercentile(
                stack[:, defined], [2.5, 97.5], axis=0
            )
        curves[metric] = MetricCurve(grid, point[metric], lower, upper)
    return BootstrapResult(
        curves=curves, replicate_values=replicate_values,
        ibs=point["ibs"], n_failed=n_failed,
    )
