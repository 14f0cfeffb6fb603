"""Time-dependent model evaluation under right censoring.

Brier score with inverse-probability-of-censoring weights (IPCW), its
integral over follow-up, the index of prediction accuracy against the
Kaplan-Meier null, and the IPCW-adjusted time-dependent AUC. Everything is
deterministic; censoring is handled through the product-limit estimate G of
the censoring distribution, using the left limit G(T-) for event terms so a
subject's own exit never discounts its event.
"""

from __future__ import annotations

import dataclasses
from typing import Mapping

import numpy as np
import pandas as pd

from ._validation import check_grid
from .data import SurvivalData
from .errors import DataError, ValidationError
from .estimators import KaplanMeierCurve, kaplan_meier

DEFAULT_GRID_SIZE = 100


@dataclasses.dataclass(frozen=True)
class PredictionMatrix:
    """Per-subject risk values on a shared, strictly increasing time grid."""

    grid: np.ndarray
    values: np.ndarray  # shape (n_subjects, len(grid))

    def __post_init__(self):
        grid = check_grid(self.grid, "prediction grid", min_points=1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != grid.size:
            raise ValidationError(
                f"prediction values must be (n_subjects, {grid.size}), got {values.shape}"
            )
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValidationError("risk predictions must lie in [0, 1]")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    def at_time(self, t: float) -> np.ndarray:
        """Step lookup: the column of the largest grid time <= t."""
        idx = int(np.searchsorted(self.grid, t, side="right")) - 1
        if idx < 0:
            raise DataError(f"time {t} precedes the prediction grid start {self.grid[0]}")
        return self.values[:, idx]


@dataclasses.dataclass(frozen=True)
class MetricCurve:
    """Point estimates over time, with optional percentile bands."""

    times: np.ndarray
    estimates: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        times = check_grid(self.times, "metric grid", min_points=1)
        estimates = np.asarray(self.estimates, dtype=float)
        if estimates.shape != times.shape:
            raise ValidationError("metric estimates must match the grid length")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "estimates", estimates)
        for name in ("lower", "upper"):
            band = getattr(self, name)
            if band is not None:
                band = np.asarray(band, dtype=float)
                if band.shape != times.shape:
                    raise ValidationError(f"{name} band must match the grid length")
                object.__setattr__(self, name, band)
        if self.lower is not None and self.upper is not None:
            ok = ~(np.isnan(self.lower) | np.isnan(self.upper))
            if np.any(self.lower[ok] > self.upper[ok]):
                raise ValidationError("lower band exceeds upper band")

    def to_frame(self, model: str = "", metric: str = "") -> pd.DataFrame:
        frame = pd.DataFrame({"time": self.times, "estimate": self.estimates})
        frame["lower"] = self.lower if self.lower is not None else np.nan
        frame["upper"] = self.upper if self.upper is not None else np.nan
        if metric:
            frame.insert(0, "metric", metric)
        if model:
            frame.insert(0, "model", model)
        return frame


class _IPCW:
    """Precomputed censoring weights for one evaluation dataset."""

    def __init__(self, data: SurvivalData, censor_curve: KaplanMeierCurve | None = None):
        self.data = data
        self.curve = censor_curve or kaplan_meier(data, "censoring")
        self.event_mask = data.event == 1
        # G(T_i-): the subject's own censoring mass at T_i must not count.
        self.g_before_event = self.curve.survival(data.time, left=True)

    def g_at(self, t: float) -> float:
        return float(self.curve.survival(t))

    def weights(self, t: float) -> np.ndarray:
        time = self.data.time
        w = np.zeros(len(self.data))
        had_event = self.event_mask & (time <= t)
        if np.any(had_event):
            g_event = self.g_before_event[had_event]
            if np.any(g_event <= 0.0):
                bad = self.data.time[had_event][g_event <= 0.0][0]
                raise DataError(
                    f"degenerate censoring distribution: G({bad:g}-) = 0 where an "
                    "event weight is required"
                )
            w[had_event] = 1.0 / g_event
        at_risk = time > t
        if np.any(at_risk):
            g_t = self.g_at(t)
            if g_t <= 0.0:
                raise DataError(
                    f"degenerate censoring distribution: G({t:g}) = 0 where at-risk "
                    "weights are required"
                )
            w[at_risk] = 1.0 / g_t
        return w


def censoring_weights(data: SurvivalData, t: float) -> np.ndarray:
    """Per-subject IPCW weights W_i(t).

    Events by t weigh 1/G(T_i-), subjects still at risk weigh 1/G(t), and
    subjects censored by t weigh 0.
    """
    return _IPCW(data).weights(t)


def brier_score(pred: PredictionMatrix, data: SurvivalData, t: float) -> float:
    """IPCW Brier score at time ``t``.

    mean over subjects of (1 - F)^2 I(T<=t, event)/G(T-) + F^2 I(T>t)/G(t).
    """
    ipcw = _IPCW(data)
    return _brier_at(pred.at_time(t), data, t, ipcw)


def _brier_at(risk: np.ndarray, data: SurvivalData, t: float, ipcw: _IPCW) -> float:
    if risk.shape != (len(data),) :
        raise ValidationError("predictions are not aligned with the dataset")
    w = ipcw.weights(t)
    had_event = ipcw.event_mask & (data.time <= t)
    at_risk = data.time > t
    terms = np.zeros(len(data))
    terms[had_event] = (1.0 - risk[had_event]) ** 2 * w[had_event]
    terms[at_risk] = risk[at_risk] ** 2 * w[at_risk]
    return float(terms.mean())


def brier_curve(pred: PredictionMatrix, data: SurvivalData) -> MetricCurve:
    """Brier score at every grid time of the prediction matrix."""
    ipcw = _IPCW(data)
    scores = [
        _brier_at(pred.values[:, j], data, t, ipcw) for j, t in enumerate(pred.grid)
    ]
    return MetricCurve(pred.grid, np.asarray(scores))


def integrated_brier(bs: MetricCurve, t_max: float) -> float:
    """Weighted integral of the Brier curve with w(t) = t / t_max.

    Trapezoidal rule over the curve's grid up to ``t_max``; equivalently the
    time-weighted average Brier score. The grid must reach ``t_max``.
    """
    if t_max <= 0:
        raise DataError(f"t_max must be positive, got {t_max}")
    grid, values = bs.times, bs.estimates
    if grid[-1] < t_max - 1e-12:
        raise DataError(
            f"metric grid ends at {grid[-1]:g}, short of t_max = {t_max:g}"
        )
    inside = grid <= t_max
    xs = grid[inside]
    ys = values[inside]
    if xs.size == 0:
        raise DataError(f"metric grid starts beyond t_max = {t_max:g}")
    if xs[-1] < t_max:
        xs = np.append(xs, t_max)
        ys = np.append(ys, np.interp(t_max, grid, values))
    return float(np.trapezoid(ys, xs) / t_max)


def ipa(bs_model: MetricCurve, bs_null: MetricCurve) -> MetricCurve:
    """Index of prediction accuracy: 1 - BS_model(t) / BS_null(t).

    Bounded above by 1; negative where the null predicts better. Points with
    BS_null(t) = 0 are undefined and reported as NaN rather than +/-inf,
    except that two exactly zero scores compare as 0 (so a model evaluated
    against itself scores 0 on the whole grid).
    """
    if not np.array_equal(bs_model.times, bs_null.times):
        raise ValidationError("model and null Brier curves must share their grid")
    null = bs_null.estimates
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(null > 0.0, 1.0 - bs_model.estimates / null, np.nan)
    both_zero = (null == 0.0) & (bs_model.estimates == 0.0)
    values[both_zero] = 0.0
    return MetricCurve(bs_model.times, values)


def auc_ipcw(pred: PredictionMatrix, data: SurvivalData, t: float) -> float:
    """IPCW-weighted probability that a case outranks a control at time ``t``.

    Cases are subjects with an event by t, controls those still at risk;
    pairs are weighted by W_i(t) W_j(t). Ties in predicted risk count 1/2,
    so constant predictions score 0.5. Returns NaN when no weighted pair
    exists.
    """
    ipcw = _IPCW(data)
    return _auc_at(pred.at_time(t), data, t, ipcw)


def _auc_at(risk: np.ndarray, data: SurvivalData, t: float, ipcw: _IPCW) -> float:
    cases = ipcw.event_mask & (data.time <= t)
    controls = data.time > t
    if not np.any(cases) or not np.any(controls):
        return float("nan")
    w = ipcw.weights(t)
    w_cases = w[cases]
    w_controls = w[controls]
    risk_cases = risk[cases]
    # Controls share the weight 1/G(t): rank-count the concordant pairs.
    ctrl_sorted = np.sort(risk[controls])
    below = np.searchsorted(ctrl_sorted, risk_cases, side="left")
    tied = np.searchsorted(ctrl_sorted, risk_cases, side="right") - below
    w_ctrl = w_controls[0]
    numerator = float(np.sum(w_cases * (below + 0.5 * tied)) * w_ctrl)
    denominator = float(np.sum(w_cases) * np.sum(w_controls))
    if denominator == 0.0:
        return float("nan")
    return numerator / denominator


def auc_curve(pred: PredictionMatrix, data: SurvivalData) -> MetricCurve:
    ipcw = _IPCW(data)
    values = [
        _auc_at(pred.values[:, j], data, t, ipcw) for j, t in enumerate(pred.grid)
    ]
    return MetricCurve(pred.grid, np.asarray(values))


def default_eval_grid(data: SurvivalData, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Equally spaced times from the 1st to the 99th percentile of follow-up.

    Staying inside the observed range keeps G(t) away from 0 at the tail.
    """
    lo, hi = np.percentile(data.time, [1.0, 99.0])
    if hi <= lo:
        raise DataError("follow-up times are too concentrated to build an evaluation grid")
    return np.linspace(lo, hi, size)


@dataclasses.dataclass
class SuiteResult:
    """Aligned per-model metric curves plus integrated Brier scalars."""

    grid: np.ndarray
    curves: dict[str, dict[str, MetricCurve]]  # model -> {"bs", "ipa", "auc"}
    ibs: dict[str, float]
    null_bs: MetricCurve

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for model, metrics in self.curves.items():
            frame = pd.DataFrame({
                "time": self.grid,
                "model": model,
                "bs": metrics["bs"].estimates,
                "ipa": metrics["ipa"].estimates,
                "auc": metrics["auc"].estimates,
            })
            rows.append(frame)
        return pd.concat(rows, ignore_index=True)

    def ibs_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"model": list(self.ibs.keys()), "ibs": list(self.ibs.values())}
        )


def predictions_for(model, data: SurvivalData, grid) -> PredictionMatrix:
    """Risk predictions for every subject of ``data`` on ``grid``."""
    values = model.predict_risk(data.covariates, grid)
    return PredictionMatrix(np.asarray(grid, dtype=float), values)


def evaluate_suite(models: Mapping[str, object], test: SurvivalData,
                   grid=None, t_max: float | None = None) -> SuiteResult:
    """BS/IPA/AUC curves and IBS for every model on a shared test set.

    The null prediction for IPA is the Kaplan-Meier risk of the test set
    itself, recomputed internally.
    """
    grid = default_eval_grid(test) if grid is None else check_grid(grid, "grid")
    t_max = float(grid[-1]) if t_max is None else float(t_max)
    null_pred = PredictionMatrix(
        grid, np.tile(kaplan_meier(test, "event").risk(grid), (len(test), 1))
    )
    null_bs = brier_curve(null_pred, test)
    curves: dict[str, dict[str, MetricCurve]] = {}
    ibs: dict[str, float] = {}
    for name, model in models.items():
        pred = predictions_for(model, test, grid)
        bs = brier_curve(pred, test)
        curves[name] = {
            "bs": bs,
            "ipa": ipa(bs, null_bs),
            "auc": auc_curve(pred, test),
        }
        ibs[name] = integrated_brier(bs, t_max)
    return SuiteResult(grid=grid, curves=curves, ibs=ibs, null_bs=null_bs)
