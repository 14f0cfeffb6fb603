"""Hazard models with a scikit-learn estimator surface.

Three interchangeable models, all exposing ``fit(X, y)`` and
``predict_risk(X, times)``:

* :class:`CaseBaseNeuralNetwork` -- feed-forward network on case-base
  sampled person-moments; time is a network input, so the learned hazard can
  vary freely over follow-up.
* :class:`CaseBaseLogisticRegression` -- the zero-hidden-layer special case,
  trained through the same loss/offset path, with a configurable feature map
  over (covariates, time).
* :class:`KaplanMeierEstimator` -- the covariate-free product-limit null.

The hazard-based models predict ``exp(f(x, t))`` with the training offset
zeroed out; absolute risk comes from a midpoint Riemann sum of the hazard.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from typing import Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator

from ._seeds import subseed
from ._validation import check_covariates, check_grid, check_time_event, check_times
from .data import SurvivalData
from .errors import ConfigurationError, DataError, NumericError, ValidationError
from .features import FeatureMap
from .network import (
    NetworkConfig,
    NetworkParameters,
    TrainingBatch,
    _forward_pass,
    train_network,
)
from .sampling import DEFAULT_RATIO, sample_case_base

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Kaplan-Meier
# ---------------------------------------------------------------------------

class KaplanMeierCurve:
    """Right-continuous product-limit step function with S(0) = 1.

    The risk set at time t is every subject with follow-up >= t, so at tied
    times events precede censorings. The ``censoring`` flavor swaps the roles
    of events and censorings to estimate the censoring distribution G.
    """

    def __init__(self, time: np.ndarray, event: np.ndarray, target: str = "event"):
        if target not in ("event", "censoring"):
            raise ConfigurationError(f"target must be 'event' or 'censoring', got '{target}'")
        time = np.asarray(time, dtype=float)
        if time.size == 0:
            raise DataError("cannot fit a product-limit curve on an empty dataset")
        flag = np.asarray(event, dtype=int)
        if target == "censoring":
            flag = 1 - flag
        order = np.argsort(time, kind="stable")
        t_sorted, f_sorted = time[order], flag[order]
        distinct, start = np.unique(t_sorted, return_index=True)
        events_at = np.add.reduceat(f_sorted, start)
        leaving_at = np.diff(np.append(start, t_sorted.size))
        at_risk = time.size - np.concatenate([[0], np.cumsum(leaving_at)[:-1]])
        jumps = events_at > 0
        self.target = target
        self.jump_times = distinct[jumps]
        with np.errstate(divide="ignore"):
            self.survival_values = np.cumprod(1.0 - events_at[jumps] / at_risk[jumps])

    def survival(self, t, left: bool = False) -> np.ndarray:
        """S(t); with ``left=True`` the left limit S(t-) (mass at t excluded)."""
        t_arr = np.asarray(t, dtype=float)
        side = "left" if left else "right"
        idx = np.searchsorted(self.jump_times, t_arr, side=side)
        values = np.concatenate([[1.0], self.survival_values])
        return values[idx] if t_arr.ndim else float(values[idx])

    def risk(self, t) -> np.ndarray:
        return 1.0 - self.survival(t)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "jump_times": self.jump_times.tolist(),
            "survival": self.survival_values.tolist(),
        }


def kaplan_meier(data: SurvivalData, target: str = "event") -> KaplanMeierCurve:
    """Product-limit estimator of the event (or censoring) distribution."""
    return KaplanMeierCurve(data.time, data.event, target)


# ---------------------------------------------------------------------------
# Risk curves
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class RiskCurve:
    """Cumulative event probability F(t) on a grid starting at 0."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = check_grid(self.times, "risk-curve grid", start_at_zero=True)
        values = np.asarray(self.values, dtype=float)
        if values.shape != times.shape:
            raise ValidationError("risk-curve values must match the grid length")
        if values[0] != 0.0 or np.any(np.diff(values) < 0) or values[-1] > 1.0 or np.any(values < 0):
            raise ValidationError("risk-curve values must be nondecreasing within [0, 1] with F(0)=0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.times, "value": self.values})


def _cumulative_hazard_midpoint(hazards: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Prefix sums of h(midpoint) * width; column j belongs to grid point j+1."""
    widths = np.diff(grid)
    return np.concatenate(
        [np.zeros((*hazards.shape[:-1], 1)), np.cumsum(hazards * widths, axis=-1)], axis=-1
    )


def risk_curve(model, covariates, grid) -> RiskCurve:
    """F(t) = 1 - exp(-sum of midpoint-rule hazard increments) along ``grid``.

    ``model`` is anything with ``predict_hazard(X, times)``; ``grid`` must be
    strictly increasing and start at 0.
    """
    grid = check_grid(grid, "grid", start_at_zero=True)
    covariates = check_covariates(covariates)
    if covariates.shape[0] != 1:
        raise ValidationError("risk_curve expects a single covariate profile")
    midpoints = 0.5 * (grid[:-1] + grid[1:])
    hazards = np.asarray(model.predict_hazard(covariates, midpoints), dtype=float)[0]
    if np.any(hazards < 0) or not np.all(np.isfinite(hazards)):
        raise NumericError("model produced a negative or non-finite hazard")
    cumulative = _cumulative_hazard_midpoint(hazards, grid)
    return RiskCurve(grid, -np.expm1(-cumulative))


def km_risk(data: SurvivalData, grid) -> RiskCurve:
    """Covariate-free null prediction 1 - S_KM(t) on ``grid``."""
    curve = kaplan_meier(data, "event")
    grid = check_grid(grid, "grid", start_at_zero=True)
    return RiskCurve(grid, curve.risk(grid))


# ---------------------------------------------------------------------------
# Hazard estimators
# ---------------------------------------------------------------------------

class _HazardEstimator(BaseEstimator):
    """Shared prediction plumbing for the offset-trained hazard models."""

    def _check_fitted(self):
        if not hasattr(self, "network_"):
            raise ConfigurationError(f"{type(self).__name__} is not fitted")

    def _model_features(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_log_hazard(self, X, times) -> np.ndarray:
        """log h(t | x) for every covariate row and time: shape (n, k).

        Evaluated without dropout and with the training offset set to 0; the
        sampling rate correction already happened during fitting.
        """
        self._check_fitted()
        X = check_covariates(X, self.n_features_in_)
        times = check_times(times)
        out = np.empty((X.shape[0], times.size))
        for j, t in enumerate(times):
            feats = self._model_features(X, np.full(X.shape[0], t))
            out[:, j] = _forward_pass(self.network_, feats, 0.0, False, None)
        return out

    def predict_hazard(self, X, times) -> np.ndarray:
        """Nonnegative hazard exp(f(x, t)): shape (n, k)."""
        return np.exp(self.predict_log_hazard(X, times))

    def predict_risk(self, X, times, integration_points: int = 512) -> np.ndarray:
        """Absolute risk F(t | x) at the requested times: shape (n, k).

        The hazard is integrated by the midpoint rule on a uniform grid of
        ``integration_points`` intervals from 0 to max(times); the cumulative
        hazard is interpolated linearly at the requested times.
        """
        self._check_fitted()
        X = check_covariates(X, self.n_features_in_)
        times = check_times(times)
        horizon = float(times.max(initial=0.0))
        if horizon == 0.0:
            return np.zeros((X.shape[0], times.size))
        grid = np.linspace(0.0, horizon, integration_points + 1)
        midpoints = 0.5 * (grid[:-1] + grid[1:])
        hazards = self.predict_hazard(X, midpoints)
        if np.any(hazards < 0) or not np.all(np.isfinite(hazards)):
            raise NumericError("model produced a negative or non-finite hazard")
        cumulative = _cumulative_hazard_midpoint(hazards, grid)
        interp = np.array([np.interp(times, grid, row) for row in cumulative])
        return -np.expm1(-interp)

    def _fit_network(self, features, labels, offset, layer_sizes, dropout_rate):
        config = NetworkConfig(
            layer_sizes=layer_sizes,
            activation=getattr(self, "activation", "linear"),
            dropout_rate=dropout_rate,
            learning_rate=self.learning_rate,
            num_batches=self.num_batches,
            epochs=self.epochs,
            seed=subseed(self.random_state, "network"),
        )
        batch = TrainingBatch(features, labels, offset)
        self.network_, self.history_ = train_network(batch, config)
        self.offset_ = float(offset)

    def _store_data_facts(self, data: SurvivalData):
        self.n_features_in_ = data.n_covariates
        self.covariate_names_ = data.covariate_names
        self.follow_up_range_ = (float(data.time.min()), float(data.time.max()))

    def _unpack(self, X, y) -> SurvivalData:
        X = check_covariates(X)
        time, event = check_time_event(y)
        return SurvivalData(time, event, X)


class CaseBaseNeuralNetwork(_HazardEstimator):
    """Feed-forward hazard network trained on case-base sampled moments.

    Parameters
    ----------
    hidden_layers : tuple of int
        Hidden layer widths; empty means a linear model on (covariates, time).
    activation : {'relu', 'linear'}
        Hidden-layer activation.
    dropout : float in [0, 1)
        Inverted-dropout rate on hidden layers during training.
    learning_rate : float
        Adam step size.
    num_batches : int
        Mini-batches per epoch.
    epochs : int
        Training epochs; the best epoch by full-sample loss is kept.
    ratio : int
        Base-series size as a multiple of the event count.
    random_state : int
        Master seed for sampling, initialization and shuffling.
    """

    def __init__(self, hidden_layers=(50, 25), activation="relu", dropout=0.05,
                 learning_rate=0.01, num_batches=100, epochs=200,
                 ratio=DEFAULT_RATIO, random_state=0):
        self.hidden_layers = hidden_layers
        self.activation = activation
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.num_batches = num_batches
        self.epochs = epochs
        self.ratio = ratio
        self.random_state = random_state

    def fit(self, X, y):
        data = self._unpack(X, y)
        self.sampling_seed_ = subseed(self.random_state, "sample")
        sample = sample_case_base(data, self.ratio, self.sampling_seed_)
        self._fit_network(
            sample.features, sample.labels, sample.offset,
            tuple(self.hidden_layers), self.dropout,
        )
        self._store_data_facts(data)
        return self

    def _model_features(self, X, t):
        return np.column_stack([X, t])

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model": "case_base_neural_network",
            "params": {
                "hidden_layers": list(self.hidden_layers),
                "activation": self.activation,
                "dropout": self.dropout,
                "learning_rate": self.learning_rate,
                "num_batches": self.num_batches,
                "epochs": self.epochs,
                "ratio": self.ratio,
                "random_state": self.random_state,
            },
            "network": self.network_.to_dict(),
            "offset": self.offset_,
            "covariate_names": list(self.covariate_names_),
            "time_column": "appended_last",
            "follow_up_range": list(self.follow_up_range_),
            "training": {"best_epoch": self.history_.best_epoch,
                         "best_loss": self.history_.best_loss},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CaseBaseNeuralNetwork":
        params = dict(doc["params"])
        params["hidden_layers"] = tuple(params["hidden_layers"])
        est = cls(**params)
        est.network_ = NetworkParameters.from_dict(doc["network"])
        est.offset_ = float(doc["offset"])
        est.covariate_names_ = tuple(doc["covariate_names"])
        est.n_features_in_ = len(est.covariate_names_)
        est.follow_up_range_ = tuple(doc["follow_up_range"])
        return est


class CaseBaseLogisticRegression(_HazardEstimator):
    """Linear log-hazard model on mapped (covariate, time) features.

    Shares the loss and offset machinery with the network model by training
    a zero-hidden-layer network on the mapped design matrix. The default
    feature map is one raw column per covariate, i.e. a hazard constant in
    time; richer maps (splines of time, interactions) reproduce flexible
    baselines up to the exact generating form.
    """

    def __init__(self, feature_map=None, learning_rate=0.01, num_batches=100,
                 epochs=200, ratio=DEFAULT_RATIO, random_state=0):
        self.feature_map = feature_map
        self.learning_rate = learning_rate
        self.num_batches = num_batches
        self.epochs = epochs
        self.ratio = ratio
        self.random_state = random_state

    activation = "linear"

    def _resolved_map(self, n_covariates: int) -> FeatureMap:
        fmap = self.feature_map
        if fmap is None:
            fmap = FeatureMap.identity(n_covariates)
        elif not isinstance(fmap, FeatureMap):
            fmap = FeatureMap.from_spec(fmap)
        fmap.validate(n_covariates)
        return fmap

    def fit(self, X, y):
        data = self._unpack(X, y)
        fmap = self._resolved_map(data.n_covariates)
        self.sampling_seed_ = subseed(self.random_state, "sample")
        sample = sample_case_base(data, self.ratio, self.sampling_seed_)
        design = fmap.transform(sample.covariates, sample.times)
        self._fit_network(design, sample.labels, sample.offset, (), 0.0)
        self._store_data_facts(data)
        self.feature_map_ = fmap
        self.design_width_ = design.shape[1]
        largest = float(np.max(np.abs(self.network_.weights[0]))) if design.shape[1] else 0.0
        if largest > 30.0 or self.history_.final_grad_max > 1e-2:
            logger.warning(
                "possible separation or non-convergence: max |coefficient| %.3g, "
                "max |gradient| %.3g", largest, self.history_.final_grad_max,
            )
        return self

    @property
    def coefficients_(self) -> np.ndarray:
        self._check_fitted()
        return self.network_.weights[0][:, 0]

    @property
    def intercept_(self) -> float:
        self._check_fitted()
        return float(self.network_.biases[0][0])

    def _model_features(self, X, t):
        return self.feature_map_.transform(X, t)

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model": "case_base_logistic_regression",
            "params": {
                "learning_rate": self.learning_rate,
                "num_batches": self.num_batches,
                "epochs": self.epochs,
                "ratio": self.ratio,
                "random_state": self.random_state,
            },
            "feature_map": self.feature_map_.to_spec(),
            "network": self.network_.to_dict(),
            "offset": self.offset_,
            "covariate_names": list(self.covariate_names_),
            "time_column": "appended_last",
            "follow_up_range": list(self.follow_up_range_),
            "training": {"best_epoch": self.history_.best_epoch,
                         "best_loss": self.history_.best_loss},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CaseBaseLogisticRegression":
        est = cls(feature_map=doc["feature_map"], **doc["params"])
        est.feature_map_ = FeatureMap.from_spec(doc["feature_map"])
        est.network_ = NetworkParameters.from_dict(doc["network"])
        est.offset_ = float(doc["offset"])
        est.covariate_names_ = tuple(doc["covariate_names"])
        est.n_features_in_ = len(est.covariate_names_)
        est.follow_up_range_ = tuple(doc["follow_up_range"])
        return est


class KaplanMeierEstimator(BaseEstimator):
    """Covariate-free null model: every subject gets the marginal KM risk."""

    def fit(self, X, y):
        time, event = check_time_event(y)
        self.curve_ = KaplanMeierCurve(time, event, "event")
        self.n_features_in_ = 0 if X is None else check_covariates(X).shape[1]
        self.follow_up_range_ = (float(time.min()), float(time.max()))
        return self

    def predict_risk(self, X, times) -> np.ndarray:
        if not hasattr(self, "curve_"):
            raise ConfigurationError("KaplanMeierEstimator is not fitted")
        times = check_times(times)
        n = 1 if X is None else check_covariates(X).shape[0]
        return np.tile(self.curve_.risk(times), (n, 1))

    def to_dict(self) -> dict:
        if not hasattr(self, "curve_"):
            raise ConfigurationError("KaplanMeierEstimator is not fitted")
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model": "kaplan_meier",
            "curve": self.curve_.to_dict(),
            "follow_up_range": list(self.follow_up_range_),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KaplanMeierEstimator":
        est = cls()
        curve = KaplanMeierCurve.__new__(KaplanMeierCurve)
        curve.target = doc["curve"]["target"]
        curve.jump_times = np.asarray(doc["curve"]["jump_times"], dtype=float)
        curve.survival_values = np.asarray(doc["curve"]["survival"], dtype=float)
        est.curve_ = curve
        est.follow_up_range_ = tuple(doc["follow_up_range"])
        est.n_features_in_ = 0
        return est


_MODEL_CLASSES = {
    "case_base_neural_network": CaseBaseNeuralNetwork,
    "case_base_logistic_regression": CaseBaseLogisticRegression,
    "kaplan_meier": KaplanMeierEstimator,
}


def model_to_dict(est) -> dict:
    return est.to_dict()


def model_from_dict(doc: dict):
    kind = doc.get("model")
    if kind not in _MODEL_CLASSES:
        raise ConfigurationError(f"unknown serialized model type '{kind}'")
    if "format_version" not in doc:
        raise ConfigurationError("serialized model is missing 'format_version'")
    return _MODEL_CLASSES[kind].from_dict(doc)


def save_model(est, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(est), fh, indent=2)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
