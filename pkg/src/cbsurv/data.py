"""Right-censored survival datasets: CSV ingestion, splits, bootstrap resampling.

A dataset is an immutable column store of follow-up times, event indicators
and a covariate matrix. Row order is preserved everywhere; summaries (total
follow-up ``B``, event count ``c``) are derived exactly from the columns.
"""

from __future__ import annotations

import dataclasses
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import pandas as pd

from ._validation import check_covariates
from .errors import ConfigurationError, DataError, ParseError, SchemaError, ValidationError


class SubjectRecord(NamedTuple):
    follow_up_time: float
    event_status: int
    covariates: np.ndarray


@dataclasses.dataclass(frozen=True)
class CsvSchema:
    """Column mapping for survival CSV files (header row required)."""

    time_col: str
    status_col: str
    covariates: tuple[str, ...]

    def __post_init__(self):
        if not self.covariates:
            raise ConfigurationError("schema needs at least one covariate column")
        cols = [self.time_col, self.status_col, *self.covariates]
        if len(set(cols)) != len(cols):
            raise ConfigurationError(f"schema columns must be distinct, got {cols}")


@dataclasses.dataclass(frozen=True)
class SplitSpec:
    """Fractions and seed for a train/validation/test split.

    ``test_fraction`` is taken from the full dataset; ``validation_fraction``
    from what remains. Floor arithmetic, remainder rows go to train.
    """

    test_fraction: float
    validation_fraction: float
    seed: int = 0

    def __post_init__(self):
        for name in ("test_fraction", "validation_fraction"):
            f = getattr(self, name)
            if not 0.0 < f < 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {f}")


class SurvivalData:
    """Immutable right-censored survival dataset.

    Parameters
    ----------
    time : array-like of shape (n,)
        Nonnegative, finite follow-up times.
    event : array-like of shape (n,)
        Event indicators; 1 = event observed, 0 = censored.
    covariates : array-like of shape (n, p)
        Covariate matrix, one row per subject.
    covariate_names : sequence of str, optional
        Defaults to ``x0..x{p-1}``.
    meta : dict, optional
        Free-form provenance (e.g. simulation spec and censoring accounting).
        Not part of dataset equality and not written to CSV.
    """

    def __init__(self, time, event, covariates, covariate_names=None, meta=None):
        time = np.asarray(time, dtype=float)
        if time.ndim != 1:
            raise ValidationError(f"time must be 1-dimensional, got shape {time.shape}")
        if time.size and (not np.all(np.isfinite(time)) or time.min() < 0):
            raise ValidationError("follow-up times must be finite and nonnegative")
        event_arr = np.asarray(event)
        if event_arr.shape != time.shape:
            raise ValidationError("time and event must have the same length")
        event_float = np.asarray(event_arr, dtype=float)
        if event_float.size and not np.all(np.isin(event_float, (0.0, 1.0))):
            raise ValidationError("event status must be 0 or 1")
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        if covariates.ndim != 2:
            raise ValidationError(
                f"covariate matrix must be 2-dimensional, got shape {covariates.shape}"
            )
        if covariates.size and not np.all(np.isfinite(covariates)):
            raise ValidationError("covariate matrix contains non-finite values")
        if covariates.shape[0] != time.size:
            raise ValidationError(
                f"covariate matrix has {covariates.shape[0]} rows for {time.size} subjects"
            )
        if covariate_names is None:
            covariate_names = tuple(f"x{j}" for j in range(covariates.shape[1]))
        covariate_names = tuple(str(c) for c in covariate_names)
        if len(covariate_names) != covariates.shape[1]:
            raise ValidationError(
                f"{len(covariate_names)} covariate names for {covariates.shape[1]} columns"
            )
        self._time = time
        self._event = event_float.astype(np.int8)
        self._covariates = covariates
        self.covariate_names = covariate_names
        self.meta = dict(meta) if meta else {}
        for arr in (self._time, self._event, self._covariates):
            arr.flags.writeable = False

    # -- columns ---------------------------------------------------------

    @property
    def time(self) -> np.ndarray:
        return self._time

    @property
    def event(self) -> np.ndarray:
        return self._event

    @property
    def covariates(self) -> np.ndarray:
        return self._covariates

    # -- derived summaries -------------------------------------------------

    @property
    def total_follow_up(self) -> float:
        """Sum of all follow-up times (the size of the study base)."""
        return float(self._time.sum())

    @property
    def n_events(self) -> int:
        return int(self._event.sum())

    @property
    def n_covariates(self) -> int:
        return self._covariates.shape[1]

    def __len__(self) -> int:
        return self._time.size

    def record(self, i: int) -> SubjectRecord:
        return SubjectRecord(float(self._time[i]), int(self._event[i]), self._covariates[i])

    def iter_records(self) -> Iterator[SubjectRecord]:
        return (self.record(i) for i in range(len(self)))

    def take(self, indices) -> "SurvivalData":
        """New dataset from a row-index selection (order as given)."""
        idx = np.asarray(indices, dtype=int)
        return SurvivalData(
            self._time[idx], self._event[idx], self._covariates[idx], self.covariate_names
        )

    def survival_target(self) -> np.ndarray:
        """Structured (event, time) array, the `y` for estimator ``fit``."""
        y = np.empty(len(self), dtype=[("event", "?"), ("time", "<f8")])
        y["event"] = self._event.astype(bool)
        y["time"] = self._time
        return y

    def equals(self, other: "SurvivalData") -> bool:
        return (
            isinstance(other, SurvivalData)
            and self.covariate_names == other.covariate_names
            and np.array_equal(self._time, other._time)
            and np.array_equal(self._event, other._event)
            and np.array_equal(self._covariates, other._covariates)
        )

    def __repr__(self) -> str:
        return (
            f"<SurvivalData n={len(self)} events={self.n_events} "
            f"covariates={list(self.covariate_names)}>"
        )

    # -- I/O ---------------------------------------------------------------

    def to_frame(self, schema: CsvSchema | None = None) -> pd.DataFrame:
        time_col = schema.time_col if schema else "time"
        status_col = schema.status_col if schema else "status"
        names = schema.covariates if schema else self.covariate_names
        frame = pd.DataFrame({time_col: self._time, status_col: self._event})
        for name, col in zip(names, self._covariates.T):
            frame[name] = col
        return frame

    def save_csv(self, path, schema: CsvSchema | None = None) -> None:
        self.to_frame(schema).to_csv(path, index=False)


def _parse_column(raw: pd.Series, column: str) -> np.ndarray:
    values = np.empty(len(raw), dtype=float)
    for pos, cell in enumerate(raw.to_numpy()):
        text = str(cell).strip()
        if text == "":
            raise ParseError(f"missing value in column '{column}' at row {pos + 1}")
        try:
            value = float(text)
        except ValueError:
            raise ParseError(
                f"could not parse '{text}' in column '{column}' at row {pos + 1}"
            ) from None
        if not np.isfinite(value):
            raise ParseError(f"non-finite value in column '{column}' at row {pos + 1}")
        values[pos] = value
    return values


def load_survival_csv(path, schema: CsvSchema) -> SurvivalData:
    """Read a header CSV into a :class:`SurvivalData`, preserving row order.

    Rows in error messages are 1-based data rows (header excluded).
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [
        c for c in (schema.time_col, schema.status_col, *schema.covariates)
        if c not in frame.columns
    ]
    if missing:
        raise SchemaError(f"missing column(s) {missing} in {path}")

    time = _parse_column(frame[schema.time_col], schema.time_col)
    bad = np.nonzero(time < 0)[0]
    if bad.size:
        raise ParseError(
            f"negative time in column '{schema.time_col}' at row {bad[0] + 1}"
        )
    status = _parse_column(frame[schema.status_col], schema.status_col)
    bad = np.nonzero(~np.isin(status, (0.0, 1.0)))[0]
    if bad.size:
        raise ValidationError(
            f"status value {status[bad[0]]:g} outside {{0, 1}} in column "
            f"'{schema.status_col}' at row {bad[0] + 1}"
        )
    columns = [_parse_column(frame[c], c) for c in schema.covariates]
    covariates = np.column_stack(columns) if columns else np.empty((len(time), 0))
    return SurvivalData(time, status, covariates, schema.covariates)


def split_dataset(
    data: SurvivalData, spec: SplitSpec
) -> tuple[SurvivalData, SurvivalData, SurvivalData]:
    """Seeded random partition into (train, validation, test).

    Sizes are ``floor(n * test_fraction)`` for test, then
    ``floor(remaining * validation_fraction)`` for validation; every
    remaining row goes to train. Within each partition the original row
    order is kept.
    """
    n = len(data)
    n_test = int(np.floor(n * spec.test_fraction))
    n_val = int(np.floor((n - n_test) * spec.validation_fraction))
    n_train = n - n_test - n_val
    if min(n_train, n_val, n_test) == 0:
        raise ConfigurationError(
            f"split of n={n} with fractions ({spec.test_fraction}, "
            f"{spec.validation_fraction}) leaves an empty partition"
        )
    perm = np.random.default_rng(spec.seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    val_idx = np.sort(perm[n_test:n_test + n_val])
    train_idx = np.sort(perm[n_test + n_val:])
    return data.take(train_idx), data.take(val_idx), data.take(test_idx)


def bootstrap_resample(data: SurvivalData, seed: int) -> SurvivalData:
    """Resample ``len(data)`` records with replacement, deterministic per seed."""
    n = len(data)
    if n == 0:
        raise DataError("cannot bootstrap an empty dataset")
    idx = np.random.default_rng(seed).integers(0, n, size=n)
    return data.take(idx)
