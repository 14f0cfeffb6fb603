"""Input validation helpers shared by the estimators and free functions."""

from __future__ import annotations

import numpy as np

from .errors import DataError, ValidationError


def as_float_array(x, name: str, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_covariates(X, n_features: int | None = None) -> np.ndarray:
    """Coerce a covariate matrix to 2-D float, optionally checking width."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValidationError(f"covariate matrix must be 2-dimensional, got shape {X.shape}")
    if X.size and not np.all(np.isfinite(X)):
        raise ValidationError("covariate matrix contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ValidationError(
            f"covariate matrix has {X.shape[1]} columns, expected {n_features}"
        )
    return X


def check_time_event(y) -> tuple[np.ndarray, np.ndarray]:
    """Unpack a survival target into (time, event) arrays.

    Accepts a structured array with 'time' and 'event' fields, a (n, 2)
    array-like ordered (time, event), or a 2-tuple of arrays.
    """
    if isinstance(y, np.ndarray) and y.dtype.names:
        names = set(y.dtype.names)
        if not {"time", "event"} <= names:
            raise ValidationError(
                f"structured survival target needs 'time' and 'event' fields, got {sorted(names)}"
            )
        time = np.asarray(y["time"], dtype=float)
        event = np.asarray(y["event"])
    elif isinstance(y, tuple) and len(y) == 2:
        time = np.asarray(y[0], dtype=float)
        event = np.asarray(y[1])
    else:
        arr = np.asarray(y, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValidationError(
                "survival target must be a structured array, an (n, 2) array of "
                f"(time, event), or a (time, event) tuple; got shape {arr.shape}"
            )
        time, event = arr[:, 0], arr[:, 1]
    return time, event


def check_times(times, name: str = "times") -> np.ndarray:
    times = np.atleast_1d(as_float_array(times, name))
    if times.ndim != 1:
        raise ValidationError(f"{name} must be 1-dimensional, got shape {times.shape}")
    if times.size and times.min() < 0:
        raise ValidationError(f"{name} must be nonnegative")
    return times


def check_grid(grid, name: str = "grid", start_at_zero: bool = False,
               min_points: int = 2) -> np.ndarray:
    grid = check_times(grid, name)
    if grid.size < min_points:
        raise ValidationError(f"{name} needs at least {min_points} point(s)")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError(f"{name} must be strictly increasing")
    if start_at_zero and grid[0] != 0.0:
        raise ValidationError(f"{name} must start at 0")
    return grid


def require_nonempty(n: int, what: str) -> None:
    if n == 0:
        raise DataError(f"{what} is empty")
