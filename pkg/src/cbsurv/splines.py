"""Restricted (natural) cubic spline basis on the log-time axis."""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConfigurationError, DataError


@dataclasses.dataclass(frozen=True)
class SplineBasisSpec:
    """Knot layout: interior knots strictly inside the boundary knots.

    All knots live on the log-time axis.
    """

    interior_knots: tuple[float, ...]
    boundary_knots: tuple[float, float]

    def __post_init__(self):
        if len(self.boundary_knots) != 2:
            raise ConfigurationError("exactly two boundary knots are required")
        lo, hi = self.boundary_knots
        knots = (lo, *self.interior_knots, hi)
        if not self.interior_knots:
            raise ConfigurationError("at least one interior knot is required")
        if any(a >= b for a, b in zip(knots, knots[1:])):
            raise ConfigurationError(
                f"knots must be strictly increasing with interior knots inside "
                f"the boundaries, got interior={self.interior_knots}, "
                f"boundary={self.boundary_knots}"
            )

    @property
    def n_terms(self) -> int:
        """Basis width: intercept + linear + one curvature term per interior knot."""
        return 2 + len(self.interior_knots)

    def to_dict(self) -> dict:
        return {
            "interior_knots": list(self.interior_knots),
            "boundary_knots": list(self.boundary_knots),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplineBasisSpec":
        return cls(
            interior_knots=tuple(float(k) for k in d["interior_knots"]),
            boundary_knots=tuple(float(k) for k in d["boundary_knots"]),
        )


def _cube_plus(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, x, 0.0) ** 3


def natural_cubic_terms(x, spec: SplineBasisSpec) -> np.ndarray:
    """Curvature columns v_j(x), one per interior knot.

    v_j(x) = (x - k_j)_+^3 - lam_j (x - k_min)_+^3 - (1 - lam_j)(x - k_max)_+^3
    with lam_j = (k_max - k_j) / (k_max - k_min). Each v_j is C^2 everywhere,
    vanishes below k_min and is linear above k_max.
    """
    x = np.asarray(x, dtype=float)
    k_min, k_max = spec.boundary_knots
    span = k_max - k_min
    cols = []
    for k_j in spec.interior_knots:
        lam = (k_max - k_j) / span
        cols.append(
            _cube_plus(x - k_j) - lam * _cube_plus(x - k_min) - (1.0 - lam) * _cube_plus(x - k_max)
        )
    return np.stack(cols, axis=-1)


def spline_basis(t, spec: SplineBasisSpec) -> np.ndarray:
    """Full basis at time ``t`` (scalar or array): (1, x, v_1(x), ...), x = log t."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise DataError("spline basis requires strictly positive times")
    x = np.log(t_arr)
    ones = np.ones_like(x)
    basis = np.concatenate(
        [ones[..., None], x[..., None], natural_cubic_terms(x, spec)], axis=-1
    )
    return basis
