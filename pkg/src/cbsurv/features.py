"""Typed feature maps over (covariates, time) for the linear hazard model.

Four term kinds: raw covariates, covariate products, covariate-time
products, and a natural cubic spline basis of log time. A map is a plain
list of term specs, JSON-serializable, evaluated into a design matrix.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .splines import SplineBasisSpec, spline_basis


@dataclasses.dataclass(frozen=True)
class IdentityTerm:
    index: int

    kind = "identity"

    def width(self) -> int:
        return 1

    def columns(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        return X[:, [self.index]]

    def names(self, covariate_names: Sequence[str]) -> list[str]:
        return [covariate_names[self.index]]

    def to_dict(self) -> dict:
        return {"type": "identity", "index": self.index}


@dataclasses.dataclass(frozen=True)
class ProductTerm:
    first: int
    second: int

    kind = "product"

    def width(self) -> int:
        return 1

    def columns(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        return (X[:, self.first] * X[:, self.second])[:, None]

    def names(self, covariate_names: Sequence[str]) -> list[str]:
        return [f"{covariate_names[self.first]}*{covariate_names[self.second]}"]

    def to_dict(self) -> dict:
        return {"type": "product", "indices": [self.first, self.second]}


@dataclasses.dataclass(frozen=True)
class TimeProductTerm:
    index: int

    kind = "time_product"

    def width(self) -> int:
        return 1

    def columns(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        return (X[:, self.index] * t)[:, None]

    def names(self, covariate_names: Sequence[str]) -> list[str]:
        return [f"{covariate_names[self.index]}*time"]

    def to_dict(self) -> dict:
        return {"type": "time_product", "index": self.index}


@dataclasses.dataclass(frozen=True)
class TimeSplineTerm:
    basis: SplineBasisSpec

    kind = "time_spline"

    def width(self) -> int:
        return self.basis.n_terms

    def columns(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        return spline_basis(t, self.basis)

    def names(self, covariate_names: Sequence[str]) -> list[str]:
        return [f"spline_time_{j}" for j in range(self.basis.n_terms)]

    def to_dict(self) -> dict:
        return {"type": "time_spline", **self.basis.to_dict()}


Term = IdentityTerm | ProductTerm | TimeProductTerm | TimeSplineTerm


@dataclasses.dataclass(frozen=True)
class FeatureMap:
    """Ordered list of terms; an empty map yields an intercept-only model."""

    terms: tuple[Term, ...] = ()

    @classmethod
    def identity(cls, n_covariates: int) -> "FeatureMap":
        """One raw column per covariate (no time dependence)."""
        return cls(tuple(IdentityTerm(j) for j in range(n_covariates)))

    def width(self) -> int:
        return sum(term.width() for term in self.terms)

    def validate(self, n_covariates: int) -> None:
        for term in self.terms:
            for idx in _covariate_indices(term):
                if not 0 <= idx < n_covariates:
                    raise ConfigurationError(
                        f"feature term {term.to_dict()} references covariate index "
                        f"{idx}, but only {n_covariates} covariates exist"
                    )

    def transform(self, X: np.ndarray, t) -> np.ndarray:
        """Design matrix for covariate rows ``X`` and times ``t`` (scalar or per-row)."""
        X = np.asarray(X, dtype=float)
        t_arr = np.broadcast_to(np.asarray(t, dtype=float), (X.shape[0],))
        if not self.terms:
            return np.empty((X.shape[0], 0))
        return np.hstack([term.columns(X, t_arr) for term in self.terms])

    def column_names(self, covariate_names: Sequence[str]) -> list[str]:
        names: list[str] = []
        for term in self.terms:
            names.extend(term.names(covariate_names))
        return names

    def to_spec(self) -> list[dict]:
        return [term.to_dict() for term in self.terms]

    @classmethod
    def from_spec(cls, spec: Sequence[dict]) -> "FeatureMap":
        terms: list[Term] = []
        for entry in spec:
            kind = entry.get("type")
            if kind == "identity":
                terms.append(IdentityTerm(int(entry["index"])))
            elif kind == "product":
                first, second = entry["indices"]
                terms.append(ProductTerm(int(first), int(second)))
            elif kind == "time_product":
                terms.append(TimeProductTerm(int(entry["index"])))
            elif kind == "time_spline":
                terms.append(TimeSplineTerm(SplineBasisSpec.from_dict(entry)))
            else:
                raise ConfigurationError(f"unknown feature term type '{kind}'")
        return cls(tuple(terms))


def _covariate_indices(term: Term) -> list[int]:
    if isinstance(term, IdentityTerm):
        return [term.index]
    if isinstance(term, ProductTerm):
        return [term.first, term.second]
    if isinstance(term, TimeProductTerm):
        return [term.index]
    return []
