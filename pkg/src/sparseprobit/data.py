"""Data model, validation and shared precomputation.

Both inference engines consume the same immutable ``Dataset`` plus a
``GramCache`` holding X'X, so the O(n p^2) product is paid once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class Dataset:
    """Design matrix X (n x p) and binary response y (length n)."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"X must be a non-empty 2-d matrix, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValidationError(
                f"y must be a vector of length {X.shape[0]}, got shape {y.shape}"
            )
        bad = np.flatnonzero(~np.isfinite(X).all(axis=1))
        if bad.size:
            raise ValidationError(f"non-finite entries in X rows {bad.tolist()}", bad)
        bad = np.flatnonzero(~np.isin(y, (0, 1)))
        if bad.size:
            raise ValidationError(f"y entries outside {{0,1}} at rows {bad.tolist()}", bad)
        y = y.astype(np.int8)
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != X.shape[1]:
                raise ValidationError(
                    f"feature_names has length {len(names)}, expected {X.shape[1]}"
                )
            if len(set(names)) != len(names):
                raise ValidationError("feature_names must be unique")
            object.__setattr__(self, "feature_names", names)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def k(self) -> np.ndarray:
        """Sign indicators 2y - 1 in {-1, +1}."""
        return 2.0 * self.y - 1.0

    def names(self) -> tuple[str, ...]:
        if self.feature_names is not None:
            return self.feature_names
        return tuple(f"x{j}" for j in range(self.p))


@dataclass(frozen=True)
class Hyperparameters:
    """Slab variance nu2, prior inclusion probability rho, base variance nu0_2."""

    nu2: float
    rho: float
    nu0_2: float = 25.0

    def __post_init__(self):
        if not (np.isfinite(self.nu2) and self.nu2 > 0):
            raise DomainError(f"nu2 must be positive, got {self.nu2}")
        if not (0.0 < self.rho < 1.0):
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")
        if not (np.isfinite(self.nu0_2) and self.nu0_2 > 0):
            raise DomainError(f"nu0_2 must be positive, got {self.nu0_2}")


@dataclass(frozen=True)
class GramCache:
    """G = X'X with its diagonal, plus a zero-column warning flag."""

    G: np.ndarray
    col_sq_norms: np.ndarray
    zero_columns: tuple[int, ...] = ()

    @property
    def has_zero_columns(self) -> bool:
        return len(self.zero_columns) > 0


@dataclass(frozen=True)
class TruthParams:
    """Simulation ground truth: inclusion indicators and coefficients."""

    gamma0: np.ndarray
    beta0: np.ndarray

    def __post_init__(self):
        gamma0 = np.asarray(self.gamma0, dtype=np.int8)
        beta0 = np.asarray(self.beta0, dtype=float)
        if gamma0.shape != beta0.shape or gamma0.ndim != 1:
            raise ValidationError("gamma0 and beta0 must be vectors of equal length")
        if not np.all(np.isin(gamma0, (0, 1))):
            raise ValidationError("gamma0 entries must be binary")
        object.__setattr__(self, "gamma0", gamma0)
        object.__setattr__(self, "beta0", beta0)

    @property
    def effective(self) -> np.ndarray:
        """Masked coefficients gamma0 * beta0 entering the linear predictor."""
        return self.gamma0 * self.beta0

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.gamma0 == 1)


def validate_and_cache(dataset: Dataset) -> GramCache:
    """Precompute G = X'X, flagging (not rejecting) all-zero columns.

    A zero column is legal: its inclusion logit collapses to logit(rho)
    and the posterior stays proper through the nu^-2 I ridge.
    """
    X = dataset.X
    G = X.T @ X
    G = 0.5 * (G + G.T)
    diag = np.diag(G).copy()
    zero_cols = tuple(np.flatnonzero(~np.any(X != 0.0, axis=0)).tolist())
    diag.setflags(write=False)
    G.setflags(write=False)
    return GramCache(G=G, col_sq_norms=diag, zero_columns=zero_cols)


def derive_nu2(rho: float, p: int, nu0_2: float = 25.0) -> float:
    """Slab variance keeping the prior linear-predictor variance near nu0_2.

    nu2 = nu0_2 / (rho * p), assuming unit-variance predictors.
    """
    if not (0.0 < rho < 1.0):
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    if p < 1 or nu0_2 <= 0:
        raise DomainError("p and nu0_2 must be positive")
    return nu0_2 / (rho * p)
