"""Exact conjugate GP regression: the dense baseline everything is measured against.

All solves route through :mod:`sparsegp.chol` with the default jitter
schedule; the jitter actually used is visible on the returned factors.  The
prior mean is identically zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import chol, kernels
from .errors import DimensionMismatchError, InvalidHyperparameterError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Dataset:
    """Training inputs X (N x D) and outputs y (N,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatchError("X and y must have the same number of rows")
        if X.shape[0] < 1:
            raise DimensionMismatchError("need at least one observation")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidHyperparameterError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class NoiseModel:
    """Homoskedastic observation noise variance."""

    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidHyperparameterError("noise variance must be positive")


def _noisy_gram_factor(
    data: Dataset, kernel: kernels.KernelSpec, noise: NoiseModel
) -> chol.LowerFactor:
    K = kernels.gram(kernel, data.X)
    K[np.diag_indices_from(K)] += noise.variance
    return chol.factor(K)


def log_marginal_likelihood(
    data: Dataset, kernel: kernels.KernelSpec, noise: NoiseModel
) -> float:
    """Log density of y under the zero-mean prior with noisy Gram K_ff + noise*I."""
    f = _noisy_gram_factor(data, kernel, noise)
    alpha = solve_triangular(f.L, data.y, lower=True, check_finite=False)
    quad = float(alpha @ alpha)
    return -0.5 * quad - 0.5 * chol.log_det(f) - 0.5 * data.n * LOG_2PI


def posterior(
    data: Dataset, kernel: kernels.KernelSpec, noise: NoiseModel, X_query
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean vector and full covariance matrix at the query points."""
    X_query = np.asarray(X_query, dtype=float)
    if X_query.ndim == 1:
        X_query = X_query[:, None]
    f = _noisy_gram_factor(data, kernel, noise)
    Ks = kernels.gram(kernel, data.X, X_query)
    V = solve_triangular(f.L, Ks, lower=True, check_finite=False)
    alpha = solve_triangular(f.L, data.y, lower=True, check_finite=False)
    mean = V.T @ alpha
    cov = kernels.gram(kernel, X_query) - V.T @ V
    return mean, 0.5 * (cov + cov.T)


def sample_prior_outputs(
    X, kernel: kernels.KernelSpec, noise: NoiseModel, seed: int
) -> np.ndarray:
    """Draw y ~ N(0, K_ff + noise*I); reproducible for a fixed seed."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    K = kernels.gram(kernel, X)
    K[np.diag_indices_from(K)] += noise.variance
    f = chol.factor(K)
    rng = np.random.default_rng(seed)
    return f.L @ rng.standard_normal(X.shape[0])
