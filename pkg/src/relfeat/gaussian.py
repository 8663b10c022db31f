"""Closed forms for the additive-noise Gaussian pair with monomial features.

The pair is x ~ N(0, tau^2), y = x + noise with noise ~ N(0, sigma^2).
With features (1, x, ..., x^{k0-1}) every covariance block, the relevance
spectrum, and the posterior moments have exact expressions, so this model
doubles as an end-to-end oracle for the whole pipeline: sampled features
and trained networks must reproduce these numbers within sampling error.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .covariance import CovarianceTriple

__all__ = [
    "GaussianPair",
    "monomial_features",
    "exact_KLA",
    "exact_relevances",
    "exact_singular_values",
    "exact_loss",
    "exact_posterior_moments",
]


@dataclass(frozen=True)
class GaussianPair:
    """Signal scale tau and additive noise scale sigma, both positive."""

    tau: float
    sigma: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def gamma(self) -> float:
        """Signal fraction tau^2 / (tau^2 + sigma^2); the spectrum's ratio."""
        t2 = self.tau ** 2
        return t2 / (t2 + self.sigma ** 2)


def monomial_features(values, k0: int) -> np.ndarray:
    """Feature matrix with columns 1, v, v^2, ..., v^(k0-1)."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    return v[:, None] ** np.arange(k0)


@lru_cache(maxsize=None)
def _cross_moment(m: int, n: int, var_x: float, var_y: float, cov: float) -> float:
    """E[x^m y^n] for centered jointly Gaussian (x, y), by Stein's recursion."""
    if m < 0 or n < 0:
        return 0.0
    if m == 0 and n == 0:
        return 1.0
    if m == 0:
        # reduce in y alone
        return (n - 1) * var_y * _cross_moment(0, n - 2, var_x, var_y, cov) if n >= 2 else 0.0
    return ((m - 1) * var_x * _cross_moment(m - 2, n, var_x, var_y, cov)
            + n * cov * _cross_moment(m - 1, n - 1, var_x, var_y, cov))


def exact_KLA(gp: GaussianPair, k0: int) -> CovarianceTriple:
    """Population covariance blocks for monomial features of degree < k0.

    K_ij = E[x^i x^j], L_ij = E[y^i y^j], A_ij = E[y^i x^j]; n_samples = 0
    marks the triple as exact.
    """
    if k0 < 1:
        raise ValueError("k0 must be at least 1")
    var_x = gp.tau ** 2
    var_y = gp.tau ** 2 + gp.sigma ** 2
    cov = gp.tau ** 2
    K = np.empty((k0, k0))
    L = np.empty((k0, k0))
    A = np.empty((k0, k0))
    for i in range(k0):
        for j in range(k0):
            K[i, j] = _cross_moment(i + j, 0, var_x, var_y, cov)
            L[i, j] = _cross_moment(0, i + j, var_x, var_y, cov)
            A[i, j] = _cross_moment(j, i, var_x, var_y, cov)
    return CovarianceTriple(K=K, L=L, A=A, n_samples=0)


def exact_relevances(gp: GaussianPair, k0: int) -> np.ndarray:
    """Eigenvalues of K^-1 A^T L^-1 A: gamma^i for i < k0, led by 1."""
    return gp.gamma ** np.arange(k0, dtype=np.float64)


def exact_singular_values(gp: GaussianPair, k0: int) -> np.ndarray:
    """Channel singular values gamma^(i/2); the pair's correlation is sqrt(gamma)."""
    return np.sqrt(exact_relevances(gp, k0))


def exact_loss(gp: GaussianPair, k0: int) -> float:
    """Minimum trace loss k0 - sum_i gamma^i attainable with k0 features."""
    return float(k0 - exact_relevances(gp, k0).sum())


def exact_posterior_moments(gp: GaussianPair, y: float):
    """(E[x | y], E[x^2 | y]): gamma*y and its square plus (1-gamma)*tau^2."""
    g = gp.gamma
    mean = g * y
    return mean, mean ** 2 + (1.0 - g) * gp.tau ** 2
