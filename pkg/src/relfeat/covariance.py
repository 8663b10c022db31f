"""Sample covariance machinery for the correlation-trace objective.

K, L and A are uncentered second moments of two feature batches F and G
(rows are samples): K = F'F/N, L = G'G/N, A = G'F/N.  The relevance of the
two feature spans is Tr(K^+ A' L^+ A), the sum of squared canonical
correlations; the training loss is k0 minus that trace.  All arithmetic here
is done in float64 regardless of the caller's dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Stabilizer",
    "CovarianceTriple",
    "covariances",
    "stable_inverse",
    "half_inverse",
    "relevance",
    "loss",
    "projector_overlap",
]


@dataclass(frozen=True)
class Stabilizer:
    """Inversion policy for the possibly ill-conditioned K and L matrices.

    kind "pseudo" zeroes eigenvalues below tol * |lambda|_max in the inverse
    (Moore-Penrose with a relative cutoff); kind "ridge" inverts M + eps * I.
    """

    kind: str = "pseudo"
    tol: float = 1e-10
    eps: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("pseudo", "ridge"):
            raise ValueError(f"unknown stabilizer kind: {self.kind!r}")
        if self.kind == "pseudo" and self.tol < 0:
            raise ValueError("pseudo-inverse tolerance must be >= 0")
        if self.kind == "ridge" and self.eps <= 0:
            raise ValueError("ridge epsilon must be > 0")

    @classmethod
    def pseudo(cls, tol: float = 1e-10) -> "Stabilizer":
        return cls(kind="pseudo", tol=tol)

    @classmethod
    def ridge(cls, eps: float = 1e-6) -> "Stabilizer":
        return cls(kind="ridge", eps=eps)

    def to_dict(self) -> dict:
        if self.kind == "pseudo":
            return {"kind": "pseudo", "tol": self.tol}
        return {"kind": "ridge", "eps": self.eps}

    @classmethod
    def from_dict(cls, d: dict) -> "Stabilizer":
        if d["kind"] == "pseudo":
            return cls.pseudo(tol=d["tol"])
        return cls.ridge(eps=d["eps"])


@dataclass(frozen=True)
class CovarianceTriple:
    """K, L, A over one batch; rows of A index the g features, columns the f.

    n_samples of 0 marks exact (population) covariances computed from a known
    distribution rather than from samples.
    """

    K: np.ndarray
    L: np.ndarray
    A: np.ndarray
    n_samples: int

    @property
    def k(self) -> int:
        return self.K.shape[0]


def _as_batch(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a 2-D (samples x features) array with >= 1 row")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def covariances(F, G) -> CovarianceTriple:
    """Batch-mean second moments K = F'F/N, L = G'G/N, A = G'F/N."""
    F = _as_batch(F, "F")
    G = _as_batch(G, "G")
    if F.shape[0] != G.shape[0]:
        raise ValueError(f"sample-count mismatch: {F.shape[0]} vs {G.shape[0]}")
    n = F.shape[0]
    return CovarianceTriple(K=F.T @ F / n, L=G.T @ G / n, A=G.T @ F / n, n_samples=n)


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(m, m.T, atol=1e-10 * max(1.0, float(np.abs(m).max(initial=0.0)))):
        raise ValueError("matrix must be symmetric")
    return m


def stable_inverse(m, stab: Stabilizer = Stabilizer.pseudo()) -> np.ndarray:
    """Stabilized inverse of a symmetric matrix.

    In pseudo mode, eigenvalues whose magnitude falls below tol * |lambda|_max
    contribute zero to the inverse; in ridge mode the result is (m + eps*I)^-1.
    """
    m = _check_symmetric(m)
    if stab.kind == "ridge":
        return np.linalg.inv(m + stab.eps * np.eye(m.shape[0]))
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    cutoff = stab.tol * np.abs(w).max(initial=0.0)
    inv_w = np.where(np.abs(w) > cutoff, 1.0 / np.where(w == 0.0, 1.0, w), 0.0)
    return (v * inv_w) @ v.T


def half_inverse(m, stab: Stabilizer = Stabilizer.pseudo()) -> np.ndarray:
    """Symmetric M^(-1/2) of a PSD matrix, under the same stabilization rules."""
    m = _check_symmetric(m)
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    if stab.kind == "ridge":
        shifted = w + stab.eps
        if np.any(shifted <= 0):
            raise np.linalg.LinAlgError("ridge-shifted matrix is not positive definite")
        inv_sqrt = 1.0 / np.sqrt(shifted)
    else:
        cutoff = stab.tol * np.abs(w).max(initial=0.0)
        inv_sqrt = np.where(w > cutoff, 1.0 / np.sqrt(np.where(w <= 0.0, 1.0, w)), 0.0)
    return (v * inv_sqrt) @ v.T


def relevance(t: CovarianceTriple, stab: Stabilizer = Stabilizer.pseudo()) -> float:
    """Tr(K^+ A' L^+ A): the sum of squared canonical correlations."""
    k_inv = stable_inverse(t.K, stab)
    l_inv = stable_inverse(t.L, stab)
    return float(np.trace(k_inv @ t.A.T @ l_inv @ t.A))


def loss(t: CovarianceTriple, k0: int, stab: Stabilizer = Stabilizer.pseudo()) -> float:
    """Training objective k0 - relevance; zero at a perfectly correlated optimum."""
    if k0 != t.k:
        raise ValueError(f"k0 = {k0} does not match the feature count {t.k}")
    return k0 - relevance(t, stab)


def projector_overlap(F, G) -> float:
    """Tr(P Q) for the orthogonal projectors onto the column ranges of F and G.

    Forms the N x N projectors explicitly, so this is an independent route to
    the relevance of the same batches (they agree when K and L are full rank).
    """
    F = _as_batch(F, "F")
    G = _as_batch(G, "G")
    if F.shape[0] != G.shape[0]:
        raise ValueError(f"sample-count mismatch: {F.shape[0]} vs {G.shape[0]}")
    P = F @ np.linalg.pinv(F.T @ F) @ F.T
    Q = G @ np.linalg.pinv(G.T @ G) @ G.T
    return float(np.sum(P * Q))
