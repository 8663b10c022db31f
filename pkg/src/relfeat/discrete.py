"""Exact machinery on finite joint probability tables.

Everything here is brute-force and oracle-grade: Fisher inner products and
the chi-square divergence they induce, the conditional-probability channels
of a joint table and their transposes, the full singular value decomposition
of the channel via whitening, and its best low-rank truncations.  Learned
quantities elsewhere in the package are verified against this module.

Elements of the linear spans of probability vectors (mu, nu, delta_x, ...)
are plain 1-D float arrays; they need not be normalized or nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceTriple

__all__ = [
    "JointDistribution",
    "CanonicalDecomposition",
    "fisher_inner",
    "chi2",
    "apply_channel",
    "channel_svd",
    "truncated_joint",
    "frobenius_distance",
    "exact_covariances",
    "conditional_expectation",
    "load_joint_csv",
    "save_joint_csv",
]

X_TO_Y = "x_to_y"
Y_TO_X = "y_to_x"

_SUM_TOL = 1e-12
_SIGN_TOL = 1e-9


@dataclass(frozen=True)
class JointDistribution:
    """Exact finite joint table p(x, y) with cached marginals.

    Rows index x states, columns y states.  Construction requires a proper
    distribution (nonnegative, unit total) with strictly positive marginals;
    zero-marginal joints are rejected rather than padded so that the oracle
    stays exact.
    """

    table: np.ndarray
    p_x: np.ndarray
    p_y: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError("joint table must be 2-D")
        if np.any(t < 0):
            raise ValueError("joint table entries must be nonnegative")
        if abs(t.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"joint table must sum to 1 (got {t.sum()!r})")
        p_x = np.asarray(self.p_x, dtype=np.float64)
        p_y = np.asarray(self.p_y, dtype=np.float64)
        if not (np.allclose(p_x, t.sum(axis=1), atol=_SUM_TOL)
                and np.allclose(p_y, t.sum(axis=0), atol=_SUM_TOL)):
            raise ValueError("marginals are inconsistent with the table")
        if p_x.min() <= 0 or p_y.min() <= 0:
            raise ValueError("marginals must be strictly positive (full support)")
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "p_x", p_x)
        object.__setattr__(self, "p_y", p_y)

    @classmethod
    def from_table(cls, table) -> "JointDistribution":
        t = np.asarray(table, dtype=np.float64)
        return cls(table=t, p_x=t.sum(axis=1), p_y=t.sum(axis=0))

    @property
    def n_x(self) -> int:
        return self.table.shape[0]

    @property
    def n_y(self) -> int:
        return self.table.shape[1]

    def whitened(self) -> np.ndarray:
        """S(y, x) = p(x, y) / sqrt(p_x(x) p_y(y)); its SVD is the channel SVD."""
        return (self.table / np.sqrt(np.outer(self.p_x, self.p_y))).T

    @property
    def rank(self) -> int:
        """Rank of the whitened table: number of nonzero singular values."""
        return int(np.linalg.matrix_rank(self.whitened()))


@dataclass(frozen=True)
class CanonicalDecomposition:
    """Full channel SVD: singular values with paired canonical variables.

    Column i of left_vars holds a_i evaluated on the x states, column i of
    right_vars holds b_i on the y states; eta_0 = 1 pairs the constant
    variables a_0 = b_0 = 1.
    """

    etas: np.ndarray
    left_vars: np.ndarray
    right_vars: np.ndarray
    p_x: np.ndarray
    p_y: np.ndarray

    def __post_init__(self):
        r = len(self.etas)
        if self.left_vars.shape[1] != r or self.right_vars.shape[1] != r:
            raise ValueError("variable matrices must have one column per singular value")

    @property
    def r(self) -> int:
        return len(self.etas)


def _check_normalized_positive(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector")
    if p.min(initial=np.inf) <= 0:
        raise ValueError(f"{name} must be strictly positive")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must be normalized (got sum {p.sum()!r})")
    return p


def fisher_inner(mu, mu2, p) -> float:
    """Fisher inner product sum_x mu(x) mu2(x) / p(x) at base point p."""
    p = _check_normalized_positive(p, "p")
    mu = np.asarray(mu, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    if mu.shape != p.shape or mu2.shape != p.shape:
        raise ValueError("dimension mismatch between vectors and base point")
    return float(np.sum(mu * mu2 / p))


def chi2(q, p) -> float:
    """Chi-square divergence of q from p: the squared Fisher norm of q - p."""
    q = _check_normalized_positive(np.asarray(q, dtype=np.float64), "q")
    diff = q - np.asarray(p, dtype=np.float64)
    return fisher_inner(diff, diff, p)


def apply_channel(j: JointDistribution, mu, direction: str = X_TO_Y) -> np.ndarray:
    """Push a vector through the conditional-probability channel of the joint.

    x_to_y computes nu(y) = sum_x p(y|x) mu(x); y_to_x applies the transpose
    map with kernel p(x|y).  The channel maps p_x to p_y exactly (and back).
    """
    mu = np.asarray(mu, dtype=np.float64)
    if direction == X_TO_Y:
        if mu.shape != (j.n_x,):
            raise ValueError(f"expected a length-{j.n_x} vector over x states")
        return j.table.T @ (mu / j.p_x)
    if direction == Y_TO_X:
        if mu.shape != (j.n_y,):
            raise ValueError(f"expected a length-{j.n_y} vector over y states")
        return j.table @ (mu / j.p_y)
    raise ValueError(f"unknown direction {direction!r}")


def channel_svd(j: JointDistribution) -> CanonicalDecomposition:
    """Full SVD of the channel in the Fisher geometry.

    Whitens the table, deflates the known constant pair (eta = 1, a = b = 1)
    exactly, and runs a dense SVD on the remainder; singular vectors are
    rescaled by 1/sqrt(marginal) to give the canonical variables.  Deflation
    pins the constant pair even when further singular values equal 1.
    """
    sqrt_px = np.sqrt(j.p_x)
    sqrt_py = np.sqrt(j.p_y)
    s = j.whitened()
    deflated = s - np.outer(sqrt_py, sqrt_px)
    u, sigma, vt = np.linalg.svd(deflated)
    r = min(j.n_x, j.n_y)

    etas = np.concatenate([[1.0], sigma[: r - 1]])
    left = np.empty((j.n_x, r))
    right = np.empty((j.n_y, r))
    left[:, 0] = 1.0
    right[:, 0] = 1.0
    left[:, 1:] = vt[: r - 1].T / sqrt_px[:, None]
    right[:, 1:] = u[:, : r - 1] / sqrt_py[:, None]

    # sign convention: first component of a_i with |value| > tol is positive
    for i in range(1, r):
        big = np.flatnonzero(np.abs(left[:, i]) > _SIGN_TOL)
        if big.size and left[big[0], i] < 0:
            left[:, i] = -left[:, i]
            right[:, i] = -right[:, i]

    return CanonicalDecomposition(etas=etas, left_vars=left, right_vars=right,
                                  p_x=j.p_x, p_y=j.p_y)


def truncated_joint(d: CanonicalDecomposition, k0: int) -> np.ndarray:
    """Best rank-k0 approximation q(x,y) = p_x p_y sum_{i<k0} eta_i a_i b_i.

    Keeps the marginals of the original joint but may go negative; at full
    rank it reproduces the table.
    """
    if not 1 <= k0 <= d.r:
        raise ValueError(f"k0 must be in [1, {d.r}], got {k0}")
    core = (d.left_vars[:, :k0] * d.etas[:k0]) @ d.right_vars[:, :k0].T
    return np.outer(d.p_x, d.p_y) * core


def frobenius_distance(j: JointDistribution, q) -> float:
    """Squared channel distance sum_{x,y} (q - p)^2 / (p_x p_y)."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != j.table.shape:
        raise ValueError(f"shape mismatch: {q.shape} vs {j.table.shape}")
    return float(np.sum((q - j.table) ** 2 / np.outer(j.p_x, j.p_y)))


def exact_covariances(j: JointDistribution, f_values, g_values) -> CovarianceTriple:
    """Population K, L, A for feature values tabulated on the joint's states.

    f_values is (n_x, k) with f_values[x, i] = f_i(x); g_values likewise on y.
    n_samples is 0 to mark exact covariances.
    """
    f = np.asarray(f_values, dtype=np.float64)
    g = np.asarray(g_values, dtype=np.float64)
    if f.shape[0] != j.n_x or g.shape[0] != j.n_y:
        raise ValueError("feature tables must have one row per state")
    K = f.T @ (j.p_x[:, None] * f)
    L = g.T @ (j.p_y[:, None] * g)
    A = g.T @ j.table.T @ f
    return CovarianceTriple(K=K, L=L, A=A, n_samples=0)


def conditional_expectation(j: JointDistribution, targets, direction: str = X_TO_Y) -> np.ndarray:
    """Exact conditional expectations of tabulated target functions.

    With direction x_to_y the targets are tabulated on x states ((n_x, m))
    and the result is E[theta | y], one row per y state; y_to_x is the
    mirror image.
    """
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    if direction == X_TO_Y:
        if t.shape[0] != j.n_x:
            raise ValueError("targets must have one row per x state")
        return (j.table.T @ t) / j.p_y[:, None]
    if direction == Y_TO_X:
        if t.shape[0] != j.n_y:
            raise ValueError("targets must have one row per y state")
        return (j.table @ t) / j.p_x[:, None]
    raise ValueError(f"unknown direction {direction!r}")


def save_joint_csv(j: JointDistribution, path) -> None:
    """Write the table as CSV: header y0,y1,..., one row per x state."""
    header = ",".join(f"y{i}" for i in range(j.n_y))
    np.savetxt(path, j.table, delimiter=",", header=header, comments="", fmt="%.17g")


def load_joint_csv(path) -> JointDistribution:
    """Read a joint table written by save_joint_csv and validate it."""
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if not all(c.strip().startswith("y") for c in cols):
            raise ValueError(f"bad joint CSV header: {header!r}")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    if body.shape[1] != len(cols):
        raise ValueError("joint CSV rows do not match the header width")
    return JointDistribution.from_table(body)
