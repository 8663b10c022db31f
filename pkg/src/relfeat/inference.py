"""Conditional-expectation inference on top of fitted feature pairs.

Given features f(x), g(y) trained on the trace objective, the conditional
expectation of a target function of x is approximated by theta W g(y):
theta holds the full-training-set cross-moments E[theta(x) f_j(x)] and W is
the whitening sandwich K^+ A^T L^+.  Swapping the roles of x and y (K with
L, A with its transpose, f with g) gives the reverse direction.
Classification reads off the argmax of inferred one-hot label coordinates.

Targets are registered by name before fitting; adding targets later means
refitting (single pass over the training data, reproducible by seed).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceTriple, Stabilizer, covariances, stable_inverse

__all__ = [
    "X_FROM_Y",
    "Y_FROM_X",
    "Posterior",
    "InferenceModel",
    "coordinate_targets",
    "evaluate_targets",
    "fit_statistics",
    "infer",
    "infer_batch",
    "classify",
    "classify_batch",
    "posterior_direction_of_max_variance",
]

X_FROM_Y = "x_from_y"
Y_FROM_X = "y_from_x"


def coordinate_targets(dim: int, prefix: str = "x", second_moments: bool = False):
    """Named target functions for coordinates and, optionally, their products.

    Returns a list of (name, fn) pairs where fn maps an (n, dim) batch to n
    values.  Names are "x0", "x1", ... and with second_moments also "x0*x0",
    "x0*x1", ... over the upper triangle, which is what the posterior
    moment utilities look up.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")

    def coord(i):
        return lambda v: np.asarray(v, dtype=np.float64)[:, i]

    def prod(i, j):
        return lambda v: (lambda a: a[:, i] * a[:, j])(np.asarray(v, dtype=np.float64))

    targets = [(f"{prefix}{i}", coord(i)) for i in range(dim)]
    if second_moments:
        for i in range(dim):
            for j in range(i, dim):
                targets.append((f"{prefix}{i}*{prefix}{j}", prod(i, j)))
    return targets


def evaluate_targets(targets, values) -> np.ndarray:
    """Stack named target functions into an (n, m) matrix of values."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    cols = []
    for name, fn in targets:
        col = np.asarray(fn(v), dtype=np.float64).reshape(-1)
        if col.shape[0] != v.shape[0]:
            raise ValueError(f"target {name!r} returned {col.shape[0]} values "
                             f"for {v.shape[0]} samples")
        cols.append(col)
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class Posterior:
    """Inferred conditional expectations of named target functions.

    stds is populated only when matching second-moment targets ("n*n") were
    registered; a negative variance estimate is clamped to zero and flagged.
    """

    names: tuple
    expectations: np.ndarray
    stds: np.ndarray = None
    clamped: bool = False

    def value(self, name: str) -> float:
        try:
            i = self.names.index(name)
        except ValueError:
            raise KeyError(f"no target named {name!r}; have {list(self.names)}") from None
        return float(self.expectations[i])

    def std(self, name: str) -> float:
        if self.stds is None:
            raise KeyError("no second-moment targets were registered")
        return float(self.stds[self.names.index(name)])


def _attach_stds(names, expectations):
    """Derive per-name stds from registered second moments, clamping at 0."""
    have_products = any("*" in n for n in names)
    if not have_products:
        return None, False
    stds = np.full(len(names), np.nan)
    clamped = False
    for i, name in enumerate(names):
        if "*" in name:
            continue
        square = f"{name}*{name}"
        if square in names:
            var = expectations[names.index(square)] - expectations[i] ** 2
            if var < 0:
                var, clamped = 0.0, True
            stds[i] = np.sqrt(var)
    return stds, clamped


def _inference_weights(triple: CovarianceTriple, direction: str,
                       stab: Stabilizer) -> np.ndarray:
    """W mapping observed features to target-side loadings.

    The product is evaluated in both association orders; they agree exactly
    in exact arithmetic, so a mismatch flags covariances too ill-conditioned
    to trust.
    """
    k_inv = stable_inverse(triple.K, stab)
    l_inv = stable_inverse(triple.L, stab)
    if direction == X_FROM_Y:
        w = (k_inv @ triple.A.T) @ l_inv
        w_alt = k_inv @ (triple.A.T @ l_inv)
    elif direction == Y_FROM_X:
        w = (l_inv @ triple.A) @ k_inv
        w_alt = l_inv @ (triple.A @ k_inv)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if not np.allclose(w, w_alt, rtol=1e-6, atol=1e-9):
        warnings.warn("inference weights differ between association orders; "
                      "covariances are ill-conditioned", stacklevel=3)
    return w


@dataclass
class InferenceModel:
    """Frozen statistics needed to infer targets from one observed side.

    triple holds K, L, A over the full training set; theta is (m, k), the
    cross-moments of the m named targets with the target-side features.
    observe maps raw observations on the conditioning side to feature rows;
    infer_matrix is the precomputed weight product W.
    """

    triple: CovarianceTriple
    theta: np.ndarray
    direction: str
    target_names: tuple
    observe: object
    stabilizer: Stabilizer
    infer_matrix: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.direction not in (X_FROM_Y, Y_FROM_X):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not np.isfinite(self.theta).all():
            raise ValueError("theta contains non-finite entries")
        if self.theta.shape[0] != len(self.target_names):
            raise ValueError("one theta row per target name required")
        if self.infer_matrix is None:
            self.infer_matrix = _inference_weights(self.triple, self.direction,
                                                   self.stabilizer)

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "target_names": list(self.target_names),
            "theta": self.theta.tolist(),
            "triple": {
                "K": self.triple.K.tolist(),
                "L": self.triple.L.tolist(),
                "A": self.triple.A.tolist(),
                "n_samples": self.triple.n_samples,
            },
            "stabilizer": self.stabilizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, model) -> "InferenceModel":
        direction = d["direction"]
        observe = model.net_g.forward if direction == X_FROM_Y else model.net_f.forward
        t = d["triple"]
        triple = CovarianceTriple(
            K=np.asarray(t["K"], dtype=np.float64),
            L=np.asarray(t["L"], dtype=np.float64),
            A=np.asarray(t["A"], dtype=np.float64),
            n_samples=int(t["n_samples"]),
        )
        return cls(
            triple=triple,
            theta=np.asarray(d["theta"], dtype=np.float64),
            direction=direction,
            target_names=tuple(d["target_names"]),
            observe=observe,
            stabilizer=Stabilizer.from_dict(d["stabilizer"]),
        )


def fit_statistics(model, pairs, targets, direction: str = X_FROM_Y,
                   stabilizer: Stabilizer = None) -> InferenceModel:
    """Estimate theta and the covariance triple over the full training set.

    targets is a list of (name, fn) pairs; each fn is evaluated on the side
    being inferred (the x batch for x_from_y).  theta row j is the batch
    mean of target_j times the target-side features.
    """
    x = np.asarray(pairs[0], dtype=np.float64)
    y = np.asarray(pairs[1], dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("pairs must be non-empty 2-D arrays with equal row counts")
    stab = stabilizer if stabilizer is not None else model.config.stabilizer
    F = model.net_f.forward(x)
    G = model.net_g.forward(y)
    triple = covariances(F, G)
    n = F.shape[0]

    if direction == X_FROM_Y:
        t_vals = evaluate_targets(targets, x)
        theta = t_vals.T @ F / n
        observe = model.net_g.forward
    elif direction == Y_FROM_X:
        t_vals = evaluate_targets(targets, y)
        theta = t_vals.T @ G / n
        observe = model.net_f.forward
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if not np.isfinite(t_vals).all():
        raise ValueError("targets evaluated to non-finite values")

    return InferenceModel(triple=triple, theta=theta, direction=direction,
                          target_names=tuple(name for name, _ in targets),
                          observe=observe, stabilizer=stab)


def infer_batch(m: InferenceModel, observations) -> np.ndarray:
    """Inferred target expectations, one row per observation."""
    obs = np.asarray(observations, dtype=np.float64)
    feats = m.observe(obs)
    if feats.shape[1] != m.infer_matrix.shape[1]:
        raise ValueError(f"observation features have width {feats.shape[1]}, "
                         f"expected {m.infer_matrix.shape[1]}")
    return feats @ m.infer_matrix.T @ m.theta.T


def infer(m: InferenceModel, observation) -> Posterior:
    """Posterior over the named targets for a single observation."""
    obs = np.asarray(observation, dtype=np.float64)
    if obs.ndim != 1:
        raise ValueError("observation must be a single 1-D vector")
    vals = infer_batch(m, obs[None, :])[0]
    stds, clamped = _attach_stds(m.target_names, vals)
    return Posterior(names=m.target_names, expectations=vals,
                     stds=stds, clamped=clamped)


def classify_batch(m: InferenceModel, observations) -> np.ndarray:
    """Label indices from inferred one-hot coordinates; ties pick the lowest."""
    return np.argmax(infer_batch(m, observations), axis=1)


def classify(m: InferenceModel, observation):
    """(label, score vector) for one observation, argmax over inferred scores."""
    obs = np.asarray(observation, dtype=np.float64)
    if obs.ndim != 1:
        raise ValueError("observation must be a single 1-D vector")
    scores = infer_batch(m, obs[None, :])[0]
    return int(np.argmax(scores)), scores


def _moment_lookup(post: Posterior, coords):
    missing = []
    dim = len(coords)
    mean = np.zeros(dim)
    second = np.zeros((dim, dim))
    for i, c in enumerate(coords):
        if c in post.names:
            mean[i] = post.value(c)
        else:
            missing.append(c)
    for i, ci in enumerate(coords):
        for j in range(i, dim):
            cj = coords[j]
            name = f"{ci}*{cj}" if f"{ci}*{cj}" in post.names else f"{cj}*{ci}"
            if name in post.names:
                second[i, j] = second[j, i] = post.value(name)
            else:
                missing.append(f"{ci}*{cj}")
    if missing:
        raise ValueError(f"posterior lacks moment targets: {missing}")
    return mean, second


def posterior_direction_of_max_variance(m: InferenceModel, observation,
                                        coords=None):
    """Mean vector and principal deviation of the inferred posterior.

    Builds the conditional covariance (second moments minus the outer
    product of the means), symmetrizes it, clamps negative eigenvalues to
    zero, and returns (mean, top eigenvector scaled by sqrt(top eigenvalue)).
    coords defaults to every registered non-product target, in order.
    """
    post = infer(m, observation)
    if coords is None:
        coords = [n for n in post.names if "*" not in n]
    mean, second = _moment_lookup(post, list(coords))
    cov = second - np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    top = max(float(w[-1]), 0.0)
    return mean, v[:, -1] * np.sqrt(top)
