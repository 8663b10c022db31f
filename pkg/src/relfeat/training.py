"""Minibatch training of feature-network pairs on the trace objective.

train() owns the full loop: seeding, network construction, shuffling,
batching, the optimizer step, and per-epoch loss evaluation on the train
and test sets.  extract_canonical() whitens the fitted covariances of a
trained pair to recover singular values and canonical feature maps.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceTriple, Stabilizer, covariances, half_inverse, loss as triple_loss
from .network import FeatureNetwork, loss_and_feature_grads

__all__ = [
    "NonFiniteLossError",
    "TrainConfig",
    "TrainedModel",
    "CanonicalSpectrum",
    "train",
    "eval_loss",
    "extract_canonical",
    "save_model",
    "load_model",
    "load_document",
]

MODEL_FORMAT = "relfeat-model-v1"


class NonFiniteLossError(RuntimeError):
    """Raised when the training loss becomes NaN or infinite."""


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run besides the data itself."""

    k0: int
    batch_size: int
    epochs: int
    seed: int
    learning_rate: float = 1e-3
    hidden: tuple = (64, 64)
    optimizer: str = "adam"
    stabilizer: Stabilizer = field(default_factory=Stabilizer.pseudo)
    identity_g: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.k0 < 1:
            raise ValueError("k0 must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "learning_rate": self.learning_rate,
            "hidden": list(self.hidden),
            "optimizer": self.optimizer,
            "stabilizer": self.stabilizer.to_dict(),
            "identity_g": self.identity_g,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (64, 64)))
        d["stabilizer"] = Stabilizer.from_dict(d["stabilizer"])
        return cls(**d)


class _Sgd:
    def __init__(self, params, lr: float):
        self.params = params
        self.lr = lr

    def step(self, grads):
        for p, g in zip(self.params, grads):
            p -= self.lr * g


class _Adam:
    def __init__(self, params, lr: float, beta1: float, beta2: float, eps: float):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(cfg: TrainConfig, params):
    if cfg.optimizer == "sgd":
        return _Sgd(params, cfg.learning_rate)
    return _Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)


@dataclass
class TrainedModel:
    """A fitted feature-network pair plus its config and loss history.

    history holds one (train_loss, test_loss) tuple per epoch; test_loss is
    None when no test set was supplied.
    """

    net_f: FeatureNetwork
    net_g: FeatureNetwork
    config: TrainConfig
    history: list = field(default_factory=list)


def _check_pairs(pairs, name: str):
    x, y = pairs
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"{name} must be a pair of 2-D arrays with equal row counts")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError(f"{name} contains non-finite values")
    return x, y


def eval_loss(model: TrainedModel, pairs) -> float:
    """Full-dataset trace loss of the model's current parameters."""
    x, y = _check_pairs(pairs, "pairs")
    F = model.net_f.forward(x)
    G = model.net_g.forward(y)
    t = covariances(F, G)
    return triple_loss(t, model.config.k0, model.config.stabilizer)


def train(pairs, test_pairs=None, cfg: TrainConfig = None) -> TrainedModel:
    """Fit an x-side and a y-side feature network on paired samples.

    pairs and test_pairs are (x, y) arrays of shape (n, d_x) and (n, d_y).
    Both networks output cfg.k0 features; with cfg.identity_g the y side is
    pinned to the raw y values (they must already be k0-dimensional).
    Training is bitwise deterministic for a fixed config and data.
    """
    if cfg is None:
        raise ValueError("cfg is required")
    x, y = _check_pairs(pairs, "pairs")
    if test_pairs is not None:
        test_pairs = _check_pairs(test_pairs, "test_pairs")
    if cfg.batch_size < 10 * cfg.k0:
        warnings.warn(
            f"batch_size {cfg.batch_size} is below 10*k0 = {10 * cfg.k0}; "
            "covariance estimates may be too noisy", stacklevel=2)

    rng = np.random.default_rng(cfg.seed)
    net_f = FeatureNetwork.create((x.shape[1], *cfg.hidden, cfg.k0), rng)
    if cfg.identity_g:
        if y.shape[1] != cfg.k0:
            raise ValueError(
                f"identity_g requires {cfg.k0}-dimensional y values, got {y.shape[1]}")
        net_g = FeatureNetwork.identity_map(cfg.k0)
    else:
        net_g = FeatureNetwork.create((y.shape[1], *cfg.hidden, cfg.k0), rng)

    params = net_f.parameters() + net_g.parameters()
    opt = _make_optimizer(cfg, params)
    model = TrainedModel(net_f=net_f, net_g=net_g, config=cfg)

    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            # a trailing fragment smaller than k0 cannot carry the objective
            if len(idx) < cfg.batch_size and len(idx) < cfg.k0:
                continue
            xb, yb = x[idx], y[idx]
            F = net_f.forward(xb)
            G = net_g.forward(yb)
            batch_loss, dF, dG, _ = loss_and_feature_grads(F, G, cfg.k0, cfg.stabilizer)
            if not np.isfinite(batch_loss):
                raise NonFiniteLossError(
                    f"loss became non-finite at epoch {epoch}, batch start {start}")
            gf = net_f.backprop(xb, dF)
            gg = net_g.backprop(yb, dG)
            flat = []
            for w, b in zip(gf.weights, gf.biases):
                flat.extend((w, b))
            for w, b in zip(gg.weights, gg.biases):
                flat.extend((w, b))
            opt.step(flat)

        train_loss = eval_loss(model, (x, y))
        if not np.isfinite(train_loss):
            raise NonFiniteLossError(f"epoch {epoch} train loss is non-finite")
        test_loss = eval_loss(model, test_pairs) if test_pairs is not None else None
        model.history.append((train_loss, test_loss))
    return model


@dataclass(frozen=True)
class CanonicalSpectrum:
    """Whitened decomposition of a trained pair's covariances.

    singular_values are the channel singular value estimates; columns of
    x_map (and y_map) are loadings that turn raw features into canonical
    ones: a(x) = f(x) @ x_map.  relevances are the squared singular values.
    """

    singular_values: np.ndarray
    x_map: np.ndarray
    y_map: np.ndarray

    @property
    def relevances(self) -> np.ndarray:
        return self.singular_values ** 2

    def canonical_x(self, F) -> np.ndarray:
        return np.asarray(F, dtype=np.float64) @ self.x_map

    def canonical_y(self, G) -> np.ndarray:
        return np.asarray(G, dtype=np.float64) @ self.y_map


def extract_canonical(model: TrainedModel, pairs, k_report: int = None) -> CanonicalSpectrum:
    """Estimate singular values and canonical maps from a fitted pair.

    Whitens A by K^(-1/2) and L^(-1/2), takes its SVD, and maps the
    singular vectors back to feature space.  k_report keeps the leading
    columns only (default: all k0).
    """
    x, y = _check_pairs(pairs, "pairs")
    k0 = model.config.k0
    if x.shape[0] < 10 * k0:
        raise ValueError(f"need at least {10 * k0} samples to whiten reliably")
    F = model.net_f.forward(x)
    G = model.net_g.forward(y)
    t = covariances(F, G)
    stab = model.config.stabilizer
    kh = half_inverse(t.K, stab)
    lh = half_inverse(t.L, stab)
    u, sigma, vt = np.linalg.svd(lh @ t.A @ kh)
    k = k0 if k_report is None else min(k_report, k0)
    x_map = kh @ vt[:k].T
    y_map = lh @ u[:, :k]
    for i in range(k):
        col = x_map[:, i]
        big = np.flatnonzero(np.abs(col) > 1e-9)
        if big.size and col[big[0]] < 0:
            x_map[:, i] = -x_map[:, i]
            y_map[:, i] = -y_map[:, i]
    return CanonicalSpectrum(singular_values=sigma[:k], x_map=x_map, y_map=y_map)


def _net_to_dict(net: FeatureNetwork) -> dict:
    if not net.weights:
        return {"identity_dim": net.n_out, "layers": []}
    layers = []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        layers.append({
            "shape": list(w.shape),
            "weights": w.ravel().tolist(),   # row-major
            "biases": b.tolist(),
            "activation": act,
        })
    return {"layers": layers}


def _net_from_dict(d: dict) -> FeatureNetwork:
    if not d.get("layers"):
        return FeatureNetwork.identity_map(int(d["identity_dim"]))
    weights, biases, acts = [], [], []
    for layer in d["layers"]:
        shape = tuple(layer["shape"])
        weights.append(np.asarray(layer["weights"], dtype=np.float64).reshape(shape))
        biases.append(np.asarray(layer["biases"], dtype=np.float64))
        acts.append(layer["activation"])
    return FeatureNetwork(weights=weights, biases=biases, activations=acts)


def save_model(path, model: TrainedModel, inference_doc: dict = None) -> None:
    """Serialize a trained model (and optional inference block) as JSON.

    The write is atomic: a temp file in the same directory is renamed over
    the target.
    """
    doc = {
        "format": MODEL_FORMAT,
        "config": model.config.to_dict(),
        "net_f": _net_to_dict(model.net_f),
        "net_g": _net_to_dict(model.net_g),
        "history": [[tr, te] for tr, te in model.history],
    }
    if inference_doc is not None:
        doc["inference"] = inference_doc
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_document(path) -> dict:
    """Read a model JSON document, checking its format tag."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document: {path}")
    return doc


def load_model(path) -> TrainedModel:
    doc = load_document(path)
    model = TrainedModel(
        net_f=_net_from_dict(doc["net_f"]),
        net_g=_net_from_dict(doc["net_g"]),
        config=TrainConfig.from_dict(doc["config"]),
        history=[tuple(h) for h in doc["history"]],
    )
    return model
