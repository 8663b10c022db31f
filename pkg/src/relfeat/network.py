"""Small dense feature networks with hand-rolled backpropagation.

Networks map input vectors to k-dimensional feature vectors; the final
layer is tanh by default so features stay bounded.  Gradients of the trace
objective with respect to the feature batches are computed in closed form
by loss_and_feature_grads and pushed through the layers by backprop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceTriple, Stabilizer, stable_inverse

__all__ = ["FeatureNetwork", "Gradients", "loss_and_feature_grads"]

_ACTIVATIONS = ("tanh", "identity")


@dataclass
class Gradients:
    """Per-layer weight and bias gradients, ordered like the network layers."""

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)


@dataclass
class FeatureNetwork:
    """Feed-forward network: affine layers with tanh or identity activations.

    weights[i] has shape (fan_in, fan_out); forward computes
    h = act(h @ w + b) layer by layer.  A network with no layers is the
    identity map (used to pin one side's features to the raw inputs).
    """

    weights: list
    biases: list
    activations: list

    def __post_init__(self):
        if not len(self.weights) == len(self.biases) == len(self.activations):
            raise ValueError("layer lists must have equal length")
        for a in self.activations:
            if a not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")

    @classmethod
    def create(cls, dims, rng: np.random.Generator,
               last_activation: str = "tanh") -> "FeatureNetwork":
        """Build a network for the given layer widths, e.g. (2, 64, 64, 3).

        Weights are uniform on +-sqrt(6 / (fan_in + fan_out)), biases zero;
        hidden activations are tanh, the last is last_activation.
        """
        if len(dims) < 2:
            raise ValueError("need at least input and output widths")
        weights, biases, acts = [], [], []
        for i in range(len(dims) - 1):
            fan_in, fan_out = dims[i], dims[i + 1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
            acts.append("tanh" if i < len(dims) - 2 else last_activation)
        if acts:
            acts[-1] = last_activation
        return cls(weights=weights, biases=biases, activations=acts)

    @classmethod
    def identity_map(cls, dim: int) -> "FeatureNetwork":
        """A trainable-parameter-free network that returns its input."""
        net = cls(weights=[], biases=[], activations=[])
        net._dim = dim
        return net

    @property
    def n_out(self) -> int:
        if not self.weights:
            return getattr(self, "_dim", 0)
        return self.weights[-1].shape[1]

    @property
    def n_in(self) -> int:
        if not self.weights:
            return getattr(self, "_dim", 0)
        return self.weights[0].shape[0]

    def forward(self, batch) -> np.ndarray:
        h = np.asarray(batch, dtype=np.float64)
        if h.ndim == 1:
            h = h[None, :]
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = h @ w + b
            if act == "tanh":
                h = np.tanh(h)
        return h

    def backprop(self, batch, upstream) -> Gradients:
        """Gradients of sum(upstream * forward(batch)) w.r.t. parameters.

        Recomputes the forward pass, caching post-activations; the tanh
        derivative is recovered from them as 1 - h^2.
        """
        h = np.asarray(batch, dtype=np.float64)
        if h.ndim == 1:
            h = h[None, :]
        post = [h]
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = h @ w + b
            if act == "tanh":
                h = np.tanh(h)
            post.append(h)

        g = Gradients(weights=[None] * len(self.weights),
                      biases=[None] * len(self.weights))
        delta = np.asarray(upstream, dtype=np.float64)
        if delta.ndim == 1:
            delta = delta[None, :]
        for i in reversed(range(len(self.weights))):
            if self.activations[i] == "tanh":
                delta = delta * (1.0 - post[i + 1] ** 2)
            g.weights[i] = post[i].T @ delta
            g.biases[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
        return g

    def parameters(self) -> list:
        """Flat list of parameter arrays, weights and biases interleaved."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def loss_and_feature_grads(F, G, k0: int, stab: Stabilizer):
    """Trace loss on a feature batch and its gradients w.r.t. the features.

    F is (n, k0) of x-side features, G is (n, k0) of y-side features.
    Returns (loss, dF, dG, triple) where loss = k0 - Tr(K^-1 A^T L^-1 A)
    built from the batch covariances, and dF, dG are the exact derivatives
    of the loss with respect to the feature entries.
    """
    F = np.asarray(F, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    if F.shape != G.shape or F.ndim != 2:
        raise ValueError("feature batches must share shape (n, k0)")
    if F.shape[1] != k0:
        raise ValueError(f"expected {k0} feature columns, got {F.shape[1]}")
    n = F.shape[0]
    K = F.T @ F / n
    L = G.T @ G / n
    A = G.T @ F / n
    k_inv = stable_inverse(K, stab)
    l_inv = stable_inverse(L, stab)

    ka = k_inv @ A.T          # K^-1 A^T
    la = l_inv @ A            # L^-1 A
    m = ka @ la               # K^-1 A^T L^-1 A
    loss = k0 - float(np.trace(m))

    dF = -(2.0 / n) * (G @ la @ k_inv - F @ (m @ k_inv))
    dG = -(2.0 / n) * (F @ ka @ l_inv - G @ (la @ ka) @ l_inv)
    triple = CovarianceTriple(K=K, L=L, A=A, n_samples=n)
    return loss, dF, dG, triple
