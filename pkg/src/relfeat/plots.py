"""Matplotlib renderings of run outputs, written straight to files.

Used by the CLI to drop PNG figures next to its CSV/JSON outputs; nothing
here is needed for the numerical pipeline.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "loss_curves",
    "spectrum_plot",
    "dataset_scatter",
    "classification_plot",
]


def loss_curves(history, path) -> str:
    """Train (and test, when present) loss per epoch."""
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = np.arange(1, len(history) + 1)
    train = [h[0] for h in history]
    ax.plot(epochs, train, label="train loss")
    if history and history[0][1] is not None:
        ax.plot(epochs, [h[1] for h in history], label="test loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def spectrum_plot(singular_values, path, exact=None) -> str:
    """Estimated singular values, optionally against exact reference values."""
    fig, ax = plt.subplots(figsize=(5, 4))
    sv = np.asarray(singular_values, dtype=np.float64)
    idx = np.arange(len(sv))
    ax.plot(idx, sv, "o-", label="estimated")
    if exact is not None:
        ax.plot(np.arange(len(exact)), exact, "s--", label="exact")
        ax.legend()
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.set_ylim(0, 1.1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def dataset_scatter(x, path, color=None) -> str:
    """Scatter of 2-D samples (1-D data is plotted against sample index)."""
    x = np.asarray(x, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 5))
    if x.shape[1] >= 2:
        ax.scatter(x[:, 0], x[:, 1], s=4, c=color, alpha=0.6)
        ax.set_aspect("equal")
    else:
        ax.scatter(np.arange(x.shape[0]), x[:, 0], s=4, alpha=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def classification_plot(x, labels, predicted, path) -> str:
    """Side-by-side scatter of given vs predicted labels for 2-D inputs."""
    x = np.asarray(x, dtype=np.float64)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4.5), sharex=True, sharey=True)
    for ax, lab, title in zip(axes, (labels, predicted), ("given", "predicted")):
        ax.scatter(x[:, 0], x[:, 1], s=4, c=np.asarray(lab), alpha=0.6)
        ax.set_title(title)
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
