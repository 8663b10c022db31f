"""Seeded synthetic data generators and CSV ingestion.

Every generator is a pure function of (parameters, seed).  Seeding rule:
the seed feeds a SeedSequence whose spawned children drive one logical
source of randomness each (values, angles, noise, ...), in the documented
order per generator, so regeneration from (name, params, seed) is bitwise
identical within this implementation.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .discrete import JointDistribution

__all__ = [
    "PairDataset",
    "gen_gaussian_pair",
    "gen_ring_disk",
    "gen_discrete_joint",
    "sample_pairs",
    "gen_labeled_blobs",
    "one_hot",
    "blob_centers",
    "regenerate",
    "save_pairs_csv",
    "load_pairs_csv",
]


@dataclass(frozen=True)
class PairDataset:
    """Paired samples plus the recipe (generator name, params, seed) that made them."""

    x: np.ndarray
    y: np.ndarray
    name: str
    params: dict = field(default_factory=dict)
    seed: int = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError("x and y must be 2-D with equal row counts")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def pairs(self):
        return self.x, self.y


def _streams(seed, k: int):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(c) for c in ss.spawn(k)]


def gen_gaussian_pair(n: int, tau: float, sigma: float, seed) -> PairDataset:
    """x ~ N(0, tau^2) and y = x + N(0, sigma^2), i.i.d. pairs.

    Streams: (0) x draws, (1) noise draws.  sigma = 0 gives y = x exactly.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if tau <= 0 or sigma < 0:
        raise ValueError("need tau > 0 and sigma >= 0")
    rng_x, rng_noise = _streams(seed, 2)
    x = tau * rng_x.standard_normal(n)
    y = x + sigma * rng_noise.standard_normal(n)
    return PairDataset(x=x[:, None], y=y[:, None], name="gaussian_pair",
                       params={"n": n, "tau": tau, "sigma": sigma}, seed=seed)


def gen_ring_disk(n: int, seed, gap_angle: float = 0.0, shift_std: float = 0.05,
                  disk_radius: float = 0.25, ring_inner: float = 0.8,
                  ring_outer: float = 1.0) -> PairDataset:
    """2-D points, half uniform on a disk and half on an annulus; y = x + shift.

    The first n//2 rows are disk points, the rest annulus points.  A gap
    sector of gap_angle radians centered on angle 0 is cut from the annulus.
    Streams: (0) radii, (1) angles, (2) shift noise.  Geometry constants are
    recorded in params.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= gap_angle < 2 * np.pi:
        raise ValueError("gap_angle must lie in [0, 2*pi)")
    if shift_std < 0:
        raise ValueError("shift_std must be nonnegative")
    if not 0 < disk_radius < ring_inner < ring_outer:
        raise ValueError("need 0 < disk_radius < ring_inner < ring_outer")
    rng_r, rng_a, rng_shift = _streams(seed, 3)
    n_disk = n // 2
    n_ring = n - n_disk

    u_r = rng_r.random(n)
    u_a = rng_a.random(n)
    r_disk = disk_radius * np.sqrt(u_r[:n_disk])
    theta_disk = 2 * np.pi * u_a[:n_disk]
    # area-uniform radius on the annulus; angles avoid the gap sector at 0
    r_ring = np.sqrt(ring_inner ** 2 + (ring_outer ** 2 - ring_inner ** 2) * u_r[n_disk:])
    theta_ring = gap_angle / 2 + (2 * np.pi - gap_angle) * u_a[n_disk:]

    r = np.concatenate([r_disk, r_ring])
    theta = np.concatenate([theta_disk, theta_ring])
    x = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    y = x + shift_std * rng_shift.standard_normal((n, 2))
    params = {"n": n, "gap_angle": gap_angle, "shift_std": shift_std,
              "disk_radius": disk_radius, "ring_inner": ring_inner,
              "ring_outer": ring_outer}
    return PairDataset(x=x, y=y, name="ring_disk", params=params, seed=seed)


def gen_discrete_joint(n_x: int, n_y: int, seed, concentration: float = 1.0) -> JointDistribution:
    """Random full-support joint table: normalized Gamma(concentration) draws."""
    if n_x < 2 or n_y < 2:
        raise ValueError("need at least 2 states per side")
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    rng = np.random.default_rng(seed)
    t = rng.gamma(concentration, size=(n_x, n_y))
    return JointDistribution.from_table(t / t.sum())


def sample_pairs(j: JointDistribution, n: int, seed):
    """n i.i.d. (x, y) state-index pairs from the joint, as float column pairs."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    idx = rng.choice(j.n_x * j.n_y, size=n, p=j.table.ravel())
    x = (idx // j.n_y).astype(np.float64)
    y = (idx % j.n_y).astype(np.float64)
    return x[:, None], y[:, None]


def one_hot(labels, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= classes:
        raise ValueError("labels out of range")
    out = np.zeros((labels.shape[0], classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def blob_centers(classes: int, separation: float) -> np.ndarray:
    """Class centers, equally spaced on a circle of radius separation."""
    angles = 2 * np.pi * np.arange(classes) / classes
    return separation * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def gen_labeled_blobs(n: int, classes: int = 3, separation: float = 2.0,
                      noise: float = 0.5, label_noise: float = 0.0,
                      seed=None) -> PairDataset:
    """Gaussian blobs on a circle with one-hot labels, optionally flipped.

    x rows are blob samples; y rows one-hot encode the (possibly flipped)
    label.  With probability label_noise the stored label is replaced by a
    uniformly random other class.  Streams: (0) class draws, (1) offsets,
    (2) flips.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if noise < 0 or not 0 <= label_noise <= 1:
        raise ValueError("invalid noise parameters")
    rng_label, rng_off, rng_flip = _streams(seed, 3)
    true = rng_label.integers(0, classes, size=n)
    centers = blob_centers(classes, separation)
    x = centers[true] + noise * rng_off.standard_normal((n, 2))
    # draw flips unconditionally so the stream layout is mask-independent
    flip = rng_flip.random(n) < label_noise
    shift = rng_flip.integers(1, classes, size=n)
    observed = np.where(flip, (true + shift) % classes, true)
    params = {"n": n, "classes": classes, "separation": separation,
              "noise": noise, "label_noise": label_noise}
    return PairDataset(x=x, y=one_hot(observed, classes), name="labeled_blobs",
                       params=params, seed=seed)


_GENERATORS = {
    "gaussian_pair": gen_gaussian_pair,
    "ring_disk": gen_ring_disk,
    "labeled_blobs": gen_labeled_blobs,
}


def regenerate(ds: PairDataset) -> PairDataset:
    """Rebuild a dataset from its recorded recipe; bitwise identical."""
    try:
        gen = _GENERATORS[ds.name]
    except KeyError:
        raise ValueError(f"unknown generator {ds.name!r}") from None
    return gen(seed=ds.seed, **ds.params)


def save_pairs_csv(ds: PairDataset, path) -> None:
    """Write samples as CSV (x_0,...,y_0,... header) plus a metadata sidecar.

    %.17g serialization makes the round-trip value-exact for float64.
    """
    dx, dy = ds.x.shape[1], ds.y.shape[1]
    header = ",".join([f"x_{i}" for i in range(dx)] + [f"y_{i}" for i in range(dy)])
    np.savetxt(path, np.hstack([ds.x, ds.y]), delimiter=",", header=header,
               comments="", fmt="%.17g")
    meta = {"generator": ds.name, "params": ds.params, "seed": ds.seed,
            "d_x": dx, "d_y": dy}
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=1)


def load_pairs_csv(path) -> PairDataset:
    """Read a samples CSV (with optional sidecar) back into a PairDataset."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    dx = sum(1 for c in header if c.startswith("x_"))
    dy = sum(1 for c in header if c.startswith("y_"))
    if dx == 0 or dy == 0 or dx + dy != len(header):
        raise ValueError(f"bad pairs CSV header: {header!r}")
    if body.shape[1] != dx + dy:
        raise ValueError("pairs CSV rows do not match the header width")
    name, params, seed = "loaded", {}, None
    meta_path = f"{path}.meta.json"
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
        name = meta.get("generator", name)
        params = meta.get("params", params)
        seed = meta.get("seed", seed)
    return PairDataset(x=body[:, :dx], y=body[:, dx:], name=name,
                       params=params, seed=seed)
