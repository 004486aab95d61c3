"""Latent-space operations: training noise, nearest-centroid decisions and
per-class Gaussian models for conditional sampling."""
from dataclasses import dataclass

import numpy as np

from .rng import make_rng, standard_normal

__all__ = [
    "NoiseConfig",
    "ClassStats",
    "EmptyClassError",
    "add_noise",
    "nearest_class_mean",
    "fit_class_stats",
    "sample_latent",
]


class EmptyClassError(ValueError):
    def __init__(self, classes):
        self.classes = list(classes)
        super().__init__(f"no samples for class(es) {self.classes}")


@dataclass(frozen=True)
class NoiseConfig:
    beta: float = 0.0
    alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def scale(self):
        return self.alpha * self.beta


def add_noise(z, cfg, rng=None, n0=None):
    """Decoder input ``z + alpha * beta * n0`` with ``n0`` standard normal.

    ``n0`` may be supplied directly; otherwise it is drawn from ``rng`` (or a
    generator seeded from ``cfg.seed``), one independent draw per row.
    """
    z = np.asarray(z, dtype=np.float64)
    if cfg.beta == 0.0 and n0 is None:
        return z.copy()
    if n0 is None:
        n0 = standard_normal(make_rng(cfg.seed) if rng is None else rng, z.shape)
    n0 = np.asarray(n0, dtype=np.float64)
    if n0.shape != z.shape:
        raise ValueError(f"noise shape {n0.shape} does not match latent shape {z.shape}")
    return z + cfg.scale * n0


def nearest_class_mean(z, centroids):
    """Index of the closest centroid (Euclidean); ties go to the lowest index.

    ``centroids`` is a CentroidSet or an (n, d) matrix. A single latent returns
    an int, a batch returns an integer array.
    """
    mu = np.asarray(getattr(centroids, "mu", centroids), dtype=np.float64)
    if mu.ndim != 2 or mu.shape[0] == 0:
        raise ValueError("centroid set is empty")
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != mu.shape[1]:
        raise ValueError(f"latent dimension {Z.shape[1]} != centroid dimension {mu.shape[1]}")
    d2 = np.sum((Z[:, None, :] - mu[None, :, :]) ** 2, axis=2)
    idx = np.argmin(d2, axis=1)
    return int(idx[0]) if single else idx


@dataclass
class ClassStats:
    means: np.ndarray  # (k, d)
    covs: np.ndarray  # (k, d, d)
    factors: np.ndarray  # (k, d, d), factor @ factor.T == cov + delta * I
    counts: np.ndarray
    delta: float

    @property
    def n_classes(self):
        return self.means.shape[0]

    @property
    def d(self):
        return self.means.shape[1]


def _factor(C):
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        # PSD but singular (delta = 0): symmetric square root instead
        w, Q = np.linalg.eigh(C)
        return Q * np.sqrt(np.clip(w, 0.0, None))


def fit_class_stats(latents, labels, n_classes, delta=1e-6):
    """Per-class sample mean and covariance (divisor max(count - 1, 1)),
    factored after adding ``delta * I``."""
    Z = np.asarray(latents, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    if Z.ndim != 2 or Z.shape[0] != y.shape[0]:
        raise ValueError(f"latents {Z.shape} and labels {y.shape} do not align")
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    if np.any((y < 0) | (y >= n_classes)):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        raise EmptyClassError(np.flatnonzero(counts == 0).tolist())
    d = Z.shape[1]
    means = np.empty((n_classes, d))
    covs = np.empty((n_classes, d, d))
    factors = np.empty((n_classes, d, d))
    eye = np.eye(d)
    for k in range(n_classes):
        Zk = Z[y == k]
        mk = Zk.mean(axis=0)
        dev = Zk - mk
        C = dev.T @ dev / max(len(Zk) - 1, 1)
        C = 0.5 * (C + C.T)
        means[k] = mk
        covs[k] = C
        factors[k] = _factor(C + delta * eye)
    return ClassStats(means=means, covs=covs, factors=factors, counts=counts, delta=float(delta))


def sample_latent(stats, k, count, seed=0):
    """``count`` draws from the Gaussian fitted to class ``k``."""
    if not 0 <= k < stats.n_classes:
        raise ValueError(f"class index {k} out of range [0, {stats.n_classes - 1}]")
    g = standard_normal(make_rng(seed), (int(count), stats.d))
    return stats.means[k] + g @ stats.factors[k].T
