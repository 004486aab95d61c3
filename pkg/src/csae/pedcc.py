"""Predefined evenly-distributed class centroids.

Points start as normalized Gaussian draws on the unit sphere in R^d and move
under mutual inverse-square repulsion, restricted to the tangent plane, until
they settle. The centroids are the settled points scaled by sqrt(d).
"""
from dataclasses import dataclass, field
import hashlib

import numpy as np

from . import kernels
from .rng import make_rng, standard_normal

__all__ = [
    "DegenerateConfigurationError",
    "PedccConfig",
    "SimState",
    "CentroidSet",
    "init_state",
    "compute_forces",
    "tangent_project",
    "step",
    "generate",
    "pairwise_distance_matrix",
    "riesz_energy",
    "uniformity_summary",
]

_MIN_NORM = 1e-12


class DegenerateConfigurationError(ValueError):
    """Raised when points collapse onto each other or onto the origin."""


@dataclass(frozen=True)
class PedccConfig:
    n: int
    d: int
    q: int = 200
    lam: float = 0.01
    epsilon: float = 0.01
    damping: float = 0.9
    seed: int = 0
    tol: float | None = None  # early stop on max tangent-force row norm

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 classes, got n={self.n}")
        if self.d < 2:
            raise ValueError(f"need latent dimension >= 2, got d={self.d}")
        if self.q < 1:
            raise ValueError(f"iteration count must be >= 1, got q={self.q}")
        if not self.lam > 0:
            raise ValueError(f"step coefficient must be positive, got {self.lam}")
        if not self.epsilon > 0:
            raise ValueError(f"distance floor must be positive, got {self.epsilon}")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass
class SimState:
    U: np.ndarray
    V: np.ndarray
    k: int = 0


@dataclass(frozen=True, eq=False)
class CentroidSet:
    """Fixed class centers ``mu`` (n x d), every row of norm ``alpha``."""

    mu: np.ndarray
    alpha: float
    seed: int = 0
    _fingerprint: str = field(default="", init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64, order="C")
        if mu.ndim != 2 or mu.shape[0] < 1:
            raise ValueError(f"centroid matrix must be 2-D and non-empty, got shape {mu.shape}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        norms = np.linalg.norm(mu, axis=1)
        if np.max(np.abs(norms - self.alpha)) > 1e-9 * max(1.0, self.alpha):
            raise ValueError("every centroid row must have norm alpha")
        if mu.shape[0] > 1:
            D = pairwise_distance_matrix(mu)
            off = D[~np.eye(mu.shape[0], dtype=bool)]
            if off.min() <= 0:
                raise ValueError("centroid rows must be pairwise distinct")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "_fingerprint", hashlib.sha256(mu.tobytes()).hexdigest())

    @property
    def n(self):
        return self.mu.shape[0]

    @property
    def d(self):
        return self.mu.shape[1]

    @property
    def fingerprint(self):
        """SHA-256 of the row-major float64 matrix."""
        return self._fingerprint

    def unit(self):
        return self.mu / self.alpha


def _normalize_rows(U):
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    if np.any(norms < _MIN_NORM):
        raise DegenerateConfigurationError("a position row collapsed to the origin")
    return U / norms


def init_state(config):
    """Gaussian draws normalized onto the unit sphere, zero velocity."""
    rng = make_rng(config.seed)
    U = standard_normal(rng, (config.n, config.d))
    for i in range(config.n):
        while np.linalg.norm(U[i]) < _MIN_NORM:
            U[i] = standard_normal(rng, config.d)
    U = _normalize_rows(U)
    return SimState(U=U, V=np.zeros_like(U), k=0)


def compute_forces(U, epsilon):
    """Resultant inverse-square repulsion on every row.

    Pair distances below ``epsilon`` are replaced by ``epsilon`` in the force
    magnitude; the direction stays the true unit separation vector. Points
    themselves are not moved.
    """
    return kernels.pair_forces(np.ascontiguousarray(U, dtype=np.float64), float(epsilon))


def tangent_project(F, U):
    """Remove from each row of F its component along the matching unit row of U."""
    F = np.asarray(F, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    return F - np.sum(U * F, axis=1, keepdims=True) * U


def step(state, config):
    """One damped update: move by the current velocity, renormalize, then
    accelerate by the tangent force measured at the old position."""
    Ft = tangent_project(compute_forces(state.U, config.epsilon), state.U)
    U = _normalize_rows(state.U + state.V)
    V = config.damping * (state.V + config.lam * Ft)
    V = tangent_project(V, U)
    return SimState(U=U, V=V, k=state.k + 1)


def _max_tangent_force(state, config):
    Ft = tangent_project(compute_forces(state.U, config.epsilon), state.U)
    return float(np.max(np.linalg.norm(Ft, axis=1)))


def generate(config, callback=None):
    """Run the charge simulation for ``config.q`` steps and scale by sqrt(d).

    ``callback(state)`` is invoked after every step when given.
    """
    state = init_state(config)
    for _ in range(config.q):
        state = step(state, config)
        if callback is not None:
            callback(state)
        if config.tol is not None and _max_tangent_force(state, config) < config.tol:
            break
    alpha = float(np.sqrt(config.d))
    U = _normalize_rows(state.U)
    return CentroidSet(mu=alpha * U, alpha=alpha, seed=config.seed)


def pairwise_distance_matrix(mu):
    mu = np.asarray(mu, dtype=np.float64)
    diff = mu[:, None, :] - mu[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(D, 0.0)
    return D


def riesz_energy(U):
    """Sum over pairs of inverse distances (Riesz s=1 energy)."""
    D = pairwise_distance_matrix(U)
    iu = np.triu_indices(D.shape[0], 1)
    pair = D[iu]
    if np.any(pair == 0):
        raise DegenerateConfigurationError("two points coincide; energy is infinite")
    return float(np.sum(1.0 / pair))


def uniformity_summary(centroids):
    """Distance statistics for a centroid set, plus the energy of its unit rows."""
    D = pairwise_distance_matrix(centroids.mu)
    off = D[np.triu_indices(centroids.n, 1)]
    return {
        "n": centroids.n,
        "d": centroids.d,
        "alpha": centroids.alpha,
        "min_distance": float(off.min()),
        "max_distance": float(off.max()),
        "mean_distance": float(off.mean()),
        "max_min_ratio": float(off.max() / off.min()),
        "riesz_energy": riesz_energy(centroids.unit()),
    }
