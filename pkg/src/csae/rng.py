"""Seeded random streams.

Uniform doubles come from numpy's PCG64 bit generator, whose raw stream is
stable across numpy releases. Gaussians are produced here with Box-Muller
instead of ``Generator.standard_normal`` so the bits we write to disk do not
depend on numpy's choice of normal sampler.
"""
import numpy as np

__all__ = ["make_rng", "spawn", "standard_normal", "permutation"]


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def spawn(seed, count):
    """Return ``count`` independent generators derived from one integer seed."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def standard_normal(rng, shape):
    """Standard normal draws via the Box-Muller transform."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    size = int(np.prod(shape, dtype=np.int64))
    if size == 0:
        return np.zeros(shape)
    pairs = (size + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(theta)
    out[1::2] = radius * np.sin(theta)
    return out[:size].reshape(shape)


def permutation(rng, n):
    """Fisher-Yates shuffle of ``range(n)`` driven by uniform doubles."""
    idx = np.arange(n)
    u = rng.random(max(n - 1, 0))
    for i in range(n - 1, 0, -1):
        j = int(u[n - 1 - i] * (i + 1))
        idx[i], idx[j] = idx[j], idx[i]
    return idx
