"""Hot numeric kernels, each in a numba and a numpy flavour.

The public names (``pair_forces``, ``haar_analysis``, ``haar_synthesis``)
resolve to the numba versions unless ``CSAE_NUMBA=0`` is set. Both flavours
are always importable so tests and benchmarks can compare them directly.
Each flavour is deterministic; they agree to rounding, not bitwise.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "pair_forces",
    "haar_analysis",
    "haar_synthesis",
    "pair_forces_numpy",
    "pair_forces_numba",
    "haar_analysis_numpy",
    "haar_analysis_numba",
    "haar_synthesis_numpy",
    "haar_synthesis_numba",
    "BACKEND",
]


# ---------------------------------------------------------------------------
# Coulomb-like repulsion between rows of U
# ---------------------------------------------------------------------------


def pair_forces_numpy(U, epsilon):
    """Row i: sum over j != i of (l_ij / |l_ij|) / max(|l_ij|, epsilon)**2,
    with l_ij = u_i - u_j. Exactly coincident pairs contribute nothing."""
    U = np.asarray(U, dtype=np.float64)
    L = U[:, None, :] - U[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", L, L))
    rc = np.maximum(r, epsilon)
    inv = np.zeros_like(r)
    nz = r > 0
    inv[nz] = 1.0 / (rc[nz] * rc[nz] * r[nz])
    return np.einsum("ij,ijk->ik", inv, L)


@njit(cache=True)
def pair_forces_numba(U, epsilon):
    n, d = U.shape
    F = np.zeros((n, d))
    diff = np.empty(d)
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            s = 0.0
            for k in range(d):
                diff[k] = U[i, k] - U[j, k]
                s += diff[k] * diff[k]
            r = np.sqrt(s)
            if r == 0.0:
                continue
            rc = r if r > epsilon else epsilon
            w = 1.0 / (rc * rc * r)
            for k in range(d):
                F[i, k] += w * diff[k]
    return F


# ---------------------------------------------------------------------------
# One level of the orthonormal 2D Haar transform over a stack of images
# ---------------------------------------------------------------------------


def haar_analysis_numpy(x):
    """Split a (B, m, m) stack into (b, h, v, c), each (B, m/2, m/2)."""
    p = x[:, 0::2, 0::2]
    q = x[:, 0::2, 1::2]
    r = x[:, 1::2, 0::2]
    s = x[:, 1::2, 1::2]
    b = 0.5 * (p + q + r + s)
    h = 0.5 * (p + q - r - s)
    v = 0.5 * (p - q + r - s)
    c = 0.5 * (p - q - r + s)
    return b, h, v, c


def haar_synthesis_numpy(b, h, v, c):
    bsz, k, _ = b.shape
    x = np.empty((bsz, 2 * k, 2 * k))
    x[:, 0::2, 0::2] = 0.5 * (b + h + v + c)
    x[:, 0::2, 1::2] = 0.5 * (b + h - v - c)
    x[:, 1::2, 0::2] = 0.5 * (b - h + v - c)
    x[:, 1::2, 1::2] = 0.5 * (b - h - v + c)
    return x


@njit(cache=True)
def haar_analysis_numba(x):
    bsz, m, _ = x.shape
    k = m // 2
    b = np.empty((bsz, k, k))
    h = np.empty((bsz, k, k))
    v = np.empty((bsz, k, k))
    c = np.empty((bsz, k, k))
    for n in range(bsz):
        for i in range(k):
            for j in range(k):
                p = x[n, 2 * i, 2 * j]
                q = x[n, 2 * i, 2 * j + 1]
                r = x[n, 2 * i + 1, 2 * j]
                s = x[n, 2 * i + 1, 2 * j + 1]
                b[n, i, j] = 0.5 * (p + q + r + s)
                h[n, i, j] = 0.5 * (p + q - r - s)
                v[n, i, j] = 0.5 * (p - q + r - s)
                c[n, i, j] = 0.5 * (p - q - r + s)
    return b, h, v, c


@njit(cache=True)
def haar_synthesis_numba(b, h, v, c):
    bsz, k, _ = b.shape
    x = np.empty((bsz, 2 * k, 2 * k))
    for n in range(bsz):
        for i in range(k):
            for j in range(k):
                bb = b[n, i, j]
                hh = h[n, i, j]
                vv = v[n, i, j]
                cc = c[n, i, j]
                x[n, 2 * i, 2 * j] = 0.5 * (bb + hh + vv + cc)
                x[n, 2 * i, 2 * j + 1] = 0.5 * (bb + hh - vv - cc)
                x[n, 2 * i + 1, 2 * j] = 0.5 * (bb - hh + vv - cc)
                x[n, 2 * i + 1, 2 * j + 1] = 0.5 * (bb - hh - vv + cc)
    return x


if USE_NUMBA:
    BACKEND = "numba"
    pair_forces = pair_forces_numba
    haar_analysis = haar_analysis_numba
    haar_synthesis = haar_synthesis_numba
else:
    BACKEND = "numpy"
    pair_forces = pair_forces_numpy
    haar_analysis = haar_analysis_numpy
    haar_synthesis = haar_synthesis_numpy
