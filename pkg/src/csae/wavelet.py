"""Multi-level orthonormal 2D Haar transform.

Every function accepts a single (m, m) image or a stack shaped (..., m, m)
and works on the last two axes. Per 2x2 block [[p, q], [r, s]]::

    b = (p + q + r + s) / 2     approximation
    h = (p + q - r - s) / 2     row difference (horizontal detail)
    v = (p - q + r - s) / 2     column difference (vertical detail)
    c = (p - q - r + s) / 2     diagonal detail

The transform is orthonormal, so synthesis is both the inverse and the adjoint
of analysis; the wavelets loss relies on the latter to pull gradients back.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = ["WaveletPyramid", "dwt2_level", "idwt2_level", "dwt2", "idwt2", "max_levels"]


@dataclass
class WaveletPyramid:
    approx: np.ndarray
    details: list  # [(h_q, v_q, c_q) for q = 1..J], finest first

    @property
    def J(self):
        return len(self.details)

    def subbands(self):
        """Yield ``(name, level, array)`` for every subband, approximation first."""
        yield "b", self.J, self.approx
        for q, (h, v, c) in enumerate(self.details, start=1):
            yield "h", q, h
            yield "v", q, v
            yield "c", q, c

    def energy(self):
        return float(sum(np.sum(a * a) for _, _, a in self.subbands()))

    def map(self, fn):
        """Apply ``fn`` to every subband, returning a new pyramid."""
        return WaveletPyramid(
            approx=fn(self.approx),
            details=[(fn(h), fn(v), fn(c)) for h, v, c in self.details],
        )


def _as_stack(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ValueError(f"expected an image or a stack of images, got shape {x.shape}")
    lead = x.shape[:-2]
    return np.ascontiguousarray(x.reshape((-1,) + x.shape[-2:])), lead


def max_levels(side):
    """Largest J such that ``side`` is divisible by 2**J."""
    side = int(side)
    J = 0
    while side > 1 and side % 2 == 0:
        side //= 2
        J += 1
    return J


def dwt2_level(img):
    """One analysis level; returns ``(b, h, v, c)`` at half the side length."""
    x, lead = _as_stack(img)
    rows, cols = x.shape[-2:]
    if rows != cols:
        raise ValueError(f"image must be square, got {rows}x{cols}")
    if rows % 2:
        raise ValueError(f"image side must be even, got {rows}")
    out = kernels.haar_analysis(x)
    k = rows // 2
    return tuple(a.reshape(lead + (k, k)) for a in out)


def idwt2_level(b, h, v, c):
    shapes = {np.shape(a) for a in (b, h, v, c)}
    if len(shapes) != 1:
        raise ValueError(f"subband shapes differ: {sorted(shapes)}")
    bb, lead = _as_stack(b)
    hh, _ = _as_stack(h)
    vv, _ = _as_stack(v)
    cc, _ = _as_stack(c)
    if bb.shape[-1] != bb.shape[-2]:
        raise ValueError(f"subbands must be square, got {bb.shape[-2:]}")
    x = kernels.haar_synthesis(bb, hh, vv, cc)
    return x.reshape(lead + x.shape[-2:])


def dwt2(img, J):
    """J-level decomposition, recursing on the approximation subband."""
    J = int(J)
    if J < 1:
        raise ValueError(f"level count must be >= 1, got {J}")
    side = np.shape(img)[-1]
    if side % (2 ** J):
        raise ValueError(f"side {side} is not divisible by 2**{J}")
    approx = np.asarray(img, dtype=np.float64)
    details = []
    for _ in range(J):
        approx, h, v, c = dwt2_level(approx)
        details.append((h, v, c))
    return WaveletPyramid(approx=approx, details=details)


def idwt2(pyramid):
    x = pyramid.approx
    for h, v, c in reversed(pyramid.details):
        x = idwt2_level(x, h, v, c)
    return x
