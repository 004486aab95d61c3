"""Classification, reconstruction and wavelets losses with their gradients.

Conventions
-----------
* ``loss1`` averages the squared latent-to-centroid gap over the batch and
  over latent coordinates.
* ``mse`` and ``l1`` average over every entry they are given, so a batch of
  equally sized images reduces to the batch mean of per-image values.
* ``loss2`` normalizes each subband by its own entry count.
* The L1 subgradient at zero is 0.
"""
from dataclasses import dataclass, field

import numpy as np

from .wavelet import WaveletPyramid, dwt2, idwt2

__all__ = [
    "LossWeights",
    "LossReport",
    "mse",
    "l1",
    "loss1",
    "loss2",
    "total_loss",
    "mse_grad",
    "l1_grad",
    "loss1_grad",
    "loss2_grad",
    "loss_gradients",
    "evaluate_losses",
]


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 6.0
    lambda4: float = 10.0
    J: int = 2
    loss2_weight: float = 1.0  # reweight of loss2 in the total; 1 gives the plain sum

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "loss2_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.J < 1:
            raise ValueError(f"J must be >= 1, got {self.J}")

    @property
    def detail_weights(self):
        return {"h": self.lambda2, "v": self.lambda3, "c": self.lambda4}


@dataclass
class LossReport:
    loss1: float
    loss2: float
    total: float
    terms: dict = field(default_factory=dict)  # "b", "h1", "v1", "c1", ...

    def row(self):
        """Flat mapping in a stable column order, for CSV logs."""
        out = {"loss1": self.loss1, "loss2": self.loss2, "total": self.total}
        out.update({f"loss2_{k}": v for k, v in self.terms.items()})
        return out


def _check_same(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(x_star, x):
    a, b = _check_same(x_star, x)
    return float(np.mean((a - b) ** 2))


def l1(x_star, x):
    a, b = _check_same(x_star, x)
    return float(np.mean(np.abs(a - b)))


def mse_grad(x_star, x):
    a, b = _check_same(x_star, x)
    return 2.0 * (a - b) / a.size


def l1_grad(x_star, x):
    a, b = _check_same(x_star, x)
    return np.sign(a - b) / a.size


def loss1(z, targets):
    """Mean over batch and coordinates of (z - mu)**2."""
    z, t = _check_same(z, targets)
    return float(np.mean((z - t) ** 2))


def loss1_grad(z, targets):
    z, t = _check_same(z, targets)
    return 2.0 * (z - t) / z.size


def _pyramids(x_star, x, w):
    a, b = _check_same(x_star, x)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square images, got shape {a.shape}")
    if a.shape[-1] % (2 ** w.J):
        raise ValueError(f"image side {a.shape[-1]} is not divisible by 2**{w.J}")
    return dwt2(a, w.J), dwt2(b, w.J)


def loss2(x_star, x, w=LossWeights()):
    """Wavelets loss: weighted MSE on the coarsest approximation plus weighted
    L1 on every detail subband. Returns ``(value, terms)``."""
    ps, p = _pyramids(x_star, x, w)
    lam = w.detail_weights
    terms = {"b": w.lambda1 * mse(ps.approx, p.approx)}
    for q, ((hs, vs, cs), (h, v, c)) in enumerate(zip(ps.details, p.details), start=1):
        terms[f"h{q}"] = lam["h"] * l1(hs, h)
        terms[f"v{q}"] = lam["v"] * l1(vs, v)
        terms[f"c{q}"] = lam["c"] * l1(cs, c)
    return float(sum(terms.values())), terms


def loss2_grad(x_star, x, w=LossWeights()):
    """Gradient of ``loss2`` with respect to ``x_star``.

    Subband gradients are assembled as a pyramid and synthesized, which is the
    adjoint of the orthonormal analysis.
    """
    ps, p = _pyramids(x_star, x, w)
    lam = w.detail_weights
    grad = WaveletPyramid(
        approx=w.lambda1 * mse_grad(ps.approx, p.approx),
        details=[
            (lam["h"] * l1_grad(hs, h), lam["v"] * l1_grad(vs, v), lam["c"] * l1_grad(cs, c))
            for (hs, vs, cs), (h, v, c) in zip(ps.details, p.details)
        ],
    )
    return idwt2(grad)


def total_loss(loss1_value, loss2_value, loss2_weight=1.0):
    return loss1_value + loss2_weight * loss2_value


def evaluate_losses(z, targets, x_star, x, w=LossWeights()):
    l1v = loss1(z, targets)
    l2v, terms = loss2(x_star, x, w)
    tot = total_loss(l1v, l2v, w.loss2_weight)
    return LossReport(loss1=l1v, loss2=l2v, total=tot, terms=terms)


def loss_gradients(z, targets, x_star, x, w=LossWeights()):
    """``(d total / dz, d total / dx_star)``; the first is the classification
    path only, the decoder path reaches z through backpropagation."""
    return loss1_grad(z, targets), w.loss2_weight * loss2_grad(x_star, x, w)
