"""Fully-connected encoder/decoder with explicit backpropagation.

Batches are row-major: ``x`` is (B, m*m), ``z`` is (B, d). An affine layer
computes ``y = x @ W.T + b`` with ``W`` shaped (out_dim, in_dim).
"""
from dataclasses import dataclass

import numpy as np

from .rng import make_rng, standard_normal

__all__ = [
    "LayerSpec",
    "OptimizerConfig",
    "Network",
    "DivergenceError",
    "StaleCacheError",
    "mlp_spec",
    "init_network",
    "encode",
    "decode",
    "forward",
    "backward",
    "learning_rate",
    "sgd_step",
]


class DivergenceError(FloatingPointError):
    """Non-finite gradients or losses during optimization."""


class StaleCacheError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "affine" or "relu"
    in_dim: int = 0
    out_dim: int = 0

    def __post_init__(self):
        if self.kind not in ("affine", "relu"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "affine" and (self.in_dim < 1 or self.out_dim < 1):
            raise ValueError(f"affine layer needs positive dims, got {self.in_dim}->{self.out_dim}")


@dataclass(frozen=True)
class OptimizerConfig:
    lr0: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0005
    epochs: int = 120
    decay_every: int = 30
    decay_factor: float = 10.0

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ValueError("momentum and weight_decay must be non-negative")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.decay_every < 1 or not self.decay_factor > 0:
            raise ValueError("decay_every must be >= 1 and decay_factor positive")


def mlp_spec(dims):
    """Affine layers through ``dims`` with ReLU between them (none at the end)."""
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    spec = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        if i:
            spec.append(LayerSpec("relu"))
        spec.append(LayerSpec("affine", a, b))
    return spec


def _check_chain(spec, label):
    if not spec:
        raise ValueError(f"{label} spec is empty")
    width = None
    for layer in spec:
        if layer.kind == "affine":
            if width is not None and layer.in_dim != width:
                raise ValueError(
                    f"{label}: affine layer expects {layer.in_dim} inputs but receives {width}"
                )
            width = layer.out_dim
    if width is None:
        raise ValueError(f"{label} spec has no affine layer")
    first = next(layer for layer in spec if layer.kind == "affine")
    return first.in_dim, width


class Network:
    """Encoder and decoder layer lists with parameters and momentum buffers.

    ``params`` holds one ``[W, b]`` pair per affine layer, encoder layers first;
    ``velocity`` mirrors its shapes.
    """

    def __init__(self, encoder_spec, decoder_spec, params, velocity=None):
        self.encoder_spec = list(encoder_spec)
        self.decoder_spec = list(decoder_spec)
        self.input_dim, self.latent_dim = _check_chain(self.encoder_spec, "encoder")
        dec_in, self.output_dim = _check_chain(self.decoder_spec, "decoder")
        if dec_in != self.latent_dim:
            raise ValueError(f"decoder input {dec_in} does not match latent size {self.latent_dim}")
        n_aff = sum(layer.kind == "affine" for layer in self.encoder_spec + self.decoder_spec)
        if len(params) != n_aff:
            raise ValueError(f"expected {n_aff} parameter pairs, got {len(params)}")
        self.params = [[np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64)] for W, b in params]
        for (W, b), layer in zip(self.params, self._affine_specs()):
            if W.shape != (layer.out_dim, layer.in_dim) or b.shape != (layer.out_dim,):
                raise ValueError(f"parameter shapes {W.shape}, {b.shape} do not match {layer}")
        if velocity is None:
            velocity = [[np.zeros_like(W), np.zeros_like(b)] for W, b in self.params]
        self.velocity = [[np.asarray(vW, dtype=np.float64), np.asarray(vb, dtype=np.float64)] for vW, vb in velocity]
        for (W, b), (vW, vb) in zip(self.params, self.velocity):
            if vW.shape != W.shape or vb.shape != b.shape:
                raise ValueError("momentum buffer shapes do not match parameters")

    def _affine_specs(self):
        return [layer for layer in self.encoder_spec + self.decoder_spec if layer.kind == "affine"]

    @property
    def n_encoder_affine(self):
        return sum(layer.kind == "affine" for layer in self.encoder_spec)

    def copy(self):
        return Network(
            self.encoder_spec,
            self.decoder_spec,
            [[W.copy(), b.copy()] for W, b in self.params],
            [[vW.copy(), vb.copy()] for vW, vb in self.velocity],
        )

    def __repr__(self):
        dims = [self.input_dim] + [l.out_dim for l in self.encoder_spec if l.kind == "affine"]
        ddims = [l.out_dim for l in self.decoder_spec if l.kind == "affine"]
        return f"Network({'->'.join(map(str, dims + ddims))})"


def init_network(encoder_spec, decoder_spec, seed):
    """Gaussian weights with standard deviation 1/sqrt(in_dim), zero biases."""
    rng = make_rng(seed)
    params = []
    for layer in list(encoder_spec) + list(decoder_spec):
        if layer.kind != "affine":
            continue
        W = standard_normal(rng, (layer.out_dim, layer.in_dim)) / np.sqrt(layer.in_dim)
        params.append([W, np.zeros(layer.out_dim)])
    if not params:
        raise ValueError("network spec is empty")
    return Network(encoder_spec, decoder_spec, params)


def _run(spec, params, x, caches):
    h = x
    k = 0
    for layer in spec:
        if caches is not None:
            caches.append(h)
        if layer.kind == "affine":
            W, b = params[k]
            k += 1
            h = h @ W.T + b
        else:
            h = np.maximum(h, 0.0)
    return h


def _check_input(x, width, label):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ValueError(f"{label} expects rows of length {width}, got shape {x.shape}")
    return x


def encode(net, x, caches=None):
    x = _check_input(x, net.input_dim, "encoder")
    return _run(net.encoder_spec, net.params[: net.n_encoder_affine], x, caches)


def decode(net, z, caches=None):
    z = _check_input(z, net.latent_dim, "decoder")
    return _run(net.decoder_spec, net.params[net.n_encoder_affine :], z, caches)


def forward(net, x, perturb=None):
    """Encode, optionally perturb the latent, decode.

    Returns ``(z, x_star, cache)`` where ``z`` is the clean latent and the
    cache records every layer input for :func:`backward`.
    """
    enc_cache, dec_cache = [], []
    z = encode(net, x, enc_cache)
    z_in = z if perturb is None else perturb(z)
    x_star = decode(net, z_in, dec_cache)
    return z, x_star, {"encoder": enc_cache, "decoder": dec_cache, "batch": z.shape[0]}


def _back(spec, params, inputs, grad, out):
    k = len(params)
    for layer, h in zip(reversed(spec), reversed(inputs)):
        if h.shape[0] != grad.shape[0]:
            raise StaleCacheError("cached activations do not match the upstream gradient")
        if layer.kind == "affine":
            k -= 1
            W, _ = params[k]
            if h.shape[1] != W.shape[1]:
                raise StaleCacheError("cached activation width does not match layer")
            out[k] = [grad.T @ h, grad.sum(axis=0)]
            grad = grad @ W
        else:
            grad = grad * (h > 0)
    return grad


def backward(net, cache, dz, dx_star):
    """Parameter gradients for upstream gradients on the latent and the output.

    The latent receives ``dz`` plus whatever flows back from the decoder; the
    additive noise between them has identity Jacobian.
    """
    if len(cache["encoder"]) != len(net.encoder_spec) or len(cache["decoder"]) != len(net.decoder_spec):
        raise StaleCacheError("cache was produced by a different network")
    B = cache["batch"]
    dz = np.asarray(dz, dtype=np.float64).reshape(B, net.latent_dim)
    dx_star = np.asarray(dx_star, dtype=np.float64).reshape(B, net.output_dim)
    ne = net.n_encoder_affine
    grads = [None] * len(net.params)
    dec_grads = [None] * (len(net.params) - ne)
    dz_total = dz + _back(net.decoder_spec, net.params[ne:], cache["decoder"], dx_star, dec_grads)
    enc_grads = [None] * ne
    _back(net.encoder_spec, net.params[:ne], cache["encoder"], dz_total, enc_grads)
    grads[:ne] = enc_grads
    grads[ne:] = dec_grads
    return grads


def learning_rate(cfg, epoch):
    """Step decay: lr0 divided by decay_factor every decay_every epochs."""
    return cfg.lr0 / cfg.decay_factor ** (epoch // cfg.decay_every)


def sgd_step(net, grads, cfg, epoch):
    """In-place heavy-ball update with L2 weight decay on weights only."""
    lr = learning_rate(cfg, epoch)
    for g in grads:
        if not (np.all(np.isfinite(g[0])) and np.all(np.isfinite(g[1]))):
            raise DivergenceError(f"non-finite gradient at epoch {epoch}")
    for (W, b), (vW, vb), (gW, gb) in zip(net.params, net.velocity, grads):
        vW *= cfg.momentum
        vW += gW + cfg.weight_decay * W
        vb *= cfg.momentum
        vb += gb
        W -= lr * vW
        b -= lr * vb
    return net
