"""Training and evaluation against fixed class centroids.

Each step encodes a batch, pulls the clean latents toward their class
centroids, decodes a noise-perturbed copy of the latents, and scores the
reconstruction with the wavelets loss. Both paths are backpropagated together.
"""
from dataclasses import asdict, dataclass, field, replace
import configparser
import math

import numpy as np

from . import latent
from .fileio import FormatError, read_container, write_container
from .losses import LossWeights, evaluate_losses, loss_gradients, mse
from .net import (
    DivergenceError,
    Network,
    OptimizerConfig,
    decode,
    encode,
    forward,
    backward,
    init_network,
    learning_rate,
    mlp_spec,
    sgd_step,
)
from .pedcc import CentroidSet
from .rng import permutation, spawn

__all__ = [
    "TrainConfig",
    "EpochMetrics",
    "Metrics",
    "EvalResult",
    "TrainingDiverged",
    "ConfigError",
    "load_config",
    "dump_config",
    "build_network",
    "train",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
    "METRICS_COLUMNS",
    "METRICS_VERSION",
]

METRICS_VERSION = "csae-metrics v1"
METRICS_COLUMNS = ["epoch", "lr", "loss1", "loss2", "total", "test_accuracy", "test_mse"]


class ConfigError(ValueError):
    pass


class TrainingDiverged(DivergenceError):
    def __init__(self, epoch, batch, term, value):
        self.epoch, self.batch, self.term, self.value = epoch, batch, term, value
        super().__init__(f"non-finite {term} ({value}) at epoch {epoch}, batch {batch}")


@dataclass(frozen=True)
class TrainConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    beta: float = 0.0
    batch_size: int = 64
    loss_weights: LossWeights = field(default_factory=LossWeights)
    eval_every: int = 1
    seed: int = 0
    encoder_hidden: tuple = (256, 64)
    decoder_hidden: tuple = (64, 256)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be >= 0, got {self.eval_every}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        object.__setattr__(self, "encoder_hidden", tuple(int(h) for h in self.encoder_hidden))
        object.__setattr__(self, "decoder_hidden", tuple(int(h) for h in self.decoder_hidden))

    def with_epochs(self, epochs):
        return replace(self, optimizer=replace(self.optimizer, epochs=int(epochs)))

    def to_dict(self):
        out = asdict(self)
        out["encoder_hidden"] = list(self.encoder_hidden)
        out["decoder_hidden"] = list(self.decoder_hidden)
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["optimizer"] = OptimizerConfig(**d.get("optimizer", {}))
        d["loss_weights"] = LossWeights(**d.get("loss_weights", {}))
        return cls(**d)


# --- key-value config file --------------------------------------------------

_SCHEMA = {
    "train": {
        "beta": float,
        "batch_size": int,
        "eval_every": int,
        "seed": int,
        "encoder_hidden": "dims",
        "decoder_hidden": "dims",
    },
    "optimizer": {
        "lr0": float,
        "momentum": float,
        "weight_decay": float,
        "epochs": int,
        "decay_every": int,
        "decay_factor": float,
    },
    "loss": {
        "lambda1": float,
        "lambda2": float,
        "lambda3": float,
        "lambda4": float,
        "levels": int,
        "loss2_weight": float,
    },
}


def _parse(kind, raw, where):
    try:
        if kind == "dims":
            return tuple(int(t) for t in raw.replace(",", " ").split())
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def load_config(path_or_text):
    """Parse an INI-style file with sections [train], [optimizer], [loss].

    Every key is optional; unknown sections or keys are rejected.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    text = str(path_or_text)
    try:
        if "\n" in text or "[" in text:
            cp.read_string(text)
        else:
            with open(text) as f:
                cp.read_file(f)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {s: {} for s in _SCHEMA}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[section][key] = _parse(_SCHEMA[section][key], raw, f"[{section}] {key}")
    loss = values["loss"]
    if "levels" in loss:
        loss["J"] = loss.pop("levels")
    try:
        return TrainConfig(
            optimizer=OptimizerConfig(**values["optimizer"]),
            loss_weights=LossWeights(**loss),
            **values["train"],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def dump_config(cfg):
    """Render a TrainConfig in the format accepted by :func:`load_config`."""
    o, w = cfg.optimizer, cfg.loss_weights
    lines = [
        "[train]",
        f"beta = {cfg.beta!r}",
        f"batch_size = {cfg.batch_size}",
        f"eval_every = {cfg.eval_every}",
        f"seed = {cfg.seed}",
        "encoder_hidden = " + ", ".join(map(str, cfg.encoder_hidden)),
        "decoder_hidden = " + ", ".join(map(str, cfg.decoder_hidden)),
        "",
        "[optimizer]",
        f"lr0 = {o.lr0!r}",
        f"momentum = {o.momentum!r}",
        f"weight_decay = {o.weight_decay!r}",
        f"epochs = {o.epochs}",
        f"decay_every = {o.decay_every}",
        f"decay_factor = {o.decay_factor!r}",
        "",
        "[loss]",
        f"lambda1 = {w.lambda1!r}",
        f"lambda2 = {w.lambda2!r}",
        f"lambda3 = {w.lambda3!r}",
        f"lambda4 = {w.lambda4!r}",
        f"levels = {w.J}",
        f"loss2_weight = {w.loss2_weight!r}",
        "",
    ]
    return "\n".join(lines)


# --- metrics ----------------------------------------------------------------


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    loss1: float
    loss2: float
    total: float
    test_accuracy: float = math.nan
    test_mse: float = math.nan

    def row(self):
        return asdict(self)


@dataclass
class Metrics:
    epochs: list = field(default_factory=list)
    steps: list = field(default_factory=list)  # (epoch, batch, loss1, loss2, total)

    def rows(self):
        return [e.row() for e in self.epochs]


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    mse: float
    n: int


# --- training ---------------------------------------------------------------


def build_network(cfg, side, d, seed):
    m2 = int(side) * int(side)
    enc = mlp_spec([m2, *cfg.encoder_hidden, d])
    dec = mlp_spec([d, *cfg.decoder_hidden, m2])
    return init_network(enc, dec, seed)


def _preflight(cfg, dataset, centroids):
    if dataset.n_classes != centroids.n:
        raise ConfigError(
            f"dataset has {dataset.n_classes} classes but the centroid set has {centroids.n}"
        )
    if len(dataset) and dataset.labels.max() >= centroids.n:
        raise ConfigError(f"label {dataset.labels.max()} has no centroid")
    J = cfg.loss_weights.J
    if dataset.side % (2 ** J):
        raise ConfigError(f"image side {dataset.side} is not divisible by 2**{J}")


def train(cfg, dataset, centroids, test=None, noise_source=None, callback=None):
    """Fit a network to ``dataset`` against ``centroids``.

    Parameters
    ----------
    cfg : TrainConfig
    dataset : Dataset
        Training split.
    centroids : CentroidSet
        Must have one row per dataset class.
    test : Dataset, optional
        Evaluated every ``cfg.eval_every`` epochs (and after the last one).
    noise_source : callable, optional
        ``noise_source(shape) -> array`` replaces the standard normal draws of
        the latent noise; used by tests.
    callback : callable, optional
        ``callback(epoch, net, epoch_metrics)`` after every epoch.

    Returns
    -------
    (Network, Metrics)
    """
    _preflight(cfg, dataset, centroids)
    init_rng, shuffle_rng, noise_rng = spawn(cfg.seed, 3)
    net = build_network(cfg, dataset.side, centroids.d, init_rng)
    metrics = Metrics()
    ncfg = latent.NoiseConfig(beta=cfg.beta, alpha=centroids.alpha, seed=cfg.seed)
    X = dataset.flat()
    y = dataset.labels
    side = dataset.side
    w = cfg.loss_weights
    N = len(dataset)

    def perturb(z):
        n0 = None if noise_source is None else noise_source(z.shape)
        return latent.add_noise(z, ncfg, rng=noise_rng, n0=n0)

    for epoch in range(cfg.optimizer.epochs):
        order = permutation(shuffle_rng, N)
        sums = np.zeros(3)
        for bi, start in enumerate(range(0, N, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            x = X[idx]
            targets = centroids.mu[y[idx]]
            z, x_star, cache = forward(net, x, perturb=perturb)
            imgs_star = x_star.reshape(-1, side, side)
            imgs = x.reshape(-1, side, side)
            rep = evaluate_losses(z, targets, imgs_star, imgs, w)
            for term in ("loss1", "loss2", "total"):
                value = getattr(rep, term)
                if not math.isfinite(value):
                    raise TrainingDiverged(epoch, bi, term, value)
            dz, dxs = loss_gradients(z, targets, imgs_star, imgs, w)
            grads = backward(net, cache, dz, dxs.reshape(x_star.shape))
            try:
                sgd_step(net, grads, cfg.optimizer, epoch)
            except DivergenceError as exc:
                raise TrainingDiverged(epoch, bi, "parameter update", math.nan) from exc
            metrics.steps.append((epoch, bi, rep.loss1, rep.loss2, rep.total))
            sums += len(idx) * np.array([rep.loss1, rep.loss2, rep.total])
        means = sums / max(N, 1)
        row = EpochMetrics(epoch, learning_rate(cfg.optimizer, epoch), *means)
        last = epoch == cfg.optimizer.epochs - 1
        if test is not None and (last or (cfg.eval_every and (epoch + 1) % cfg.eval_every == 0)):
            res = evaluate(net, test, centroids)
            row.test_accuracy, row.test_mse = res.accuracy, res.mse
        metrics.epochs.append(row)
        if callback is not None:
            callback(epoch, net, row)
    return net, metrics


def evaluate(net, dataset, centroids):
    """Nearest-centroid accuracy and pixel MSE on clean forward passes."""
    if len(dataset) == 0:
        return EvalResult(accuracy=math.nan, mse=math.nan, n=0)
    X = dataset.flat()
    z = encode(net, X)
    pred = latent.nearest_class_mean(z, centroids)
    recon = decode(net, z)
    return EvalResult(
        accuracy=float(np.mean(pred == dataset.labels)),
        mse=mse(recon, X),
        n=len(dataset),
    )


# --- checkpoints ------------------------------------------------------------


def save_checkpoint(path, net, cfg, centroids, epoch, extra=None):
    """Store spec, parameters, momentum, config and the centroid set."""
    meta = {
        "encoder": [[l.kind, l.in_dim, l.out_dim] for l in net.encoder_spec],
        "decoder": [[l.kind, l.in_dim, l.out_dim] for l in net.decoder_spec],
        "config": cfg.to_dict(),
        "beta": cfg.beta,
        "epoch": int(epoch),
        "centroids": {
            "fingerprint": centroids.fingerprint,
            "alpha": centroids.alpha,
            "seed": centroids.seed,
        },
        "extra": extra or {},
    }
    arrays = [("mu", centroids.mu)]
    for i, ((W, b), (vW, vb)) in enumerate(zip(net.params, net.velocity)):
        arrays += [(f"W{i}", W), (f"b{i}", b), (f"vW{i}", vW), (f"vb{i}", vb)]
    write_container(path, "CKPT", meta, arrays)


def load_checkpoint(path):
    """Return ``(net, cfg, centroids, meta)``."""
    from .net import LayerSpec

    meta, a = read_container(path, "CKPT")
    enc = [LayerSpec(*l) for l in meta["encoder"]]
    dec = [LayerSpec(*l) for l in meta["decoder"]]
    k = sum(l.kind == "affine" for l in enc + dec)
    params = [[a[f"W{i}"], a[f"b{i}"]] for i in range(k)]
    velocity = [[a[f"vW{i}"], a[f"vb{i}"]] for i in range(k)]
    net = Network(enc, dec, params, velocity)
    c = meta["centroids"]
    centroids = CentroidSet(mu=a["mu"], alpha=c["alpha"], seed=c["seed"])
    if centroids.fingerprint != c["fingerprint"]:
        raise FormatError(f"{path}: centroid fingerprint mismatch")
    return net, TrainConfig.from_dict(meta["config"]), centroids, meta
