"""Datasets: IDX ingestion, a synthetic pattern corpus, padding and PGM I/O."""
from dataclasses import dataclass
import struct

import numpy as np

from .rng import spawn, standard_normal

__all__ = [
    "Dataset",
    "IdxError",
    "IdxMagicError",
    "IdxTruncatedError",
    "IdxCountMismatchError",
    "IDX_IMAGES_MAGIC",
    "IDX_LABELS_MAGIC",
    "load_idx",
    "write_idx_images",
    "write_idx_labels",
    "pad_to",
    "TEMPLATE_NAMES",
    "make_template",
    "make_synthetic",
    "subset",
    "write_pgm",
    "read_pgm",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class Dataset:
    images: np.ndarray  # (N, m, m) in [0, 1]
    labels: np.ndarray  # (N,) int64
    n_classes: int
    split: str = "train"

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels).astype(np.int64)
        if images.ndim != 3 or images.shape[1] != images.shape[2]:
            raise ValueError(f"images must be (N, m, m), got shape {images.shape}")
        if labels.shape != (images.shape[0],):
            raise ValueError(f"{images.shape[0]} images but {labels.shape[0]} labels")
        if len(labels) and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ValueError("pixels must lie in [0, 1]")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.images.shape[0]

    @property
    def side(self):
        return self.images.shape[1]

    def flat(self):
        return self.images.reshape(len(self), -1)


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------


class IdxError(ValueError):
    def __init__(self, path, offset, message):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{path}: byte {offset}: {message}")


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxCountMismatchError(IdxError):
    pass


def _read_idx(path, magic, ndim):
    with open(path, "rb") as f:
        raw = f.read()
    header = 4 + 4 * ndim
    if len(raw) < 4:
        raise IdxTruncatedError(path, len(raw), "file ends inside the magic number")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IdxMagicError(path, 0, f"magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < header:
        raise IdxTruncatedError(path, len(raw), f"header needs {header} bytes")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    need = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header < need:
        raise IdxTruncatedError(
            path, len(raw), f"payload has {len(raw) - header} bytes, header declares {need}"
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=need, offset=header)
    return data.reshape(dims)


def load_idx(images_path, labels_path, n_classes=None, split="train"):
    """Read an unsigned-byte IDX image tensor and its label vector.

    Pixels are scaled by 1/255. ``n_classes`` defaults to ``max(label) + 1``.
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            labels_path, 4, f"{labels.shape[0]} labels for {images.shape[0]} images"
        )
    if images.shape[1] != images.shape[2]:
        raise IdxError(images_path, 8, f"images must be square, got {images.shape[1]}x{images.shape[2]}")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if len(labels) else 1
    return Dataset(images / 255.0, labels, int(n_classes), split)


def write_idx_images(path, images):
    arr = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *arr.shape))
        f.write(arr.tobytes())


def write_idx_labels(path, labels):
    arr = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, arr.shape[0]))
        f.write(arr.tobytes())


# ---------------------------------------------------------------------------
# Padding
# ---------------------------------------------------------------------------


def pad_to(img, target_side):
    """Zero-pad the last two axes equally on every edge to ``target_side``."""
    img = np.asarray(img, dtype=np.float64)
    side = img.shape[-1]
    if img.shape[-2] != side:
        raise ValueError(f"image must be square, got {img.shape[-2:]}")
    extra = int(target_side) - side
    if extra < 0:
        raise ValueError(f"target side {target_side} is smaller than image side {side}")
    if extra % 2:
        raise ValueError(f"padding {side} -> {target_side} is not symmetric (odd difference)")
    p = extra // 2
    widths = [(0, 0)] * (img.ndim - 2) + [(p, p), (p, p)]
    return np.pad(img, widths)


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

TEMPLATE_NAMES = (
    "hstripes",
    "vstripes",
    "checker",
    "disk",
    "cross",
    "diagonal",
    "frame",
    "gradient",
)


def make_template(name, side):
    """Noise-free pattern image of the given side (side >= 8 recommended)."""
    side = int(side)
    if side < 4:
        raise ValueError(f"templates need side >= 4, got {side}")
    r, c = np.mgrid[0:side, 0:side]
    period = max(side // 4, 2)
    half = period // 2
    centre = (side - 1) / 2.0
    band = max(side // 8, 1)
    if name == "hstripes":
        out = (r % period) < half
    elif name == "vstripes":
        out = (c % period) < half
    elif name == "checker":
        out = ((r // period) + (c // period)) % 2 == 0
    elif name == "disk":
        out = (r - centre) ** 2 + (c - centre) ** 2 <= (0.3 * side) ** 2
    elif name == "cross":
        out = (np.abs(r - centre) < band) | (np.abs(c - centre) < band)
    elif name == "diagonal":
        out = np.abs(r - c) < band + 0.5
    elif name == "frame":
        out = (np.minimum(r, c) < band) | (np.maximum(r, c) >= side - band)
    elif name == "gradient":
        return np.clip((r + c) / (2.0 * (side - 1)), 0.0, 1.0)
    else:
        raise KeyError(f"unknown template {name!r}; choose from {TEMPLATE_NAMES}")
    return out.astype(np.float64)


def make_synthetic(n_classes, per_class, side=16, noise_sd=0.1, seed=0, test_per_class=None):
    """Train and test sets of noisy template images, one template per class.

    Each sample is its class template plus Gaussian pixel noise, clamped to
    [0, 1]. Samples are ordered class by class; shuffling is the trainer's job.
    """
    if not 1 <= n_classes <= len(TEMPLATE_NAMES):
        raise ValueError(f"can generate 1..{len(TEMPLATE_NAMES)} classes, requested {n_classes}")
    if per_class < 0:
        raise ValueError("per_class must be non-negative")
    test_per_class = per_class if test_per_class is None else test_per_class
    templates = np.stack([make_template(TEMPLATE_NAMES[k], side) for k in range(n_classes)])
    train_rng, test_rng = spawn(seed, 2)

    def build(count, rng, split):
        labels = np.repeat(np.arange(n_classes), count)
        images = templates[labels]
        if noise_sd > 0:
            images = images + noise_sd * standard_normal(rng, images.shape)
        return Dataset(np.clip(images, 0.0, 1.0), labels, n_classes, split)

    return build(per_class, train_rng, "train"), build(test_per_class, test_rng, "test")


def subset(dataset, classes, relabel=True):
    """Keep only the listed classes; relabel them 0..len(classes)-1 by default."""
    classes = list(classes)
    mask = np.isin(dataset.labels, classes)
    labels = dataset.labels[mask]
    n = dataset.n_classes
    if relabel:
        lookup = {c: i for i, c in enumerate(classes)}
        labels = np.array([lookup[int(l)] for l in labels], dtype=np.int64)
        n = len(classes)
    return Dataset(dataset.images[mask], labels, n, dataset.split)


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------


def write_pgm(img, path):
    """Binary P5 greyscale, maxval 255; values are clamped to [0, 1] first."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    payload = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    rows, cols = payload.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        f.write(payload.tobytes())


def read_pgm(path):
    """Read a binary P5 file with maxval <= 255; returns values in [0, 1]."""
    with open(path, "rb") as f:
        raw = f.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    cols, rows, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    data = np.frombuffer(raw, dtype=np.uint8, count=rows * cols, offset=pos)
    return data.reshape(rows, cols) / float(maxval)
