"""On-disk formats.

Binary container (all integers little-endian)::

    b"CSAE"            4 bytes
    kind               8 bytes, ASCII, NUL padded ("PEDCC", "CKPT", "STATS")
    version            uint32
    header_length      uint32
    header             UTF-8 JSON, sorted keys; lists every array as
                       {"name", "shape"} in payload order
    payload            float64 little-endian, row-major, arrays back to back

Identical content always produces identical bytes.
"""
import csv
import io
import json
import struct

import numpy as np

from .latent import ClassStats
from .pedcc import CentroidSet

__all__ = [
    "FORMAT_VERSION",
    "FormatError",
    "write_container",
    "read_container",
    "save_centroids",
    "load_centroids",
    "save_class_stats",
    "load_class_stats",
    "write_csv",
    "write_matrix_csv",
]

FORMAT_VERSION = 1
_MAGIC = b"CSAE"
_PREFIX = struct.Struct("<4s8sII")


class FormatError(ValueError):
    pass


def write_container(path, kind, meta, arrays):
    """Write ``meta`` (JSON-serializable) and an ordered list of named arrays."""
    arrays = [(name, np.ascontiguousarray(a, dtype="<f8")) for name, a in arrays]
    header = dict(meta)
    header["arrays"] = [{"name": name, "shape": list(a.shape)} for name, a in arrays]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREFIX.pack(_MAGIC, kind.encode("ascii").ljust(8, b"\0"), FORMAT_VERSION, len(blob)))
        f.write(blob)
        for _, a in arrays:
            f.write(a.tobytes())


def read_container(path, kind):
    """Return ``(meta, {name: array})``; raises FormatError on any mismatch."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _PREFIX.size:
        raise FormatError(f"{path}: file too short for a container header")
    magic, found_kind, version, hlen = _PREFIX.unpack_from(raw)
    if magic != _MAGIC:
        raise FormatError(f"{path}: not a CSAE container")
    found_kind = found_kind.rstrip(b"\0").decode("ascii")
    if found_kind != kind:
        raise FormatError(f"{path}: holds {found_kind!r}, expected {kind!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    start = _PREFIX.size
    if len(raw) < start + hlen:
        raise FormatError(f"{path}: truncated header")
    meta = json.loads(raw[start : start + hlen].decode("utf-8"))
    pos = start + hlen
    arrays = {}
    for entry in meta.pop("arrays"):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        if len(raw) < pos + 8 * count:
            raise FormatError(f"{path}: truncated payload in array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += 8 * count
    if pos != len(raw):
        raise FormatError(f"{path}: {len(raw) - pos} trailing bytes")
    return meta, arrays


def save_centroids(path, centroids):
    meta = {"n": centroids.n, "d": centroids.d, "alpha": centroids.alpha, "seed": centroids.seed}
    write_container(path, "PEDCC", meta, [("mu", centroids.mu)])


def load_centroids(path):
    meta, arrays = read_container(path, "PEDCC")
    mu = arrays["mu"]
    if mu.shape != (meta["n"], meta["d"]):
        raise FormatError(f"{path}: matrix shape {mu.shape} disagrees with header n={meta['n']}, d={meta['d']}")
    return CentroidSet(mu=mu, alpha=meta["alpha"], seed=meta["seed"])


def save_class_stats(path, stats, meta=None):
    header = {"n_classes": stats.n_classes, "d": stats.d, "delta": stats.delta}
    header.update(meta or {})
    write_container(
        path,
        "STATS",
        header,
        [
            ("means", stats.means),
            ("covs", stats.covs),
            ("factors", stats.factors),
            ("counts", stats.counts.astype(np.float64)),
        ],
    )


def load_class_stats(path):
    meta, a = read_container(path, "STATS")
    stats = ClassStats(
        means=a["means"],
        covs=a["covs"],
        factors=a["factors"],
        counts=a["counts"].astype(np.int64),
        delta=float(meta["delta"]),
    )
    return stats, meta


def _fmt(value):
    if isinstance(value, float):
        return repr(value) if np.isfinite(value) else ""
    return str(value)


def write_csv(path, rows, columns, version_tag=None):
    """Rows of mappings, fixed column order, optional ``# <tag>`` first line."""
    buf = io.StringIO()
    if version_tag:
        buf.write(f"# {version_tag}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    with open(path, "w", newline="") as f:
        f.write(buf.getvalue())


def write_matrix_csv(path, matrix, decimals=4, labels=None):
    """Square matrix with row and column labels, fixed decimal places."""
    M = np.asarray(matrix, dtype=np.float64)
    labels = list(range(M.shape[0])) if labels is None else list(labels)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([""] + labels)
        for lab, row in zip(labels, M):
            w.writerow([lab] + [f"{x:.{decimals}f}" for x in row])
