"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import _accel
from .data import load_idx, make_synthetic, pad_to, read_pgm, write_pgm, Dataset
from .fileio import (
    load_centroids,
    load_class_stats,
    save_centroids,
    save_class_stats,
    write_csv,
    write_matrix_csv,
)
from .latent import fit_class_stats, nearest_class_mean, sample_latent
from .net import decode, encode
from .pedcc import PedccConfig, generate, pairwise_distance_matrix, uniformity_summary
from .trainer import (
    METRICS_COLUMNS,
    METRICS_VERSION,
    TrainConfig,
    evaluate,
    load_checkpoint,
    load_config,
    save_checkpoint,
    train,
)
from .wavelet import dwt2

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _prefix(path):
    root, ext = os.path.splitext(path)
    return root if ext else path


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _tile(images, pad=1):
    """Arrange images in a near-square grid separated by ``pad`` zero pixels."""
    k = len(images)
    side = images[0].shape[0]
    cols = int(np.ceil(np.sqrt(k)))
    rows = int(np.ceil(k / cols))
    grid = np.zeros((rows * (side + pad) - pad, cols * (side + pad) - pad))
    for i, img in enumerate(images):
        r, c = divmod(i, cols)
        grid[r * (side + pad) : r * (side + pad) + side, c * (side + pad) : c * (side + pad) + side] = img
    return grid


# --- data specs -------------------------------------------------------------


def _data_spec(args):
    if args.data == "synthetic":
        return {
            "kind": "synthetic",
            "classes": args.classes,
            "per_class": args.per_class,
            "test_per_class": args.test_per_class,
            "side": args.side,
            "noise_sd": args.noise_sd,
            "seed": args.data_seed,
        }
    if args.data.startswith("idx:"):
        parts = [p for p in args.data[4:].split(",") if p]
        if len(parts) not in (2, 4):
            raise UsageError("--data idx:TRAIN_IMAGES,TRAIN_LABELS[,TEST_IMAGES,TEST_LABELS]")
        spec = {"kind": "idx", "train_images": parts[0], "train_labels": parts[1], "pad_to": args.pad_to}
        if len(parts) == 4:
            spec.update(test_images=parts[2], test_labels=parts[3])
        return spec
    raise UsageError(f"unknown --data {args.data!r}; use 'synthetic' or 'idx:...'")


def _load_data(spec):
    """Return ``(train, test)``; test may be None."""
    if spec["kind"] == "synthetic":
        return make_synthetic(
            spec["classes"],
            spec["per_class"],
            side=spec["side"],
            noise_sd=spec["noise_sd"],
            seed=spec["seed"],
            test_per_class=spec["test_per_class"],
        )

    def padded(ds):
        if not spec.get("pad_to") or spec["pad_to"] == ds.side:
            return ds
        return Dataset(pad_to(ds.images, spec["pad_to"]), ds.labels, ds.n_classes, ds.split)

    train_ds = padded(load_idx(spec["train_images"], spec["train_labels"], split="train"))
    test_ds = None
    if "test_images" in spec:
        test_ds = padded(
            load_idx(spec["test_images"], spec["test_labels"], n_classes=train_ds.n_classes, split="test")
        )
    return train_ds, test_ds


def _add_data_flags(p, required=True):
    p.add_argument("--data", required=required, default=None,
                   help="'synthetic' or idx:TRAIN_IMAGES,TRAIN_LABELS[,TEST_IMAGES,TEST_LABELS]")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--test-per-class", type=int, default=50)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--pad-to", type=int, default=None, help="zero-pad IDX images to this side")


def _checkpoint_data(args, meta):
    if getattr(args, "data", None):
        return _load_data(_data_spec(args))
    spec = meta.get("extra", {}).get("data")
    if spec is None:
        raise UsageError("checkpoint records no dataset; pass --data")
    return _load_data(spec)


# --- commands ---------------------------------------------------------------


def cmd_centroids_generate(args):
    cfg = PedccConfig(
        n=args.classes,
        d=args.dim,
        q=args.iters,
        lam=args.lam,
        epsilon=args.epsilon,
        damping=args.damping,
        seed=args.seed,
        tol=args.tol,
    )
    cs = generate(cfg)
    save_centroids(args.out, cs)
    _report_centroids(cs, _prefix(args.out))
    return 0


def _report_centroids(cs, prefix):
    write_matrix_csv(prefix + ".distances.csv", pairwise_distance_matrix(cs.mu), decimals=4)
    with open(prefix + ".coords.csv", "w") as f:
        f.write(",".join(f"x{j}" for j in range(cs.d)) + "\n")
        for row in cs.mu:
            f.write(",".join(repr(float(x)) for x in row) + "\n")
    summary = uniformity_summary(cs)
    summary["fingerprint"] = cs.fingerprint
    _write_json(prefix + ".summary.json", summary)
    print(json.dumps(summary, sort_keys=True))


def cmd_centroids_eval(args):
    cs = load_centroids(args.centroids)
    if args.out:
        _report_centroids(cs, _prefix(args.out))
    else:
        summary = uniformity_summary(cs)
        summary["fingerprint"] = cs.fingerprint
        print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_dwt(args):
    img = read_pgm(args.image)
    pyr = dwt2(img, args.levels)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for name, level, band in pyr.subbands():
        lo, hi = float(band.min()), float(band.max())
        scaled = (band - lo) / (hi - lo) if hi > lo else np.zeros_like(band)
        write_pgm(scaled, os.path.join(args.out, f"{name}{level}.pgm"))
        for (r, c), value in np.ndenumerate(band):
            rows.append({"subband": name, "level": level, "row": r, "col": c, "value": float(value)})
    write_csv(
        os.path.join(args.out, "coefficients.csv"),
        rows,
        ["subband", "level", "row", "col", "value"],
        version_tag="csae-dwt v1",
    )
    return 0


def cmd_train(args):
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.epochs is not None:
        cfg = cfg.with_epochs(args.epochs)
    if args.beta is not None:
        cfg = TrainConfig.from_dict({**cfg.to_dict(), "beta": args.beta})
    spec = _data_spec(args)
    train_ds, test_ds = _load_data(spec)
    centroids = load_centroids(args.centroids)
    if train_ds.n_classes != centroids.n:
        raise RuntimeError(
            f"dataset has {train_ds.n_classes} classes but {args.centroids} holds {centroids.n} centroids"
        )
    net, metrics = train(cfg, train_ds, centroids, test=test_ds)
    save_checkpoint(args.out, net, cfg, centroids, cfg.optimizer.epochs, extra={"data": spec})
    prefix = _prefix(args.out)
    write_csv(prefix + ".metrics.csv", metrics.rows(), METRICS_COLUMNS, version_tag=METRICS_VERSION)
    stats = fit_class_stats(encode(net, train_ds.flat()), train_ds.labels, train_ds.n_classes)
    save_class_stats(prefix + ".stats", stats, meta={"checkpoint_fingerprint": centroids.fingerprint})
    last = metrics.epochs[-1] if metrics.epochs else None
    if last is not None:
        print(json.dumps(last.row(), sort_keys=True))
    return 0


def cmd_evaluate(args):
    net, cfg, centroids, meta = load_checkpoint(args.ckpt)
    train_ds, test_ds = _checkpoint_data(args, meta)
    ds = test_ds if (args.split == "test" and test_ds is not None) else train_ds
    res = evaluate(net, ds, centroids)
    row = {"split": ds.split, "n": res.n, "accuracy": res.accuracy, "mse": res.mse, "beta": cfg.beta}
    if args.out:
        write_csv(args.out, [row], ["split", "n", "accuracy", "mse", "beta"], version_tag="csae-evaluate v1")
    print(json.dumps(row, sort_keys=True))
    return 0


def cmd_reconstruct(args):
    net, _, centroids, meta = load_checkpoint(args.ckpt)
    train_ds, test_ds = _checkpoint_data(args, meta)
    ds = test_ds if (args.split == "test" and test_ds is not None) else train_ds
    count = min(args.count, len(ds))
    os.makedirs(args.out, exist_ok=True)
    x = ds.flat()[:count]
    recon = decode(net, encode(net, x)).reshape(-1, ds.side, ds.side) if count else []
    rows = []
    for i in range(count):
        write_pgm(ds.images[i], os.path.join(args.out, f"input_{i:04d}.pgm"))
        write_pgm(recon[i], os.path.join(args.out, f"recon_{i:04d}.pgm"))
        rows.append({"index": i, "label": int(ds.labels[i]), "mse": float(np.mean((recon[i] - ds.images[i]) ** 2))})
    write_csv(os.path.join(args.out, "reconstruct.csv"), rows, ["index", "label", "mse"], version_tag="csae-reconstruct v1")
    return 0


def cmd_sample(args):
    net, cfg, centroids, meta = load_checkpoint(args.ckpt)
    if not 0 <= args.class_index < centroids.n:
        raise UsageError(f"class index {args.class_index} out of range; valid classes are 0..{centroids.n - 1}")
    stats_path = _prefix(args.ckpt) + ".stats"
    if os.path.exists(stats_path) and not getattr(args, "data", None):
        stats, _ = load_class_stats(stats_path)
    else:
        train_ds, _ = _checkpoint_data(args, meta)
        stats = fit_class_stats(encode(net, train_ds.flat()), train_ds.labels, train_ds.n_classes)
    os.makedirs(args.out, exist_ok=True)
    z = sample_latent(stats, args.class_index, args.count, seed=args.seed)
    rows = []
    if args.count:
        side = int(round(np.sqrt(net.output_dim)))
        images = decode(net, z).reshape(-1, side, side)
        pred = nearest_class_mean(z, centroids)
        for i, img in enumerate(images):
            write_pgm(img, os.path.join(args.out, f"sample_{i:04d}.pgm"))
            rows.append({"index": i, "class": args.class_index, "predicted": int(pred[i]),
                         "consistent": int(pred[i] == args.class_index)})
        write_pgm(_tile(list(images)), os.path.join(args.out, "grid.pgm"))
    write_csv(os.path.join(args.out, "samples.csv"), rows, ["index", "class", "predicted", "consistent"],
              version_tag="csae-samples v1")
    if rows:
        print(json.dumps({"consistency": float(np.mean([r["consistent"] for r in rows]))}))
    return 0


def cmd_classify(args):
    net, _, centroids, meta = load_checkpoint(args.ckpt)
    rows = []
    if args.images:
        for i, path in enumerate(args.images):
            img = read_pgm(path)
            pred = nearest_class_mean(encode(net, img.reshape(1, -1))[0], centroids)
            rows.append({"index": i, "source": path, "label": "", "predicted": int(pred)})
    else:
        train_ds, test_ds = _checkpoint_data(args, meta)
        ds = test_ds if (args.split == "test" and test_ds is not None) else train_ds
        pred = nearest_class_mean(encode(net, ds.flat()), centroids)
        rows = [{"index": i, "source": ds.split, "label": int(ds.labels[i]), "predicted": int(p)}
                for i, p in enumerate(pred)]
    cols = ["index", "source", "label", "predicted"]
    if args.out:
        write_csv(args.out, rows, cols, version_tag="csae-classify v1")
    else:
        for r in rows:
            print(",".join(str(r[c]) for c in cols))
    return 0


# --- parser -----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="csae", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="numba worker threads (default 1)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("centroids-generate", help="generate predefined class centroids")
    g.add_argument("--classes", type=int, required=True)
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--iters", type=int, default=500)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lambda", dest="lam", type=float, default=0.01)
    g.add_argument("--epsilon", type=float, default=0.01)
    g.add_argument("--damping", type=float, default=0.9)
    g.add_argument("--tol", type=float, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_centroids_generate)

    e = sub.add_parser("centroids-eval", help="uniformity report for a centroid file")
    e.add_argument("--centroids", required=True)
    e.add_argument("--out", default=None, help="prefix for distance/coordinate/summary files")
    e.set_defaults(func=cmd_centroids_eval)

    w = sub.add_parser("dwt", help="Haar decomposition of a PGM image")
    w.add_argument("--image", required=True)
    w.add_argument("--levels", type=int, default=2)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_dwt)

    t = sub.add_parser("train", help="train an autoencoder against a centroid file")
    t.add_argument("--config", default=None)
    t.add_argument("--centroids", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=None, help="override [optimizer] epochs")
    t.add_argument("--beta", type=float, default=None, help="override [train] beta")
    _add_data_flags(t)
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "accuracy and reconstruction MSE"),
        ("reconstruct", cmd_reconstruct, "write input/reconstruction PGM pairs"),
        ("classify", cmd_classify, "nearest-centroid labels"),
    ):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--ckpt", required=True)
        c.add_argument("--split", choices=("train", "test"), default="test")
        c.add_argument("--out", required=(name == "reconstruct"), default=None)
        _add_data_flags(c, required=False)
        if name == "reconstruct":
            c.add_argument("--count", type=int, default=10)
        if name == "classify":
            c.add_argument("--images", nargs="*", default=None, help="PGM files to classify")
        c.set_defaults(func=func)

    s = sub.add_parser("sample", help="class-conditional generation")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--class", dest="class_index", type=int, required=True)
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    _add_data_flags(s, required=False)
    s.set_defaults(func=cmd_sample)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _accel.set_threads(args.threads)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"csae {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"csae {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
