"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat 20]

Each kernel is called once before timing so compilation is excluded.
Reports the best-of-N wall time and the max abs difference between flavours.
"""
import argparse
import timeit

import numpy as np

from csae import kernels


def _cases(rng):
    for n, d in ((10, 40), (64, 64), (256, 128)):
        U = rng.standard_normal((n, d))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        yield f"pair_forces n={n} d={d}", kernels.pair_forces_numpy, kernels.pair_forces_numba, (U, 0.01)
    for B, m in ((64, 16), (64, 32), (256, 32)):
        x = rng.random((B, m, m))
        yield f"haar_analysis B={B} m={m}", kernels.haar_analysis_numpy, kernels.haar_analysis_numba, (x,)
        bands = kernels.haar_analysis_numpy(x)
        yield f"haar_synthesis B={B} m={m}", kernels.haar_synthesis_numpy, kernels.haar_synthesis_numba, bands


def _maxdiff(a, b):
    if isinstance(a, tuple):
        return max(_maxdiff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(a - b)))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<28}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}{'max diff':>11}")
    for name, f_np, f_nb, call_args in _cases(rng):
        diff = _maxdiff(f_np(*call_args), f_nb(*call_args))
        t_np = min(timeit.repeat(lambda: f_np(*call_args), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*call_args), number=1, repeat=args.repeat))
        print(f"{name:<28}{1e3 * t_np:>10.3f}{1e3 * t_nb:>10.3f}{t_np / t_nb:>8.1f}x{diff:>11.1e}")


if __name__ == "__main__":
    main()
