"""Numba switch.

Set ``CSAE_NUMBA=0`` in the environment to force the pure-numpy kernels.
The flag is read once, at import time.
"""
import os
import warnings

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("CSAE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if NUMBA_AVAILABLE:
        import numba

        return numba.njit(*args, **kwargs)

    def wrap(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def set_threads(count):
    """Cap numba's worker pool. Kernels are serial, so this only matters for
    user code that calls into numba from the same process."""
    if NUMBA_AVAILABLE and count:
        import numba

        with warnings.catch_warnings():
            # threading-layer probing may complain about an old TBB; irrelevant here
            warnings.simplefilter("ignore", numba.NumbaWarning)
            numba.set_num_threads(max(1, min(int(count), numba.config.NUMBA_NUM_THREADS)))
