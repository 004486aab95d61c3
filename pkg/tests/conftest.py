import numpy as np
import pytest

from csae.data import make_synthetic, subset
from csae.pedcc import PedccConfig, generate


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


@pytest.fixture(scope="session")
def synthetic3():
    """The desk-scale corpus: 3 classes, 16x16, 100 train + 50 test per class."""
    return make_synthetic(3, 100, side=16, noise_sd=0.1, seed=0, test_per_class=50)


@pytest.fixture(scope="session")
def heldout_class():
    """Test images of the first template not used by ``synthetic3``."""
    _, test = make_synthetic(4, 0, side=16, noise_sd=0.1, seed=0, test_per_class=50)
    return subset(test, [3])


@pytest.fixture(scope="session")
def centroids3():
    return generate(PedccConfig(n=3, d=8, q=500, seed=0))
