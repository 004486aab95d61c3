import numpy as np

from csae.rng import make_rng, permutation, spawn, standard_normal


def test_standard_normal_is_reproducible():
    a = standard_normal(make_rng(7), (4, 5))
    b = standard_normal(make_rng(7), (4, 5))
    assert a.shape == (4, 5)
    assert np.array_equal(a, b)


def test_standard_normal_moments():
    g = standard_normal(make_rng(1), 200_001)
    assert abs(g.mean()) < 0.01
    assert abs(g.std() - 1.0) < 0.01


def test_empty_draw():
    assert standard_normal(make_rng(0), (0, 3)).shape == (0, 3)


def test_permutation_is_a_permutation_and_seeded():
    p = permutation(make_rng(3), 50)
    assert sorted(p.tolist()) == list(range(50))
    assert np.array_equal(p, permutation(make_rng(3), 50))
    assert not np.array_equal(p, np.arange(50))


def test_spawn_streams_differ():
    a, b = spawn(0, 2)
    assert not np.array_equal(a.random(4), b.random(4))
