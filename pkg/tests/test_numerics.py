import numpy as np
import pytest

from fedbench.numerics import Rng, ShapeError, derive_seed, gaussian, matmul


def test_matmul_identity():
    m = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(matmul(np.eye(2), m), m)


def test_matmul_hand_example():
    out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]]))
    assert out.tolist() == [[17.0], [39.0]]


def test_matmul_annihilator():
    out = matmul(np.zeros((1, 3)), np.random.default_rng(0).normal(size=(3, 4)))
    assert out.shape == (1, 4) and not out.any()


def test_matmul_shape_error_names_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(np.zeros((2, 3)), np.zeros((2, 2)))


def test_matmul_associativity():
    g = np.random.default_rng(1)
    for _ in range(20):
        a, b, c = g.normal(size=(4, 5)), g.normal(size=(5, 3)), g.normal(size=(3, 6))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        assert np.allclose(left, right, rtol=1e-9, atol=1e-12)


def test_gaussian_degenerate():
    assert np.array_equal(gaussian(Rng(3), 5, 2.5, 0.0), np.full(5, 2.5))


def test_gaussian_moments():
    x = gaussian(Rng(11), 100_000, 0.0, 1.0)
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0) < 0.03


def test_gaussian_negative_sigma():
    with pytest.raises(ValueError):
        gaussian(Rng(0), 3, 0.0, -0.1)


def test_same_seed_same_draws():
    a = Rng(42).standard_normal(1_000_000)
    b = Rng(42).standard_normal(1_000_000)
    assert np.array_equal(a, b)
    assert np.array_equal(gaussian(Rng(5), 10, 0, 1), gaussian(Rng(5), 10, 0, 1))


def test_child_streams_are_order_insensitive():
    parent = Rng(7)
    a_first = parent.child("client/0").standard_normal(4)
    parent.child("client/1").standard_normal(4)
    again = Rng(7).child("client/0").standard_normal(4)
    assert np.array_equal(a_first, again)
    assert derive_seed(7, "client/0") != derive_seed(7, "client/1")
