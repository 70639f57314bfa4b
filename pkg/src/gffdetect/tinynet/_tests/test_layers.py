import numpy as np
from numpy.testing import assert_allclose
import pytest

from gffdetect.tinynet import layers

from .reference import conv2d_reference, conv1d_reference, sigmoid_reference


def numeric_grad(f, x, h=1e-6):
    """Central differences of the scalar ``f()`` with respect to ``x``, in place."""
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + h
        plus = f()
        x[index] = original - h
        minus = f()
        x[index] = original
        grad[index] = (plus - minus) / (2 * h)
    return grad


@pytest.mark.parametrize("k", [1, 2, 3, 4, 6, 8])
def test_conv2d_matches_loops(k):
    rng = np.random.default_rng(k)
    x = rng.normal(size=(8, 5))
    w = rng.normal(size=(3, k, k))
    b = rng.normal(size=3)
    out, _ = layers.conv2d_same_forward(x, w, b)
    assert out.shape == (3, 8, 5)
    assert_allclose(out, conv2d_reference(x.tolist(), w.tolist(), b.tolist()), atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_conv1d_matches_loops(k):
    rng = np.random.default_rng(10 + k)
    x = rng.normal(size=(4, 9))
    w = rng.normal(size=(2, 4, k))
    b = rng.normal(size=2)
    out, _ = layers.conv1d_same_forward(x, w, b)
    assert out.shape == (2, 9)
    assert_allclose(out, conv1d_reference(x.tolist(), w.tolist(), b.tolist()), atol=1e-12)


def test_kernel_longer_than_input():
    x = np.ones((2, 3))
    w = np.ones((1, 8, 8))
    out, _ = layers.conv2d_same_forward(x, w, np.zeros(1))
    assert out.shape == (1, 2, 3)
    assert_allclose(out, 6.0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_conv2d_backward(k):
    rng = np.random.default_rng(k)
    x = rng.normal(size=(6, 4))
    w = rng.normal(size=(2, k, k))
    b = rng.normal(size=2)
    dout = rng.normal(size=(2, 6, 4))

    def f():
        return float((layers.conv2d_same_forward(x, w, b)[0] * dout).sum())

    _, cache = layers.conv2d_same_forward(x, w, b)
    dw, db = layers.conv2d_same_backward(dout, cache)
    assert_allclose(dw, numeric_grad(f, w), rtol=1e-6, atol=1e-8)
    assert_allclose(db, numeric_grad(f, b), rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_conv1d_backward(k):
    rng = np.random.default_rng(k)
    x = rng.normal(size=(3, 7))
    w = rng.normal(size=(2, 3, k))
    b = rng.normal(size=2)
    dout = rng.normal(size=(2, 7))

    def f():
        return float((layers.conv1d_same_forward(x, w, b)[0] * dout).sum())

    _, cache = layers.conv1d_same_forward(x, w, b)
    dx, dw, db = layers.conv1d_same_backward(dout, cache)
    assert_allclose(dx, numeric_grad(f, x), rtol=1e-6, atol=1e-8)
    assert_allclose(dw, numeric_grad(f, w), rtol=1e-6, atol=1e-8)
    assert_allclose(db, numeric_grad(f, b), rtol=1e-6, atol=1e-8)


def test_dense_backward():
    rng = np.random.default_rng(0)
    x = rng.normal(size=5)
    w = rng.normal(size=(3, 5))
    b = rng.normal(size=3)
    dout = rng.normal(size=3)

    def f():
        return float(layers.dense_forward(x, w, b)[0] @ dout)

    _, cache = layers.dense_forward(x, w, b)
    dx, dw, db = layers.dense_backward(dout, cache)
    assert_allclose(dx, numeric_grad(f, x), rtol=1e-6, atol=1e-8)
    assert_allclose(dw, numeric_grad(f, w), rtol=1e-6, atol=1e-8)
    assert_allclose(db, numeric_grad(f, b), rtol=1e-6, atol=1e-8)


def test_relu():
    out, cache = layers.relu_forward(np.array([-1.0, 0.0, 2.0]))
    assert out.tolist() == [0.0, 0.0, 2.0]
    assert layers.relu_backward(np.ones(3), cache).tolist() == [0.0, 0.0, 1.0]


def test_max_pool_first_index_wins():
    x = np.array([[1.0, 3.0, 3.0], [2.0, 0.0, -1.0]])
    out, cache = layers.pool_forward(x, 1, "max")
    assert out.tolist() == [3.0, 2.0]
    dx = layers.pool_backward(np.array([10.0, 20.0]), cache)
    assert dx.tolist() == [[0.0, 10.0, 0.0], [20.0, 0.0, 0.0]]


def test_avg_pool():
    x = np.arange(6.0).reshape(2, 3)
    out, cache = layers.pool_forward(x, 0, "avg")
    assert out.tolist() == [1.5, 2.5, 3.5]
    dx = layers.pool_backward(np.array([2.0, 4.0, 6.0]), cache)
    assert dx.tolist() == [[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]


def test_unknown_pool():
    with pytest.raises(ValueError):
        layers.pool_forward(np.ones(3), 0, "median")


@pytest.mark.parametrize("z", [-30.0, -2.0, 0.0, 0.5, 30.0])
def test_sigmoid(z):
    assert float(layers.sigmoid(z)) == pytest.approx(sigmoid_reference(z), rel=1e-12)


def test_sigmoid_is_clipped():
    assert float(layers.sigmoid(-800.0)) == layers.SIGMOID_EPS
    assert float(layers.sigmoid(800.0)) == 1.0 - layers.SIGMOID_EPS
    assert np.all(np.isfinite(layers.sigmoid(np.array([-1e308, 1e308]))))
