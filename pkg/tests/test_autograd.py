import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fbsde_pricing.autograd import Tensor, compute_gradients, dense, matmul, parameter, where
from fbsde_pricing.errors import UnsupportedPrimitive


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        saved = x[idx]
        x[idx] = saved + eps
        up = f()
        x[idx] = saved - eps
        down = f()
        x[idx] = saved
        g[idx] = (up - down) / (2 * eps)
    return g


def test_square_gradient():
    theta = parameter(3.0)
    (g,) = compute_gradients(theta * theta, [theta])
    assert g == 6.0


def test_least_squares_gradient():
    x, y = np.array([1.0, 2.0]), np.array([0.5, 3.0])
    theta = parameter(1.5)
    loss = (theta * x - y).square().mean()
    (g,) = compute_gradients(loss, [theta])
    assert g == pytest.approx(np.mean(2 * (1.5 * x - y) * x), rel=1e-14)


def test_unused_parameter_gets_zeros():
    a, b = parameter(np.ones(3)), parameter(np.ones(2))
    ga, gb = compute_gradients(a.sum(), [a, b])
    np.testing.assert_array_equal(ga, 1)
    np.testing.assert_array_equal(gb, 0)


def test_unsupported_primitive():
    with pytest.raises(UnsupportedPrimitive):
        np.exp(parameter(np.ones(2)))


def test_where_routes_gradient():
    a, b = parameter(np.array([1.0, 2.0, 3.0])), parameter(np.array([4.0, 5.0, 6.0]))
    mask = np.array([True, False, True])
    ga, gb = compute_gradients((where(mask, a, b) * 2.0).sum(), [a, b])
    np.testing.assert_array_equal(ga, [2, 0, 2])
    np.testing.assert_array_equal(gb, [0, 2, 0])


def test_shared_node_accumulates():
    a = parameter(np.array([0.3, -0.7]))
    h = a.tanh()
    (g,) = compute_gradients((h * h + h).sum(), [a])
    t = np.tanh(a.data)
    np.testing.assert_allclose(g, (2 * t + 1) * (1 - t * t), rtol=1e-14)


finite = st.floats(-2, 2)


@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, (4, 2), elements=finite),
       arrays(np.float64, (2,), elements=finite))
def test_composite_matches_finite_difference(xv, wv, bv):
    w, b = parameter(wv.copy()), parameter(bv.copy())

    def loss():
        h = (matmul(Tensor(xv), w) + b).tanh()
        # tanh output lies in (-1, 1): one relu always passes, the other never does
        return ((h - 0.5) / 1.7).square().mean() - ((h + 1.5).relu() * 0.3).sum() + (h - 1.5).relu().sum()

    grads = compute_gradients(loss(), [w, b])
    for p, g in zip([w, b], grads):
        fd = numeric_grad(lambda: float(loss().data), p.data)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("activation", ["tanh", "relu", None])
def test_dense_matches_finite_difference(activation):
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 2, 5))
    w = parameter(rng.normal(size=(3, 4, 2)))
    b = parameter(rng.normal(size=(3, 4, 1)))
    xt = parameter(x.copy())

    def loss():
        return (dense(xt, w, b, activation) * np.arange(5.0)).sum()

    grads = compute_gradients(loss(), [w, b, xt])
    for p, g in zip([w, b, xt], grads):
        fd = numeric_grad(lambda: float(loss().data), p.data)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)


def test_dense_matches_unfused():
    rng = np.random.default_rng(5)
    x, w, b = rng.normal(size=(2, 3, 7)), rng.normal(size=(2, 4, 3)), rng.normal(size=(2, 4, 1))
    out = dense(Tensor(x), Tensor(w), Tensor(b), "tanh").data
    np.testing.assert_allclose(out, np.tanh(w @ x + b), rtol=1e-14)


def test_float32_gradients_keep_dtype():
    p = parameter(np.ones(3, dtype=np.float32))
    (g,) = compute_gradients((p * 2.0).sum(), [p])
    assert g.dtype == np.float32
