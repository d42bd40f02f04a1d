import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interp_bound.exceptions import DimensionError
from interp_bound.regularizers import Regularizer, global_minimizer, reg_eval_grad_hess


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * (1 + abs(x[i]))
        g[i] = (f(x + e) - f(x - e)) / (2 * e[i])
    return g


def test_canonical_quadratic():
    reg = Regularizer.quadratic(3)
    theta = np.array([1.0, -2.0, 0.5])
    v, g, H = reg_eval_grad_hess(reg, theta)
    assert v == pytest.approx(0.5 * theta @ theta)
    np.testing.assert_array_equal(g, theta)
    np.testing.assert_array_equal(H, np.eye(3))


def test_quadratic_at_anchor():
    reg = Regularizer.quadratic(2, anchor=[1.0, 2.0])
    v, g, _ = reg.eval_grad_hess([1.0, 2.0])
    assert v == 0.0 and not g.any()
    np.testing.assert_array_equal(global_minimizer(reg), [1.0, 2.0])
    np.testing.assert_array_equal(global_minimizer(Regularizer.quadratic(2)), [0.0, 0.0])


def test_smooth_power_scalar():
    for scale in (1.0, 2.5):
        reg = Regularizer.smooth_power(1, exponent=4, scale=scale)
        v, g, H = reg.eval_grad_hess([2.0])
        assert v == pytest.approx(4 * scale)
        assert g[0] == pytest.approx(8 * scale)
        assert H[0, 0] == pytest.approx(12 * scale)
        np.testing.assert_array_equal(reg.global_minimizer(), [0.0])


def test_invalid_regularizers():
    with pytest.raises(ValueError):
        Regularizer.quadratic(2, weight=np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        Regularizer.quadratic(2, weight=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(DimensionError):
        Regularizer.quadratic(2, anchor=[1.0])
    with pytest.raises(ValueError):
        Regularizer.smooth_power(2, exponent=3)
    with pytest.raises(ValueError):
        Regularizer("l1", 2)
    with pytest.raises(DimensionError):
        Regularizer.quadratic(2).value(np.zeros(3))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6), q=st.sampled_from([4, 6, 8]),
       ridge=st.floats(0, 2))
def test_gradients_and_hessians_match_fd(seed, d, q, ridge):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(d, d))
    regs = [
        Regularizer.quadratic(d, anchor=rng.normal(size=d), weight=M @ M.T + np.eye(d)),
        Regularizer.smooth_power(d, exponent=q, scale=0.7, ridge=ridge),
    ]
    theta = rng.normal(size=d)
    for reg in regs:
        _, g, H = reg.eval_grad_hess(theta)
        np.testing.assert_allclose(g, fd_grad(reg.value, theta), rtol=1e-6, atol=1e-6)
        Hfd = np.stack([fd_grad(lambda t, i=i: reg.grad(t)[i], theta) for i in range(d)])
        np.testing.assert_allclose(H, Hfd, rtol=1e-5, atol=1e-5)
        np.testing.assert_allclose(reg.values(np.stack([theta, 2 * theta])),
                                   [reg.value(theta), reg.value(2 * theta)], rtol=1e-12)
