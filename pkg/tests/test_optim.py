import numpy as np
import pytest
from hypothesis import given, strategies as st

from noisy_saliency.optim import OptimizerState, poly_decay, sgd_momentum_step
from noisy_saliency.tensor import Tensor


def _one(theta=1.0):
    p = [Tensor(np.array([theta]), requires_grad=True)]
    return p, OptimizerState.for_params(p)


def test_zero_gradient_is_noop():
    p, s = _one()
    sgd_momentum_step(p, [np.zeros(1)], s, 0.1, 0.9)
    assert p[0].data[0] == 1.0 and s.iteration == 1


def test_two_heavy_ball_steps():
    p, s = _one()
    sgd_momentum_step(p, [np.ones(1)], s, 0.1, 0.9)
    assert s.velocity[0][0] == pytest.approx(0.1, abs=1e-15)
    assert p[0].data[0] == pytest.approx(0.9, abs=1e-15)
    sgd_momentum_step(p, [np.ones(1)], s, 0.1, 0.9)
    assert s.velocity[0][0] == pytest.approx(0.19, abs=1e-15)
    assert p[0].data[0] == pytest.approx(0.71, abs=1e-15)
    assert s.iteration == 2


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(1e-6, 1.0))
def test_zero_momentum_is_plain_descent(theta, g, lr):
    p, s = _one(theta)
    sgd_momentum_step(p, [np.array([g])], s, lr, 0.0)
    assert p[0].data[0] == theta - lr * g


def test_velocity_mirrors_shapes():
    p = [Tensor(np.zeros((2, 3))), Tensor(np.zeros(4))]
    s = OptimizerState.for_params(p)
    assert [v.shape for v in s.velocity] == [(2, 3), (4,)]


@pytest.mark.parametrize("lr,m", [(0.0, 0.9), (-1.0, 0.5), (0.1, 1.0), (0.1, -0.1)])
def test_bad_hyperparameters(lr, m):
    p, s = _one()
    with pytest.raises(ValueError):
        sgd_momentum_step(p, [np.ones(1)], s, lr, m)


def test_shape_mismatch():
    p, s = _one()
    with pytest.raises(ValueError):
        sgd_momentum_step(p, [np.ones(2)], s, 0.1, 0.9)


def test_poly_boundaries():
    assert poly_decay(1e-3, 0, 1000) == 1e-3
    assert poly_decay(1e-3, 1000, 1000) == 0.0


def test_poly_midpoint():
    assert poly_decay(1e-3, 500, 1000, 0.9) == pytest.approx(1e-3 * 0.5 ** 0.9, rel=1e-14)
    assert poly_decay(1e-3, 500, 1000, 0.9) == pytest.approx(5.359e-4, abs=1e-7)


@given(st.integers(0, 99))
def test_poly_monotone(it):
    assert poly_decay(1.0, it + 1, 100) <= poly_decay(1.0, it, 100)


@pytest.mark.parametrize("it,mx,pw", [(11, 10, 0.9), (-1, 10, 0.9), (0, 0, 0.9), (1, 10, 0.0)])
def test_poly_preconditions(it, mx, pw):
    with pytest.raises(ValueError):
        poly_decay(1.0, it, mx, pw)
