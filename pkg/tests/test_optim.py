from __future__ import annotations

import math

import numpy as np
import pytest

from mdanlab.errors import InputError, NumericError
from mdanlab.nn.mlp import Layer, MlpParams, init_mlp
from mdanlab.nn.optim import AdamState, opt_step


def _scalar(w: float, b: float = 0.0) -> MlpParams:
    return MlpParams(layers=(Layer(weight=np.array([[w]]), bias=np.array([b]), activation="identity"),))


def test_zero_gradient_is_fixed_point_and_moments_decay():
    params = init_mlp([3, 2], seed=0)
    state = AdamState(m=params.map(np.ones_like), v=params.map(np.ones_like), step=0)
    _, new_state = opt_step(params, params.zeros_like(), state)
    np.testing.assert_allclose(new_state.m.flat(), 0.9)
    np.testing.assert_allclose(new_state.v.flat(), 0.999)
    assert new_state.step == 1

    fresh = AdamState.for_params(params)
    unchanged, _ = opt_step(params, params.zeros_like(), fresh)
    np.testing.assert_array_equal(unchanged.flat(), params.flat())


def test_constant_gradient_update_converges_to_lr():
    params = _scalar(1.0)
    grads = _scalar(0.3, 0.3)
    state = AdamState.for_params(params, lr=0.01)
    for _ in range(1000):
        before = params.flat().copy()
        params, state = opt_step(params, grads, state)
    step = np.abs(params.flat() - before)
    np.testing.assert_allclose(step, 0.01, rtol=1e-6)
    assert state.step == 1000


def test_ten_step_trace_matches_scalar_oracle():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    gs = [0.5, -0.2, 0.1, 0.8, -1.0, 0.05, 0.3, -0.4, 0.0, 0.7]
    params = _scalar(0.25)
    state = AdamState.for_params(params, lr=lr, beta1=b1, beta2=b2, eps=eps)

    p, m, v = 0.25, 0.0, 0.0
    for t, g in enumerate(gs, start=1):
        params, state = opt_step(params, _scalar(g), state)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        assert params.layers[0].weight[0, 0] == pytest.approx(p, abs=1e-12)


def test_non_finite_gradient_reports_layer():
    params = init_mlp([2, 3, 2], seed=1)
    grads = params.zeros_like()
    bad = grads.layers[1].weight.copy()
    bad[0, 0] = np.nan
    grads = MlpParams(layers=(grads.layers[0], Layer(weight=bad, bias=grads.layers[1].bias, activation="identity")))
    with pytest.raises(NumericError) as info:
        opt_step(params, grads, AdamState.for_params(params))
    assert info.value.layer == 1


def test_invalid_hyperparameters():
    params = init_mlp([2, 2], seed=0)
    with pytest.raises(InputError):
        AdamState.for_params(params, lr=0.0)
    with pytest.raises(InputError):
        AdamState.for_params(params, beta1=1.0)


def test_params_stay_finite_after_steps():
    params = init_mlp([4, 8, 3], seed=9)
    state = AdamState.for_params(params)
    rng = np.random.default_rng(0)
    for _ in range(20):
        grads = params.map(lambda a: rng.normal(scale=1e3, size=a.shape))
        params, state = opt_step(params, grads, state)
        assert params.is_finite()
