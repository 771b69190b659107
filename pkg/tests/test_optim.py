"""Adam optimizer behavior."""

from __future__ import annotations

import numpy as np
import pytest

from cluecluster.errors import InvalidInput, NumericalError
from cluecluster.optim import AdamState, adam_step


def test_zero_gradients_leave_params_unchanged():
    state = AdamState()
    params = {"w": np.array([1.0, -2.0, 3.0])}
    before = params["w"].copy()
    adam_step(state, params, {"w": np.zeros(3)})
    np.testing.assert_array_equal(params["w"], before)
    assert state.step == 1


def test_single_step_matches_hand_computation():
    # fresh state, gradient g: m = (1-b1) g, v = (1-b2) g^2; bias correction
    # makes m_hat = g and v_hat = g^2, so the step is -lr * g / (|g| + eps)
    lr, eps = 1e-3, 1e-8
    state = AdamState(lr=lr, eps=eps)
    g = np.array([0.25, -4.0, 1e-3])
    params = {"w": np.zeros(3)}
    adam_step(state, params, {"w": g.copy()})
    expect = -lr * g / (np.abs(g) + eps)
    np.testing.assert_allclose(params["w"], expect, rtol=1e-12)


def test_constant_gradient_approaches_sign_step():
    state = AdamState(lr=1e-3)
    params = {"w": np.array([0.0, 0.0])}
    g = np.array([0.37, -2.2])
    prev = params["w"].copy()
    for _ in range(500):
        prev = params["w"].copy()
        adam_step(state, params, {"w": g.copy()})
    delta = params["w"] - prev
    np.testing.assert_allclose(delta, -np.sign(g) * 1e-3, rtol=0.02)


def test_nan_gradient_rejected():
    state = AdamState()
    params = {"w": np.zeros(2)}
    with pytest.raises(NumericalError):
        adam_step(state, params, {"w": np.array([1.0, np.nan])})


def test_key_and_shape_mismatch_rejected():
    state = AdamState()
    params = {"w": np.zeros(2)}
    with pytest.raises(InvalidInput):
        adam_step(state, params, {"v": np.zeros(2)})
    with pytest.raises(InvalidInput):
        adam_step(state, params, {"w": np.zeros(3)})


def test_two_parameter_groups_update_independently():
    state = AdamState(lr=0.01)
    params = {"a": np.array([1.0]), "b": np.array([1.0])}
    adam_step(state, params, {"a": np.array([1.0]), "b": np.array([0.0])})
    assert params["a"][0] != 1.0
    assert params["b"][0] == 1.0


def test_learning_rate_change_applies_next_step():
    state = AdamState(lr=1e-3)
    params = {"w": np.array([0.0])}
    g = {"w": np.array([1.0])}
    adam_step(state, params, {k: v.copy() for k, v in g.items()})
    first_move = abs(params["w"][0])
    state.lr = 1e-4
    before = params["w"][0]
    adam_step(state, params, {k: v.copy() for k, v in g.items()})
    second_move = abs(params["w"][0] - before)
    assert second_move < first_move
