"""
Unit tests for the learning-rate schedule and the Adam step.

Run with: pytest tests/unit_tests/test_optimizer.py -v
"""

import numpy as np
import pytest

from wavepinn.errors import NumericError, ShapeError
from wavepinn.schemas import TrainConfig
from wavepinn.services.optimizer import OptimizerState, adam_step, lr_at


def test_staircase_schedule():
    config = TrainConfig()
    assert lr_at(config, 0) == 0.01
    assert lr_at(config, 99) == 0.01
    assert lr_at(config, 100) == pytest.approx(0.00965, rel=1e-12)
    assert lr_at(config, 199) == lr_at(config, 100)
    assert lr_at(config, 30000) == pytest.approx(2.28e-7, rel=1e-2)


def test_continuous_schedule():
    config = TrainConfig(lr_schedule="continuous")
    assert lr_at(config, 50) == pytest.approx(0.01 * 0.965 ** 0.5, rel=1e-12)
    assert lr_at(config, 100) == pytest.approx(0.00965, rel=1e-12)


def test_negative_epoch_rejected():
    with pytest.raises(ValueError):
        lr_at(TrainConfig(), -1)


def test_zero_gradient_keeps_parameters():
    params = np.array([1.0, -2.0, 3.0])
    new_params, state = adam_step(OptimizerState.fresh(3), params, np.zeros(3), lr=0.01)
    assert np.array_equal(new_params, params)
    assert state.step == 1


def test_first_step_moves_by_learning_rate():
    params = np.array([0.0, 0.0])
    new_params, _ = adam_step(OptimizerState.fresh(2), params, np.array([0.5, -3.0]), lr=0.01)
    assert new_params == pytest.approx([-0.01, 0.01], rel=1e-6)


def test_step_does_not_mutate_inputs():
    state = OptimizerState.fresh(2)
    params = np.array([1.0, 2.0])
    adam_step(state, params, np.array([1.0, 1.0]), lr=0.1)
    assert state.step == 0
    assert np.all(state.m == 0)
    assert np.array_equal(params, [1.0, 2.0])


def test_non_finite_gradient_rejected():
    state = OptimizerState.fresh(2)
    with pytest.raises(NumericError):
        adam_step(state, np.zeros(2), np.array([np.nan, 1.0]), lr=0.1)
    assert state.step == 0


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeError):
        adam_step(OptimizerState.fresh(2), np.zeros(3), np.zeros(3), lr=0.1)


def test_identical_sequences_identical_results():
    rng = np.random.default_rng(0)
    grads = rng.standard_normal((5, 4))

    def run():
        params, state = np.ones(4), OptimizerState.fresh(4)
        for g in grads:
            params, state = adam_step(state, params, g, lr=0.01)
        return params, state

    (p1, s1), (p2, s2) = run(), run()
    assert np.array_equal(p1, p2)
    assert np.array_equal(s1.v, s2.v)
