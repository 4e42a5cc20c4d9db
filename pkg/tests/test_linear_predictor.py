"""
Tests for the linear cost model, its backpropagation and SGD.
"""

import numpy as np
import pytest

from src.errors import DimensionMismatchError
from src.linear_predictor import (
    LinearPredictor,
    ParameterGrads,
    RegularizationConfig,
    SgdState,
    backprop,
    predict,
    regularization_penalty,
    sgd_step,
)


def test_zero_model_predicts_zero():
    model = LinearPredictor.zeros(3, 4)
    assert predict(model, [1.0, 2.0, 3.0]).tolist() == [0.0] * 4


def test_identity_model():
    model = LinearPredictor(np.eye(2), np.zeros(2))
    assert predict(model, [1.0, 2.0]).tolist() == [1.0, 2.0]


def test_matches_naive_product(rng):
    model = LinearPredictor.initialize(5, 7, rng)
    X = rng.normal(size=(4, 5))
    naive = np.array([[sum(model.weight[j, k] * x[k] for k in range(5)) + model.bias[j] for j in range(7)] for x in X])
    assert predict(model, X) == pytest.approx(naive, abs=1e-12)


def test_initialize_ranges(rng):
    model = LinearPredictor.initialize(4, 10, rng)
    assert model.weight.shape == (10, 4)
    assert np.all(np.abs(model.weight) <= 0.5)
    assert model.bias.tolist() == [0.0] * 10


def test_feature_length_checked():
    with pytest.raises(DimensionMismatchError):
        predict(LinearPredictor.zeros(3, 2), [1.0, 2.0])
    with pytest.raises(DimensionMismatchError):
        LinearPredictor(np.ones((2, 3)), np.ones(3))


def test_scalar_chain_rule():
    grads = backprop(LinearPredictor.zeros(1, 1), [2.0], [3.0])
    assert grads.weight.tolist() == [[6.0]]
    assert grads.bias.tolist() == [3.0]


def test_zero_incoming_gradient(rng):
    model = LinearPredictor.initialize(3, 2, rng)
    grads = backprop(model, rng.normal(size=(5, 3)), np.zeros((5, 2)))
    assert not grads.weight.any() and not grads.bias.any()


def test_backprop_matches_finite_differences(rng):
    """Smooth test loss l(c) = sum(a * c^2 + sin(c))."""
    model = LinearPredictor.initialize(4, 3, rng)
    X = rng.normal(size=(6, 4))
    a = rng.uniform(0.5, 2.0, size=3)

    def loss(m):
        c = predict(m, X)
        return float(np.sum(a * c ** 2 + np.sin(c)))

    c = predict(model, X)
    grads = backprop(model, X, 2 * a * c + np.cos(c))

    h = 1e-6
    for j in range(3):
        for k in range(4):
            plus, minus = model.copy(), model.copy()
            plus.weight[j, k] += h
            minus.weight[j, k] -= h
            numeric = (loss(plus) - loss(minus)) / (2 * h)
            assert grads.weight[j, k] == pytest.approx(numeric, rel=1e-5, abs=1e-7)
        plus, minus = model.copy(), model.copy()
        plus.bias[j] += h
        minus.bias[j] -= h
        assert grads.bias[j] == pytest.approx((loss(plus) - loss(minus)) / (2 * h), rel=1e-5, abs=1e-7)


class TestRegularization:

    def test_zero_at_truth(self):
        value, grad = regularization_penalty([1.0, 2.0], [1.0, 2.0], RegularizationConfig(l1=1.0, l2=1.0))
        assert value == 0.0
        assert grad.tolist() == [0.0, 0.0]

    def test_l1(self):
        value, grad = regularization_penalty([2.0, -2.0], [0.0, 0.0], RegularizationConfig(l1=1.0))
        assert value == pytest.approx(2.0)
        assert grad.tolist() == [0.5, -0.5]

    def test_l2(self):
        value, grad = regularization_penalty([2.0, 0.0], [0.0, 0.0], RegularizationConfig(l2=1.0))
        assert value == pytest.approx(1.0)
        assert grad.tolist() == [1.0, 0.0]

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            RegularizationConfig(l1=-0.1)
        assert not RegularizationConfig().active


class TestSgd:

    def test_zero_gradient_keeps_parameters(self, rng):
        model = LinearPredictor.initialize(2, 2, rng)
        before = model.copy()
        sgd_step(model, ParameterGrads(np.zeros((2, 2)), np.zeros(2)), SgdState(lr=0.1, momentum=0.9))
        assert model.weight.tolist() == before.weight.tolist()

    def test_plain_descent_without_momentum(self):
        model = LinearPredictor(np.array([[1.0]]), np.array([0.0]))
        sgd_step(model, ParameterGrads(np.array([[2.0]]), np.array([1.0])), SgdState(lr=0.1, momentum=0.0))
        assert model.weight[0, 0] == pytest.approx(0.8)
        assert model.bias[0] == pytest.approx(-0.1)

    def test_two_momentum_steps(self):
        model = LinearPredictor(np.array([[1.0]]), np.array([0.0]))
        state = SgdState(lr=0.1, momentum=0.9)
        g = ParameterGrads(np.array([[1.0]]), np.array([0.0]))
        sgd_step(model, g, state)  # v = 1,   w = 0.9
        sgd_step(model, g, state)  # v = 1.9, w = 0.71
        assert state.velocity_weight[0, 0] == pytest.approx(1.9)
        assert model.weight[0, 0] == pytest.approx(0.71)

    @pytest.mark.parametrize("kwargs", [{"lr": 0.0}, {"momentum": 1.0}, {"batch_size": 0}])
    def test_state_validation(self, kwargs):
        with pytest.raises(ValueError):
            SgdState(**kwargs)
