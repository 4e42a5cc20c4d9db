"""
Linear Predictor Module

Linear cost model c_hat = W x + b with hand-written backpropagation,
momentum SGD and the l1/l2 prediction regularizers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

try:
    from .errors import DimensionMismatchError
    from .import_utils import get_setting
except ImportError:
    from src.errors import DimensionMismatchError
    from src.import_utils import get_setting


@dataclass
class LinearPredictor:
    """weight: d x p, bias: d."""
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.weight.ndim != 2 or self.weight.shape[0] != self.bias.shape[0]:
            raise DimensionMismatchError("weight must be d x p and bias length d")

    @classmethod
    def initialize(cls, num_feat: int, num_cost: int, rng: np.random.Generator) -> "LinearPredictor":
        """Fan-in uniform weights, zero bias."""
        bound = 1.0 / np.sqrt(num_feat)
        return cls(rng.uniform(-bound, bound, size=(num_cost, num_feat)), np.zeros(num_cost))

    @classmethod
    def zeros(cls, num_feat: int, num_cost: int) -> "LinearPredictor":
        return cls(np.zeros((num_cost, num_feat)), np.zeros(num_cost))

    @property
    def num_feat(self) -> int:
        return self.weight.shape[1]

    @property
    def num_cost(self) -> int:
        return self.weight.shape[0]

    def copy(self) -> "LinearPredictor":
        return LinearPredictor(self.weight.copy(), self.bias.copy())


@dataclass
class ParameterGrads:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class RegularizationConfig:
    l1: float = 0.0
    l2: float = 0.0

    def __post_init__(self):
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("regularization weights must be nonnegative")

    @property
    def active(self) -> bool:
        return self.l1 > 0 or self.l2 > 0


@dataclass
class SgdState:
    lr: float = field(default_factory=lambda: float(get_setting("DEFAULT_LR", 0.01)))
    momentum: float = field(default_factory=lambda: float(get_setting("DEFAULT_MOMENTUM", 0.9)))
    batch_size: int = field(default_factory=lambda: int(get_setting("DEFAULT_BATCH_SIZE", 32)))
    velocity_weight: Optional[np.ndarray] = None
    velocity_bias: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")


def predict(model: LinearPredictor, x) -> np.ndarray:
    """Predicted costs for one feature vector (d) or a batch (n x d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.num_feat:
        raise DimensionMismatchError(f"features have length {x.shape[-1]}, model expects {model.num_feat}")
    return x @ model.weight.T + model.bias


def backprop(model: LinearPredictor, x, grad_c) -> ParameterGrads:
    """
    Parameter gradients from dl/dc_hat; batches are summed.

    dl/dW = grad_c (outer) x,  dl/db = grad_c
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    g = np.atleast_2d(np.asarray(grad_c, dtype=np.float64))
    if g.shape[1] != model.num_cost or x.shape[1] != model.num_feat or g.shape[0] != x.shape[0]:
        raise DimensionMismatchError("gradient/feature shapes do not match the model")
    return ParameterGrads(weight=g.T @ x, bias=g.sum(axis=0))


def regularization_penalty(cost_pred, cost_true, cfg: RegularizationConfig) -> Tuple[float, np.ndarray]:
    """
    phi1 * |c_hat - c|_1 / d + phi2 * |c_hat - c|_2^2 / (2d) and its gradient.

    Batches return the summed value and per-row gradients.
    """
    diff = np.asarray(cost_pred, dtype=np.float64) - np.asarray(cost_true, dtype=np.float64)
    d = diff.shape[-1]
    value = cfg.l1 * np.abs(diff).sum() / d + cfg.l2 * (diff ** 2).sum() / (2.0 * d)
    grad = cfg.l1 * np.sign(diff) / d + cfg.l2 * diff / d
    return float(value), grad


def sgd_step(model: LinearPredictor, grads: ParameterGrads, state: SgdState) -> LinearPredictor:
    """v <- mu v + g; theta <- theta - lr v. Updates model and state in place."""
    if grads.weight.shape != model.weight.shape or grads.bias.shape != model.bias.shape:
        raise DimensionMismatchError("gradient shapes do not match the model")
    if state.velocity_weight is None:
        state.velocity_weight = np.zeros_like(model.weight)
        state.velocity_bias = np.zeros_like(model.bias)
    state.velocity_weight = state.momentum * state.velocity_weight + grads.weight
    state.velocity_bias = state.momentum * state.velocity_bias + grads.bias
    model.weight = model.weight - state.lr * state.velocity_weight
    model.bias = model.bias - state.lr * state.velocity_bias
    return model
