"""
Decision Losses Module

Forward/backward pairs that carry decision errors back through an
optimization oracle:

- SPO+          convex surrogate of regret, one solve at 2c_hat - c
- DBB           interpolated finite-difference gradient, one extra solve
- DPO           Monte-Carlo expectation of perturbed solutions
- PFYL          perturbed Fenchel-Young loss
- regret        evaluation only

All functions take a single cost vector (1-D) or a batch (B x d). Internally
every cost is mapped to the minimization convention (s = +1 / -1 by model
sense); returned gradients are with respect to the caller's predicted costs
in the oracle's own sense.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np

try:
    from .errors import DimensionMismatchError
    from .import_utils import get_setting
    from .opt_oracle import OptimizationOracle, solve_min
    from .solve_pool import SolvePool
except ImportError:
    from src.errors import DimensionMismatchError
    from src.import_utils import get_setting
    from src.opt_oracle import OptimizationOracle, solve_min
    from src.solve_pool import SolvePool

logger = logging.getLogger(__name__)

ArrayOrFloat = Union[np.ndarray, float]


class DownstreamLoss(Enum):
    REGRET = "regret"
    HAMMING = "hamming"
    SQUARED_ERROR = "squared_error"


@dataclass
class PerturbationConfig:
    """
    K Gaussian samples of amplitude sigma.

    unscaled_jacobian=True drops the 1/sigma factor from the DPO Jacobian estimate.
    """
    n_samples: int = field(default_factory=lambda: int(get_setting("DEFAULT_N_SAMPLES", 1)))
    sigma: float = field(default_factory=lambda: float(get_setting("DEFAULT_SIGMA", 1.0)))
    unscaled_jacobian: bool = False

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass
class SavedForwardState:
    """What a forward pass keeps for its backward pass (minimization form)."""
    oracle: OptimizationOracle
    cost_pred: np.ndarray
    solution: np.ndarray
    noise: Optional[np.ndarray] = None
    perturbed: Optional[np.ndarray] = None
    sol_true: Optional[np.ndarray] = None
    pool: Optional[SolvePool] = None
    squeeze: bool = False

    @property
    def sign(self) -> float:
        return float(self.oracle.sense.value)


def _as_batch(arr, d: int) -> Tuple[np.ndarray, bool]:
    a = np.asarray(arr, dtype=np.float64)
    squeeze = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] != d:
        raise DimensionMismatchError(f"expected vectors of length {d}, got {a.shape[1]}")
    return a, squeeze


def _as_rows(arr, n: int) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64).reshape(n)


def _out(a: np.ndarray, squeeze: bool) -> ArrayOrFloat:
    if not squeeze:
        return a
    return float(a[0]) if a.ndim == 1 else a[0]


def _solver(oracle: OptimizationOracle, pool: Optional[SolvePool]) -> Callable[[np.ndarray], np.ndarray]:
    """Batch solve for minimization-normalized costs."""
    if pool is not None:
        return pool.solve_many_min
    return lambda costs: np.vstack([solve_min(oracle, c) for c in costs])


# SPO+

def spo_plus_forward(
    cost_pred,
    cost_true,
    sol_true,
    obj_true,
    oracle: OptimizationOracle,
    pool: Optional[SolvePool] = None,
) -> Tuple[ArrayOrFloat, SavedForwardState]:
    """
    SPO+ loss  -min_w (2c_hat - c)^T w + 2 c_hat^T w*(c) - z*(c)  (minimization form).

    Returns:
        (loss per sample, state holding w*(2c_hat - c))
    """
    d = oracle.decision_dim
    s = float(oracle.sense.value)
    cp, squeeze = _as_batch(cost_pred, d)
    c, _ = _as_batch(cost_true, d)
    w, _ = _as_batch(sol_true, d)
    z = _as_rows(obj_true, cp.shape[0]) * s
    cp_n, c_n = cp * s, c * s
    spo_cost = 2.0 * cp_n - c_n
    w_spo = _solver(oracle, pool)(spo_cost)
    loss = -np.einsum("ij,ij->i", spo_cost, w_spo) + 2.0 * np.einsum("ij,ij->i", cp_n, w) - z
    state = SavedForwardState(
        oracle=oracle, cost_pred=cp_n, solution=w_spo, sol_true=w, pool=pool, squeeze=squeeze
    )
    return _out(loss, squeeze), state


def spo_plus_loss(cost_pred, cost_true, sol_true, obj_true, oracle, pool=None) -> ArrayOrFloat:
    loss, _ = spo_plus_forward(cost_pred, cost_true, sol_true, obj_true, oracle, pool)
    return loss


def spo_plus_grad(state: SavedForwardState) -> ArrayOrFloat:
    """Subgradient 2 (w*(c) - w*(2c_hat - c)), mapped back to the oracle's sense."""
    if state.solution is None or state.sol_true is None:
        raise ValueError("spo_plus_grad needs the state of an SPO+ forward pass")
    grad = 2.0 * (state.sol_true - state.solution) * state.sign
    return _out(grad, state.squeeze)


# DBB

def dbb_forward(
    cost_pred,
    oracle: OptimizationOracle,
    pool: Optional[SolvePool] = None,
) -> Tuple[ArrayOrFloat, SavedForwardState]:
    """w*(c_hat), identical to a plain solve, plus the state for dbb_backward."""
    d = oracle.decision_dim
    s = float(oracle.sense.value)
    cp, squeeze = _as_batch(cost_pred, d)
    cp_n = cp * s
    w = _solver(oracle, pool)(cp_n)
    state = SavedForwardState(oracle=oracle, cost_pred=cp_n, solution=w, pool=pool, squeeze=squeeze)
    return _out(w, squeeze), state


def dbb_backward(state: SavedForwardState, incoming_grad, lambd: Optional[float] = None) -> ArrayOrFloat:
    """
    Interpolated gradient (1/lambda)(w*(c_hat + lambda * dl/dw) - w*(c_hat)).

    Args:
        state: From dbb_forward
        incoming_grad: dl/dw, same shape as the forward output
        lambd: Interpolation strength, must be positive
    """
    if lambd is None:
        lambd = float(get_setting("DEFAULT_LAMBDA", 15.0))
    if not lambd > 0:
        raise ValueError("lambda must be positive")
    g, _ = _as_batch(incoming_grad, state.oracle.decision_dim)
    shifted = state.cost_pred + lambd * g
    w_shift = _solver(state.oracle, state.pool)(shifted)
    grad = (w_shift - state.solution) / lambd * state.sign
    return _out(grad, state.squeeze)


# DPO

def _draw_noise(rng: np.random.Generator, batch: int, cfg: PerturbationConfig, d: int) -> np.ndarray:
    # drawn in one block in sample order, so the worker count never changes it
    return rng.standard_normal((batch, cfg.n_samples, d))


def _perturbed_solutions(
    cp_n: np.ndarray, noise: np.ndarray, sigma: float, oracle, pool
) -> np.ndarray:
    batch, k, d = noise.shape
    costs = (cp_n[:, None, :] + sigma * noise).reshape(batch * k, d)
    return _solver(oracle, pool)(costs).reshape(batch, k, d)


def dpo_forward(
    cost_pred,
    cfg: PerturbationConfig,
    oracle: OptimizationOracle,
    rng: np.random.Generator,
    pool: Optional[SolvePool] = None,
) -> Tuple[ArrayOrFloat, SavedForwardState]:
    """(1/K) sum_k w*(c_hat + sigma xi_k); keeps every xi_k and w_k."""
    d = oracle.decision_dim
    s = float(oracle.sense.value)
    cp, squeeze = _as_batch(cost_pred, d)
    cp_n = cp * s
    noise = _draw_noise(rng, cp.shape[0], cfg, d)
    perturbed = _perturbed_solutions(cp_n, noise, cfg.sigma, oracle, pool)
    expectation = perturbed.mean(axis=1)
    state = SavedForwardState(
        oracle=oracle, cost_pred=cp_n, solution=expectation,
        noise=noise, perturbed=perturbed, pool=pool, squeeze=squeeze,
    )
    return _out(expectation, squeeze), state


def dpo_jacobian(state: SavedForwardState, cfg: PerturbationConfig) -> np.ndarray:
    """Per-sample Jacobian estimate (B x d x d) of the expected solution."""
    k = state.noise.shape[1]
    scale = k if cfg.unscaled_jacobian else k * cfg.sigma
    return np.einsum("bki,bkj->bij", state.perturbed, state.noise) / scale


def dpo_backward(state: SavedForwardState, incoming_grad, cfg: PerturbationConfig) -> ArrayOrFloat:
    """Contract the Jacobian estimate with dl/dw; no extra solves."""
    if state.noise is None or state.perturbed is None:
        raise ValueError("dpo_backward needs the state of a DPO forward pass")
    g, _ = _as_batch(incoming_grad, state.oracle.decision_dim)
    k = state.noise.shape[1]
    scale = k if cfg.unscaled_jacobian else k * cfg.sigma
    # sum_k xi_k (w_k . g) / scale, equal to J^T g without forming J
    weights = np.einsum("bkd,bd->bk", state.perturbed, g)
    grad = np.einsum("bk,bkd->bd", weights, state.noise) / scale * state.sign
    return _out(grad, state.squeeze)


# PFYL

def pfyl_loss_and_grad(
    cost_pred,
    sol_true,
    cfg: PerturbationConfig,
    oracle: OptimizationOracle,
    rng: np.random.Generator,
    pool: Optional[SolvePool] = None,
) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """
    Perturbed Fenchel-Young loss and gradient (minimization form).

    loss = c_hat^T w* - (1/K) sum_k (c_hat + sigma xi_k)^T w_k, the constant
    regularizer term is left out, so the loss is defined up to a constant.
    grad = w* - (1/K) sum_k w_k
    """
    d = oracle.decision_dim
    s = float(oracle.sense.value)
    cp, squeeze = _as_batch(cost_pred, d)
    w, _ = _as_batch(sol_true, d)
    cp_n = cp * s
    noise = _draw_noise(rng, cp.shape[0], cfg, d)
    perturbed = _perturbed_solutions(cp_n, noise, cfg.sigma, oracle, pool)
    perturbed_cost = cp_n[:, None, :] + cfg.sigma * noise
    smoothed = np.einsum("bkd,bkd->bk", perturbed_cost, perturbed).mean(axis=1)
    loss = np.einsum("bd,bd->b", cp_n, w) - smoothed
    grad = (w - perturbed.mean(axis=1)) * s
    return _out(loss, squeeze), _out(grad, squeeze)


# Regret and downstream losses

def regret_eval(
    cost_pred,
    cost_true,
    obj_true,
    oracle: OptimizationOracle,
    pool: Optional[SolvePool] = None,
) -> ArrayOrFloat:
    """c^T w*(c_hat) - z*(c), sign-adjusted so it is nonnegative for both senses."""
    d = oracle.decision_dim
    s = float(oracle.sense.value)
    cp, squeeze = _as_batch(cost_pred, d)
    c, _ = _as_batch(cost_true, d)
    z = _as_rows(obj_true, cp.shape[0])
    w = _solver(oracle, pool)(cp * s)
    regret = s * (np.einsum("ij,ij->i", c, w) - z)
    return _out(regret, squeeze)


def _is_binary(a: np.ndarray) -> bool:
    return bool(np.all(np.abs(a - np.round(a)) <= 1e-6) and np.all((a > -1e-6) & (a < 1 + 1e-6)))


def downstream_loss_eval(
    kind: Union[DownstreamLoss, str],
    w,
    reference,
    objective=None,
) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """
    Loss on a solution and its gradient with respect to the solution.

    Args:
        kind: REGRET (reference = minimization-form true cost, objective = z*),
              HAMMING (reference = true solution, binary only) or
              SQUARED_ERROR (reference = true solution)
        w: Solution(s) being scored
        reference: See kind
        objective: True optimal objective(s), REGRET only

    Returns:
        (loss, dl/dw)
    """
    kind = DownstreamLoss(kind)
    w_arr = np.asarray(w, dtype=np.float64)
    squeeze = w_arr.ndim == 1
    w_arr = np.atleast_2d(w_arr)
    ref = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    if ref.shape != w_arr.shape:
        raise DimensionMismatchError(f"solution shape {w_arr.shape} vs reference {ref.shape}")

    if kind is DownstreamLoss.REGRET:
        z = np.zeros(w_arr.shape[0]) if objective is None else _as_rows(objective, w_arr.shape[0])
        loss = np.einsum("ij,ij->i", ref, w_arr) - z
        grad = ref.copy()
    elif kind is DownstreamLoss.HAMMING:
        if not (_is_binary(w_arr) and _is_binary(ref)):
            raise ValueError("Hamming distance is only defined for binary solutions")
        loss = np.abs(w_arr - ref).sum(axis=1)
        grad = 1.0 - 2.0 * ref
    else:
        diff = w_arr - ref
        loss = (diff ** 2).sum(axis=1)
        grad = 2.0 * diff
    return _out(loss, squeeze), _out(grad, squeeze)
