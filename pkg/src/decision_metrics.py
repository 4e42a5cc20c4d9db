"""
Decision Metrics Module

Evaluation of a cost predictor on a solved dataset: normalized regret,
normalized unambiguous regret, MSE and solution accuracy.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

try:
    from .errors import SizeLimitError, UnsupportedCapabilityError
    from .import_utils import get_setting
    from .linear_predictor import LinearPredictor, predict
    from .opt_oracle import OptimizationOracle, enumerate_optimal_set, solve
    from .solve_pool import SolvePool
except ImportError:
    from src.errors import SizeLimitError, UnsupportedCapabilityError
    from src.import_utils import get_setting
    from src.linear_predictor import LinearPredictor, predict
    from src.opt_oracle import OptimizationOracle, enumerate_optimal_set, solve
    from src.solve_pool import SolvePool

logger = logging.getLogger(__name__)

BINARY_TOL = 1e-6


@dataclass
class EvaluationReport:
    normalized_regret: float
    mse: float
    normalized_unambiguous_regret: Optional[float] = None
    solution_accuracy: Optional[float] = None
    per_instance_regret: np.ndarray = field(default_factory=lambda: np.zeros(0))
    wall_time: float = 0.0
    unambiguous_fallbacks: int = 0
    rounded_solutions: bool = False

    def to_row(self) -> Dict[str, Any]:
        """Flat mapping used for results CSV rows."""
        return {
            "normalized_regret": self.normalized_regret,
            "normalized_unambiguous_regret": self.normalized_unambiguous_regret,
            "mse": self.mse,
            "solution_accuracy": self.solution_accuracy,
            "eval_time": self.wall_time,
            "unambiguous_fallbacks": self.unambiguous_fallbacks,
            "rounded_solutions": self.rounded_solutions,
        }

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_row().items():
            if value is None:
                value = "n/a"
            elif isinstance(value, float):
                value = f"{value:.6g}"
            lines.append(f"{key} = {value}")
        lines.append(f"instances = {len(self.per_instance_regret)}")
        return "\n".join(lines)


def predict_costs(model, features) -> np.ndarray:
    """Costs from a LinearPredictor or any object with a `predict(X)` method."""
    if isinstance(model, LinearPredictor):
        return predict(model, features)
    return np.asarray(model.predict(features), dtype=np.float64)


def _solve_rows(oracle: OptimizationOracle, costs: np.ndarray, pool: Optional[SolvePool]) -> np.ndarray:
    if pool is not None:
        return pool.solve_many(costs)
    return np.vstack([solve(oracle, c).values for c in costs])


def _is_binary(a: np.ndarray) -> bool:
    return bool(np.all(np.minimum(np.abs(a), np.abs(a - 1.0)) <= BINARY_TOL))


def _normalize(total: float, objectives: np.ndarray) -> float:
    denom = float(np.abs(objectives).sum())
    if denom == 0.0:
        return 0.0 if abs(total) <= 1e-9 else float("inf")
    return total / denom


def unambiguous_regret_single(
    cost_pred,
    cost_true,
    obj_true: float,
    oracle: OptimizationOracle,
    budget: Optional[int] = None,
) -> float:
    """
    Worst true-cost regret over every optimum of the predicted problem.

    Raises:
        UnsupportedCapabilityError: oracle cannot enumerate
        SizeLimitError: instance or optimal set above the enumeration budget
    """
    if budget is None:
        budget = int(get_setting("ENUMERATION_BUDGET", 100000))
    s = float(oracle.sense.value)
    c = np.asarray(cost_true, dtype=np.float64)
    optima = enumerate_optimal_set(oracle, cost_pred, limit=budget)
    return max(s * (float(c @ sol.values) - obj_true) for sol in optima)


def regret_per_instance(model, oracle: OptimizationOracle, ds, pool: Optional[SolvePool] = None) -> np.ndarray:
    cp = predict_costs(model, ds.features)
    w = _solve_rows(oracle, cp, pool)
    return float(oracle.sense.value) * (np.einsum("ij,ij->i", ds.costs, w) - ds.objectives)


def normalized_regret(model, oracle: OptimizationOracle, ds, pool: Optional[SolvePool] = None) -> float:
    return _normalize(float(regret_per_instance(model, oracle, ds, pool).sum()), ds.objectives)


def evaluate(
    model,
    oracle: OptimizationOracle,
    ds,
    want_unambiguous: bool = False,
    pool: Optional[SolvePool] = None,
    budget: Optional[int] = None,
) -> EvaluationReport:
    """
    Score `model` on a solved dataset.

    Solution accuracy is reported only when the stored solutions are binary;
    fractional predicted solutions are rounded at 0.5 first and the report
    says so. Instances whose optimal set exceeds the enumeration budget fall
    back to plain regret and are counted in `unambiguous_fallbacks`.
    """
    if not ds.is_solved:
        raise UnsupportedCapabilityError("evaluation needs a dataset with precomputed solutions")
    if want_unambiguous and not oracle.capabilities.has_optimal_set_enumeration:
        raise UnsupportedCapabilityError(f"{oracle.kind} oracle cannot enumerate optimal sets")
    started = time.perf_counter()
    s = float(oracle.sense.value)

    cp = predict_costs(model, ds.features)
    w = _solve_rows(oracle, cp, pool)
    regrets = s * (np.einsum("ij,ij->i", ds.costs, w) - ds.objectives)
    mse = float(np.mean(np.sum((cp - ds.costs) ** 2, axis=1) / ds.num_cost)) if len(ds) else 0.0

    accuracy, rounded = None, False
    if _is_binary(ds.solutions):
        if not _is_binary(w):
            w = (w >= 0.5).astype(np.float64)
            rounded = True
        accuracy = float(np.mean(np.abs(np.round(w) - ds.solutions) <= BINARY_TOL)) if len(ds) else 1.0

    unambiguous, fallbacks = None, 0
    if want_unambiguous:
        worst = regrets.copy()
        for i in range(len(ds)):
            try:
                value = unambiguous_regret_single(cp[i], ds.costs[i], ds.objectives[i], oracle, budget)
            except SizeLimitError:
                fallbacks += 1
                continue
            # the chosen solution belongs to the optimal set, so it never lowers the worst case
            worst[i] = max(worst[i], value)
        unambiguous = _normalize(float(worst.sum()), ds.objectives)
        if fallbacks:
            logger.warning(f"{fallbacks} instance(s) over the enumeration budget used plain regret")

    report = EvaluationReport(
        normalized_regret=_normalize(float(regrets.sum()), ds.objectives),
        mse=mse,
        normalized_unambiguous_regret=unambiguous,
        solution_accuracy=accuracy,
        per_instance_regret=regrets,
        wall_time=time.perf_counter() - started,
        unambiguous_fallbacks=fallbacks,
        rounded_solutions=rounded,
    )
    logger.debug(f"evaluated {len(ds)} instances: regret={report.normalized_regret:.4g}, mse={mse:.4g}")
    return report
