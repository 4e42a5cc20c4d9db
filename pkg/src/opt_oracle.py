"""
Optimization Oracle Module

Solver-agnostic black-box abstraction every loss, dataset and metric calls.

An oracle fixes a feasible region S and a model sense and answers
    w*(c) in argmin_{w in S} c^T w   (or argmax for maximization problems)
for any cost vector c. Losses work on minimization-normalized costs; the
negation for maximization oracles happens once, in this module.
"""

from __future__ import annotations

import copy
import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

try:
    from .errors import (
        DimensionMismatchError,
        InvalidCostError,
        SizeLimitError,
        UnsupportedCapabilityError,
    )
except ImportError:
    from src.errors import (
        DimensionMismatchError,
        InvalidCostError,
        SizeLimitError,
        UnsupportedCapabilityError,
    )

# Absolute optimality tolerance, scaled up for large objectives
OPT_TOL = 1e-9


class ModelSense(Enum):
    """Objective direction; the value is the sign that maps costs to minimization."""
    MINIMIZE = 1
    MAXIMIZE = -1


@dataclass(frozen=True)
class Solution:
    """A decision vector and its objective under the cost it was solved for."""
    values: np.ndarray
    objective: float

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class OracleCapabilities:
    has_relaxation: bool
    has_optimal_set_enumeration: bool
    decision_dim: int


def opt_tolerance(objective: float) -> float:
    """Tolerance used for 'same objective' comparisons."""
    return OPT_TOL * max(1.0, abs(objective))


def as_cost_vector(cost: Sequence[float], dim: int | None = None) -> np.ndarray:
    """Convert to a float64 vector, checking finiteness and (optionally) length."""
    arr = np.asarray(cost, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidCostError("cost vector contains NaN or infinite entries")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(f"cost has length {arr.shape[0]}, oracle expects {dim}")
    return arr


def normalize_to_min(cost: Sequence[float], sense: ModelSense) -> np.ndarray:
    """
    Map a cost vector to the minimization convention.

    Args:
        cost: Cost coefficients in the oracle's own sense
        sense: Model sense of the oracle

    Returns:
        cost unchanged for MINIMIZE, negated for MAXIMIZE
    """
    arr = as_cost_vector(cost)
    if sense is ModelSense.MAXIMIZE:
        # 0.0 - x keeps zeros positive
        return 0.0 - arr
    return arr.copy()


class OptimizationOracle(ABC):
    """
    Base class for built-in and user-defined oracles.

    Subclasses implement `_solve_values` (exact solve in the oracle's own sense)
    and optionally `_solve_relaxed_values`, `_enumerate_values` and `is_feasible`.
    """

    kind: str = "oracle"
    sense: ModelSense = ModelSense.MINIMIZE
    is_binary: bool = True

    @property
    @abstractmethod
    def decision_dim(self) -> int:
        """Length of cost and solution vectors."""

    @abstractmethod
    def _solve_values(self, cost: np.ndarray) -> np.ndarray:
        """Return an optimal decision vector for `cost` (already validated)."""

    def spec_dict(self) -> Dict[str, Any]:
        """JSON-serializable description of the feasible region."""
        return {}

    def _solve_relaxed_values(self, cost: np.ndarray) -> np.ndarray:
        raise UnsupportedCapabilityError(f"{self.kind} oracle has no relaxation")

    def _enumerate_values(self, cost: np.ndarray, limit: Optional[int] = None) -> List[np.ndarray]:
        raise UnsupportedCapabilityError(f"{self.kind} oracle cannot enumerate optimal sets")

    def enumeration_size_ok(self) -> bool:
        return True

    def is_feasible(self, values: np.ndarray) -> bool:
        return len(values) == self.decision_dim

    @property
    def capabilities(self) -> OracleCapabilities:
        cls = type(self)
        return OracleCapabilities(
            has_relaxation=cls._solve_relaxed_values is not OptimizationOracle._solve_relaxed_values,
            has_optimal_set_enumeration=cls._enumerate_values is not OptimizationOracle._enumerate_values,
            decision_dim=self.decision_dim,
        )

    def fingerprint(self) -> str:
        """Problem kind plus a short hash of its spec; stored in dataset files."""
        payload = json.dumps(
            {"kind": self.kind, "sense": self.sense.name, "spec": self.spec_dict()},
            sort_keys=True,
        )
        digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
        return f"{self.kind}:{digest}"

    def replicate(self) -> "OptimizationOracle":
        """Independent copy for a worker."""
        return copy.deepcopy(self)

    def relax(self) -> "OptimizationOracle":
        """Oracle answering with the LP relaxation of this problem."""
        if not self.capabilities.has_relaxation:
            raise UnsupportedCapabilityError(f"{self.kind} oracle has no relaxation")
        return RelaxedOracle(self)


class RelaxedOracle(OptimizationOracle):
    """Wraps an integer oracle so that `solve` returns its LP relaxation."""

    is_binary = False

    def __init__(self, base: OptimizationOracle):
        self.base = base
        self.kind = f"{base.kind}-rel"
        self.sense = base.sense

    @property
    def decision_dim(self) -> int:
        return self.base.decision_dim

    def spec_dict(self) -> Dict[str, Any]:
        return self.base.spec_dict()

    def _solve_values(self, cost: np.ndarray) -> np.ndarray:
        return self.base._solve_relaxed_values(cost)

    def is_feasible(self, values: np.ndarray) -> bool:
        return len(values) == self.decision_dim and bool(np.all(values >= -1e-7))


class FiniteSetOracle(OptimizationOracle):
    """
    Oracle over an explicit list of feasible points (rows of `points`).

    This is the smallest complete oracle a user can write; it is also handy
    for closed-form checks such as the 1-D set {0, 1}.
    """

    kind = "finite_set"

    def __init__(self, points: Sequence[Sequence[float]], sense: ModelSense = ModelSense.MINIMIZE):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[0] == 0:
            raise ValueError("finite set oracle needs at least one point")
        # lexicographic row order makes the first optimum the tie-break winner
        order = np.lexsort(pts.T[::-1])
        self.points = pts[order]
        self.sense = sense
        self.is_binary = bool(np.all(np.isin(self.points, (0.0, 1.0))))

    @property
    def decision_dim(self) -> int:
        return self.points.shape[1]

    def spec_dict(self) -> Dict[str, Any]:
        return {"points": self.points.tolist()}

    def _objectives_min(self, cost: np.ndarray) -> np.ndarray:
        return self.points @ (cost * self.sense.value)

    def _solve_values(self, cost: np.ndarray) -> np.ndarray:
        obj = self._objectives_min(cost)
        best = obj.min()
        idx = int(np.flatnonzero(obj <= best + opt_tolerance(best))[0])
        return self.points[idx].copy()

    def _enumerate_values(self, cost: np.ndarray, limit: Optional[int] = None) -> List[np.ndarray]:
        obj = self._objectives_min(cost)
        best = obj.min()
        hits = np.flatnonzero(obj <= best + opt_tolerance(best))
        check_enumeration_limit(len(hits), limit)
        return [self.points[i].copy() for i in hits]

    def is_feasible(self, values: np.ndarray) -> bool:
        return bool(np.any(np.all(np.abs(self.points - values) <= 1e-9, axis=1)))


def solve(oracle: OptimizationOracle, cost: Sequence[float]) -> Solution:
    """
    Solve the oracle's problem for one cost vector.

    Args:
        oracle: Any optimization oracle
        cost: Cost vector in the oracle's own sense

    Returns:
        Optimal Solution; objective is dot(cost, values)
    """
    c = as_cost_vector(cost, oracle.decision_dim)
    values = np.asarray(oracle._solve_values(c), dtype=np.float64)
    return Solution(values=values, objective=float(c @ values))


def solve_min(oracle: OptimizationOracle, cost_min: np.ndarray) -> np.ndarray:
    """Decision vector minimizing cost_min^T w, for a minimization-normalized cost."""
    # the sense map is its own inverse
    c = normalize_to_min(as_cost_vector(cost_min, oracle.decision_dim), oracle.sense)
    return np.asarray(oracle._solve_values(c), dtype=np.float64)


def check_enumeration_limit(count: int, limit: Optional[int]) -> None:
    if limit is not None and count > limit:
        raise SizeLimitError(f"optimal set has more than {limit} solutions")


def enumerate_optimal_set(
    oracle: OptimizationOracle,
    cost: Sequence[float],
    limit: Optional[int] = None,
) -> List[Solution]:
    """
    Every optimal solution for `cost` (objectives within tolerance of the optimum).

    Args:
        oracle: Oracle with enumeration capability
        cost: Cost vector in the oracle's own sense
        limit: Maximum number of solutions; exceeding it raises SizeLimitError

    Raises:
        UnsupportedCapabilityError: oracle cannot enumerate
        SizeLimitError: instance or optimal set too large for enumeration
    """
    if not oracle.capabilities.has_optimal_set_enumeration:
        raise UnsupportedCapabilityError(f"{oracle.kind} oracle cannot enumerate optimal sets")
    if not oracle.enumeration_size_ok():
        raise SizeLimitError(f"{oracle.kind} instance is above the enumeration limit")
    c = as_cost_vector(cost, oracle.decision_dim)
    return [Solution(values=v, objective=float(c @ v)) for v in oracle._enumerate_values(c, limit)]
