"""
Knapsack Solver Module

Exact multi-dimensional 0/1 knapsack by depth-first branch-and-bound, plus
its LP relaxation (greedy fill for one resource, bounded simplex otherwise).

    max  v^T x   s.t.  W x <= b,  x in {0, 1}^d

Items are branched in decreasing value / aggregate-weight order (weights
scaled by capacity). The bound at each node is the tightest of the
single-resource LP relaxations (Dantzig bound per resource), each of which
is at least the full LP relaxation value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

try:
    from .errors import DimensionMismatchError, SizeLimitError
    from .import_utils import get_setting
    from .opt_oracle import (
        ModelSense,
        OptimizationOracle,
        Solution,
        as_cost_vector,
        check_enumeration_limit,
        opt_tolerance,
    )
    from .simplex_solver import BoundedSimplex, LpProblem, PivotRule
except ImportError:
    from src.errors import DimensionMismatchError, SizeLimitError
    from src.import_utils import get_setting
    from src.opt_oracle import (
        ModelSense,
        OptimizationOracle,
        Solution,
        as_cost_vector,
        check_enumeration_limit,
        opt_tolerance,
    )
    from src.simplex_solver import BoundedSimplex, LpProblem, PivotRule

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KnapsackSpec:
    """Weights W (k x d) and capacities b (k)."""
    weights: np.ndarray
    capacities: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        b = np.asarray(self.capacities, dtype=np.float64).reshape(-1)
        if w.shape[0] != b.shape[0]:
            raise DimensionMismatchError(f"{w.shape[0]} weight rows but {b.shape[0]} capacities")
        if w.shape[0] < 1:
            raise ValueError("knapsack needs at least one resource")
        if np.any(w < 0) or np.any(b <= 0):
            raise ValueError("weights must be nonnegative and capacities positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "capacities", b)

    @property
    def num_items(self) -> int:
        return self.weights.shape[1]

    @property
    def num_resources(self) -> int:
        return self.weights.shape[0]


class _BranchAndBound:
    """Search state for one value vector."""

    def __init__(self, spec: KnapsackSpec, value: np.ndarray, min_value: float):
        self.spec = spec
        self.value = value
        W, b = spec.weights, spec.capacities
        fits = np.all(W <= b[:, None] + 1e-12, axis=0)
        items = np.flatnonzero((value > min_value) & fits)
        agg = (W[:, items] / b[:, None]).sum(axis=0)
        ratio = np.where(agg > 0, value[items] / np.maximum(agg, 1e-300), np.inf)
        # stable sort keeps index order on equal ratios
        self.order = items[np.argsort(-ratio, kind="stable")]
        # per resource: branch positions sorted by value density for that resource
        self.ranks = []
        for r in range(spec.num_resources):
            w = W[r, self.order]
            dens = np.where(w > 0, value[self.order] / np.maximum(w, 1e-300), np.inf)
            self.ranks.append(np.argsort(-dens, kind="stable"))

    def bound(self, depth: int, room: np.ndarray) -> float:
        best = np.inf
        W, v, order = self.spec.weights, self.value, self.order
        for r, rank in enumerate(self.ranks):
            total, cap = 0.0, room[r]
            for pos in rank:
                if pos < depth:
                    continue
                item = order[pos]
                w = W[r, item]
                if w <= cap:
                    total += v[item]
                    cap -= w
                else:
                    total += v[item] * cap / w
                    break
            best = min(best, total)
        return best

    def search_best(self) -> np.ndarray:
        n = len(self.order)
        chosen = np.zeros(n, dtype=bool)
        best_val = 0.0
        best_sel = chosen.copy()

        def dfs(depth: int, cur: float, room: np.ndarray) -> None:
            nonlocal best_val, best_sel
            if cur > best_val + opt_tolerance(best_val):
                best_val, best_sel = cur, chosen.copy()
            if depth == n:
                return
            if cur + self.bound(depth, room) <= best_val + opt_tolerance(best_val):
                return
            item = self.order[depth]
            w = self.spec.weights[:, item]
            if np.all(w <= room + 1e-12):
                chosen[depth] = True
                dfs(depth + 1, cur + self.value[item], room - w)
                chosen[depth] = False
            dfs(depth + 1, cur, room)

        dfs(0, 0.0, self.spec.capacities.copy())
        x = np.zeros(self.spec.num_items)
        x[self.order[best_sel]] = 1.0
        return x

    def search_all(self, target: float, limit: Optional[int]) -> List[np.ndarray]:
        n = len(self.order)
        chosen = np.zeros(n, dtype=bool)
        found: List[np.ndarray] = []
        tol = opt_tolerance(target)

        def dfs(depth: int, cur: float, room: np.ndarray) -> None:
            if depth == n:
                if cur >= target - tol:
                    x = np.zeros(self.spec.num_items)
                    x[self.order[chosen]] = 1.0
                    found.append(x)
                    check_enumeration_limit(len(found), limit)
                return
            if cur + self.bound(depth, room) < target - tol:
                return
            item = self.order[depth]
            w = self.spec.weights[:, item]
            if np.all(w <= room + 1e-12):
                chosen[depth] = True
                dfs(depth + 1, cur + self.value[item], room - w)
                chosen[depth] = False
            dfs(depth + 1, cur, room)

        dfs(0, 0.0, self.spec.capacities.copy())
        return found


def knapsack_solve(spec: KnapsackSpec, value: Sequence[float]) -> Solution:
    """
    Exact 0/1 selection maximizing total value under every capacity.

    Items with value <= 0 are never selected.
    """
    v = as_cost_vector(value, spec.num_items)
    x = _BranchAndBound(spec, v, min_value=0.0).search_best()
    return Solution(values=x, objective=float(v @ x))


def fractional_greedy(weights: np.ndarray, capacity: float, value: np.ndarray) -> np.ndarray:
    """
    Single-resource LP optimum: take items by value density, the last one in part.

    Zero-weight items with positive value are taken whole; ties in density
    keep index order.
    """
    x = np.zeros(value.shape[0])
    items = np.flatnonzero(value > 0)
    free = items[weights[items] <= 0]
    x[free] = 1.0
    items = items[weights[items] > 0]
    order = items[np.argsort(-(value[items] / weights[items]), kind="stable")]
    filled = np.cumsum(weights[order])
    whole = filled <= capacity
    x[order[whole]] = 1.0
    rest = np.flatnonzero(~whole)
    if rest.size:
        first = order[rest[0]]
        room = capacity - (filled[rest[0]] - weights[first])
        x[first] = max(room, 0.0) / weights[first]
    return x


def knapsack_lp(spec: KnapsackSpec, rule: PivotRule = PivotRule.DANTZIG) -> BoundedSimplex:
    """Feasible region of the knapsack LP with 0 <= x <= 1, ready for repeated solves."""
    d = spec.num_items
    problem = LpProblem(
        c=np.zeros(d),
        A_ub=spec.weights,
        b_ub=spec.capacities,
        lo=np.zeros(d),
        hi=np.ones(d),
        sense=ModelSense.MAXIMIZE,
    )
    return BoundedSimplex(problem, rule)


def greedy_start(spec: KnapsackSpec, value: np.ndarray) -> np.ndarray:
    """Longest prefix, by aggregate value density, that fits every resource."""
    W, b = spec.weights, spec.capacities
    items = np.flatnonzero(value > 0)
    agg = (W[:, items] / b[:, None]).sum(axis=0)
    ratio = np.where(agg > 0, value[items] / np.maximum(agg, 1e-300), np.inf)
    order = items[np.argsort(-ratio, kind="stable")]
    fits = np.all(np.cumsum(W[:, order], axis=1) <= b[:, None], axis=0)
    stop = int(np.argmin(fits)) if not fits.all() else order.size
    return order[:stop]


def knapsack_lp_relax(spec: KnapsackSpec, value: Sequence[float], lp: Optional[BoundedSimplex] = None) -> Solution:
    """
    Fractional optimum of the knapsack LP with 0 <= x <= 1.

    One resource is the Dantzig greedy fill; more go through the simplex,
    started from the greedy prefix and reusing `lp` when the caller keeps one
    for this spec.
    """
    v = as_cost_vector(value, spec.num_items)
    if spec.num_resources == 1:
        x = fractional_greedy(spec.weights[0], float(spec.capacities[0]), v)
        return Solution(values=x, objective=float(v @ x))
    if lp is None:
        lp = knapsack_lp(spec)
    return lp.solve(v, ModelSense.MAXIMIZE, at_upper=greedy_start(spec, v)).to_solution()


def enumerate_knapsack_optima(spec: KnapsackSpec, value: Sequence[float], limit: Optional[int] = None) -> List[np.ndarray]:
    """Every optimal selection; zero-value items may or may not be taken."""
    v = as_cost_vector(value, spec.num_items)
    best = knapsack_solve(spec, v).objective
    search = _BranchAndBound(spec, v, min_value=-opt_tolerance(best))
    return search.search_all(best, limit)


class KnapsackOracle(OptimizationOracle):
    """Maximization oracle for a fixed weight matrix and capacity vector."""

    kind = "knapsack"
    sense = ModelSense.MAXIMIZE
    is_binary = True

    def __init__(self, spec: KnapsackSpec):
        self.spec = spec
        self._lp: Optional[BoundedSimplex] = None

    @property
    def decision_dim(self) -> int:
        return self.spec.num_items

    def spec_dict(self) -> Dict[str, Any]:
        return {"weights": self.spec.weights.tolist(), "capacities": self.spec.capacities.tolist()}

    def _solve_values(self, cost: np.ndarray) -> np.ndarray:
        return knapsack_solve(self.spec, cost).values

    def _solve_relaxed_values(self, cost: np.ndarray) -> np.ndarray:
        if self._lp is None and self.spec.num_resources > 1:
            self._lp = knapsack_lp(self.spec)
        return knapsack_lp_relax(self.spec, cost, self._lp).values

    def enumeration_size_ok(self) -> bool:
        return self.spec.num_items <= get_setting("KNAPSACK_ENUMERATION_LIMIT", 20)

    def _enumerate_values(self, cost: np.ndarray, limit: Optional[int] = None) -> List[np.ndarray]:
        if not self.enumeration_size_ok():
            raise SizeLimitError("knapsack has too many items to enumerate")
        return enumerate_knapsack_optima(self.spec, cost, limit)

    def is_feasible(self, values: np.ndarray) -> bool:
        if len(values) != self.decision_dim or not np.all(np.isin(values, (0.0, 1.0))):
            return False
        return bool(np.all(self.spec.weights @ values <= self.spec.capacities + 1e-9))
