"""
Shortest Path Solver Module

Grid shortest path from the northwest corner (node 0) to the southeast
corner (node h*w - 1) over right/down arcs.

The grid is a DAG and node indices are already a topological order, so the
solver is a single dynamic-programming sweep. Predicted costs can be
negative, which rules out Dijkstra.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    from .errors import SizeLimitError
    from .import_utils import get_setting
    from .opt_oracle import (
        ModelSense,
        OptimizationOracle,
        Solution,
        as_cost_vector,
        check_enumeration_limit,
        opt_tolerance,
    )
    from .simplex_solver import LpProblem, LpResult, simplex_solve
except ImportError:
    from src.errors import SizeLimitError
    from src.import_utils import get_setting
    from src.opt_oracle import (
        ModelSense,
        OptimizationOracle,
        Solution,
        as_cost_vector,
        check_enumeration_limit,
        opt_tolerance,
    )
    from src.simplex_solver import LpProblem, LpResult, simplex_solve


@dataclass(frozen=True)
class GridSpec:
    height: int
    width: int

    def __post_init__(self):
        if self.height < 2 or self.width < 2:
            raise ValueError("grid height and width must both be at least 2")

    @property
    def num_nodes(self) -> int:
        return self.height * self.width

    @cached_property
    def arcs(self) -> List[Tuple[int, int]]:
        """Row arcs then column arcs, row by row."""
        arcs = []
        for i in range(self.height):
            for j in range(self.width - 1):
                v = i * self.width + j
                arcs.append((v, v + 1))
            if i == self.height - 1:
                continue
            for j in range(self.width):
                v = i * self.width + j
                arcs.append((v, v + self.width))
        return arcs

    @property
    def num_arcs(self) -> int:
        return self.height * (self.width - 1) + (self.height - 1) * self.width

    @cached_property
    def incoming(self) -> List[List[int]]:
        """Arc indices entering each node, in increasing arc order."""
        inc: List[List[int]] = [[] for _ in range(self.num_nodes)]
        for a, (_, v) in enumerate(self.arcs):
            inc[v].append(a)
        return inc


def _distances(spec: GridSpec, cost: np.ndarray) -> np.ndarray:
    dist = np.full(spec.num_nodes, np.inf)
    dist[0] = 0.0
    arcs = spec.arcs
    for v in range(1, spec.num_nodes):
        dist[v] = min(dist[arcs[a][0]] + cost[a] for a in spec.incoming[v])
    return dist


def grid_shortest_path_solve(spec: GridSpec, cost: Sequence[float]) -> Solution:
    """
    Arc-incidence vector of a minimum-cost source-to-sink path.

    Ties between predecessor arcs are broken toward the smaller arc index.

    Raises:
        DimensionMismatchError: cost length differs from the arc count
    """
    cost = as_cost_vector(cost, spec.num_arcs)
    dist = _distances(spec, cost)
    values = np.zeros(spec.num_arcs)
    v = spec.num_nodes - 1
    arcs = spec.arcs
    while v != 0:
        best = None
        for a in spec.incoming[v]:
            cand = dist[arcs[a][0]] + cost[a]
            if cand <= dist[v] + opt_tolerance(dist[v]):
                best = a
                break
        values[best] = 1.0
        v = arcs[best][0]
    return Solution(values=values, objective=float(cost @ values))


def enumerate_shortest_paths(spec: GridSpec, cost: np.ndarray, limit: Optional[int] = None) -> List[np.ndarray]:
    """All minimum-cost paths, in the same tie-break order as the solver."""
    dist = _distances(spec, cost)
    arcs = spec.arcs
    results: List[np.ndarray] = []

    def backtrack(v: int, used: List[int]) -> None:
        if v == 0:
            values = np.zeros(spec.num_arcs)
            values[used] = 1.0
            results.append(values)
            check_enumeration_limit(len(results), limit)
            return
        for a in spec.incoming[v]:
            u = arcs[a][0]
            if dist[u] + cost[a] <= dist[v] + opt_tolerance(dist[v]):
                backtrack(u, used + [a])

    backtrack(spec.num_nodes - 1, [])
    return results


def grid_lp(spec: GridSpec, cost: np.ndarray) -> LpResult:
    """Flow LP of the grid shortest path; its optimum is integral."""
    n_nodes, n_arcs = spec.num_nodes, spec.num_arcs
    A_eq = np.zeros((n_nodes, n_arcs))
    for a, (u, v) in enumerate(spec.arcs):
        A_eq[u, a] += 1.0
        A_eq[v, a] -= 1.0
    b_eq = np.zeros(n_nodes)
    b_eq[0] = 1.0
    b_eq[-1] = -1.0
    problem = LpProblem(c=cost, A_eq=A_eq, b_eq=b_eq, lo=np.zeros(n_arcs), hi=np.ones(n_arcs))
    return simplex_solve(problem)


class ShortestPathOracle(OptimizationOracle):
    """Minimization oracle for an h x w grid."""

    kind = "shortest_path"
    sense = ModelSense.MINIMIZE
    is_binary = True

    def __init__(self, spec: GridSpec):
        self.spec = spec

    @property
    def decision_dim(self) -> int:
        return self.spec.num_arcs

    def spec_dict(self) -> Dict[str, Any]:
        return {"height": self.spec.height, "width": self.spec.width}

    def _solve_values(self, cost: np.ndarray) -> np.ndarray:
        return grid_shortest_path_solve(self.spec, cost).values

    def enumeration_size_ok(self) -> bool:
        return max(self.spec.height, self.spec.width) <= get_setting("GRID_ENUMERATION_LIMIT", 8)

    def _enumerate_values(self, cost: np.ndarray, limit: Optional[int] = None) -> List[np.ndarray]:
        if not self.enumeration_size_ok():
            raise SizeLimitError("grid is above the enumeration limit")
        return enumerate_shortest_paths(self.spec, cost, limit)

    def is_feasible(self, values: np.ndarray) -> bool:
        if len(values) != self.decision_dim or not np.all(np.isin(values, (0.0, 1.0))):
            return False
        balance = np.zeros(self.spec.num_nodes)
        for a, (u, v) in enumerate(self.spec.arcs):
            balance[u] += values[a]
            balance[v] -= values[a]
        expected = np.zeros(self.spec.num_nodes)
        expected[0], expected[-1] = 1.0, -1.0
        return bool(np.allclose(balance, expected))
