"""
TSP Solver Module

Symmetric travelling salesperson over v nodes. Costs are indexed by the
v(v-1)/2 undirected pairs (i < j) in lexicographic order.

- Exact: Held-Karp dynamic programming, vectorized over subsets of equal size.
  At these sizes it reaches the same optimum as the DFJ integer program.
- Relaxed: LP relaxations of the MTZ and GG (single-commodity flow)
  formulations, solved by the bounded dense simplex (phase I once per
  oracle) and projected back onto undirected edges.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
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
    from .simplex_solver import BoundedSimplex, LpProblem, PivotRule
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
    from src.simplex_solver import BoundedSimplex, LpProblem, PivotRule

logger = logging.getLogger(__name__)


class TspFormulation(Enum):
    MTZ = "mtz"
    GG = "gg"


@dataclass(frozen=True)
class TspSpec:
    num_nodes: int

    def __post_init__(self):
        if self.num_nodes < 3:
            raise ValueError("TSP needs at least 3 nodes")

    @cached_property
    def edges(self) -> List[Tuple[int, int]]:
        return list(itertools.combinations(range(self.num_nodes), 2))

    @property
    def num_edges(self) -> int:
        return self.num_nodes * (self.num_nodes - 1) // 2

    @cached_property
    def edge_index(self) -> np.ndarray:
        """v x v matrix of undirected edge positions (-1 on the diagonal)."""
        idx = np.full((self.num_nodes, self.num_nodes), -1, dtype=np.int64)
        for e, (i, j) in enumerate(self.edges):
            idx[i, j] = idx[j, i] = e
        return idx

    def distance_matrix(self, cost: np.ndarray) -> np.ndarray:
        D = np.zeros((self.num_nodes, self.num_nodes))
        for e, (i, j) in enumerate(self.edges):
            D[i, j] = D[j, i] = cost[e]
        return D

    def tour_to_edges(self, tour: Sequence[int]) -> np.ndarray:
        values = np.zeros(self.num_edges)
        for a, b in zip(tour, list(tour[1:]) + [tour[0]]):
            values[self.edge_index[a, b]] = 1.0
        return values


def held_karp(D: np.ndarray) -> Tuple[float, List[int]]:
    """
    Optimal closed tour starting at node 0.

    Args:
        D: Symmetric v x v distance matrix

    Returns:
        (tour length, node order starting with 0)
    """
    v = D.shape[0]
    n = v - 1  # cities 1..v-1 map to bits 0..n-1
    full = (1 << n) - 1
    dp = np.full((1 << n, n), np.inf)
    parent = np.full((1 << n, n), -1, dtype=np.int16)
    for j in range(n):
        dp[1 << j, j] = D[0, j + 1]

    masks = np.arange(1 << n, dtype=np.int64)
    popcount = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        popcount += (masks >> b) & 1
    inner = D[1:, 1:]

    for size in range(2, n + 1):
        level = masks[popcount == size]
        for j in range(n):
            sel = level[((level >> j) & 1) == 1]
            prev = sel ^ (1 << j)
            cand = dp[prev] + inner[:, j][None, :]
            k = np.argmin(cand, axis=1)
            dp[sel, j] = cand[np.arange(len(sel)), k]
            parent[sel, j] = k

    closing = dp[full] + D[1:, 0]
    last = int(np.argmin(closing))
    length = float(closing[last])

    tour = []
    mask, j = full, last
    while j != -1:
        tour.append(j + 1)
        prev_j = int(parent[mask, j])
        mask ^= 1 << j
        j = prev_j
    tour.append(0)
    tour.reverse()
    return length, tour


def tsp_solve(spec: TspSpec, cost: Sequence[float]) -> Solution:
    """
    Edge-incidence vector of an optimal tour.

    Raises:
        SizeLimitError: more nodes than Held-Karp is allowed to handle
    """
    limit = get_setting("TSP_EXACT_LIMIT", 18)
    if spec.num_nodes > limit:
        raise SizeLimitError(f"Held-Karp is limited to {limit} nodes, got {spec.num_nodes}")
    c = as_cost_vector(cost, spec.num_edges)
    _, tour = held_karp(spec.distance_matrix(c))
    values = spec.tour_to_edges(tour)
    return Solution(values=values, objective=float(c @ values))


def _directed_arcs(v: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(v) for j in range(v) if i != j]


def _assignment_rows(v: int, arcs: List[Tuple[int, int]], num_vars: int) -> Tuple[np.ndarray, np.ndarray]:
    A = np.zeros((2 * v, num_vars))
    for a, (i, j) in enumerate(arcs):
        A[i, a] = 1.0  # leave i once
        A[v + j, a] = 1.0  # enter j once
    return A, np.ones(2 * v)


def build_mtz_lp(spec: TspSpec, cost: np.ndarray) -> LpProblem:
    """x_ij in [0,1] for directed arcs, order variables u_1..u_{v-1} in [1, v-1]."""
    v = spec.num_nodes
    arcs = _directed_arcs(v)
    m = len(arcs)
    num_vars = m + (v - 1)
    c = np.zeros(num_vars)
    c[:m] = [cost[spec.edge_index[i, j]] for i, j in arcs]
    A_eq, b_eq = _assignment_rows(v, arcs, num_vars)
    rows = []
    for a, (i, j) in enumerate(arcs):
        if i == 0 or j == 0:
            continue
        row = np.zeros(num_vars)
        row[m + i - 1] = 1.0
        row[m + j - 1] = -1.0
        row[a] = v - 1
        rows.append(row)
    A_ub = np.array(rows).reshape(-1, num_vars)
    b_ub = np.full(A_ub.shape[0], v - 2.0)
    lo = np.concatenate([np.zeros(m), np.ones(v - 1)])
    hi = np.concatenate([np.ones(m), np.full(v - 1, v - 1.0)])
    return LpProblem(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, lo=lo, hi=hi)


def build_gg_lp(spec: TspSpec, cost: np.ndarray) -> LpProblem:
    """x_ij in [0,1] plus flows g_ij >= 0: node 0 ships one unit to every other node."""
    v = spec.num_nodes
    arcs = _directed_arcs(v)
    m = len(arcs)
    num_vars = 2 * m
    c = np.zeros(num_vars)
    c[:m] = [cost[spec.edge_index[i, j]] for i, j in arcs]
    A_assign, b_assign = _assignment_rows(v, arcs, num_vars)
    flow = np.zeros((v - 1, num_vars))
    for a, (i, j) in enumerate(arcs):
        if j != 0:
            flow[j - 1, m + a] += 1.0
        if i != 0:
            flow[i - 1, m + a] -= 1.0
    A_eq = np.vstack([A_assign, flow])
    b_eq = np.concatenate([b_assign, np.ones(v - 1)])
    link = np.zeros((m, num_vars))
    for a in range(m):
        link[a, m + a] = 1.0
        link[a, a] = -(v - 1.0)
    lo = np.zeros(num_vars)
    hi = np.concatenate([np.ones(m), np.full(m, np.inf)])
    return LpProblem(c=c, A_ub=link, b_ub=np.zeros(m), A_eq=A_eq, b_eq=b_eq, lo=lo, hi=hi)


def tsp_lp(spec: TspSpec, formulation: TspFormulation = TspFormulation.MTZ,
           rule: PivotRule = PivotRule.DANTZIG) -> BoundedSimplex:
    """
    Feasible region of the chosen relaxation, ready for repeated solves.

    Raises:
        SizeLimitError: more nodes than the LP builders are allowed to handle
    """
    limit = get_setting("TSP_LP_LIMIT", 12)
    if spec.num_nodes > limit:
        raise SizeLimitError(f"TSP LP builders are limited to {limit} nodes, got {spec.num_nodes}")
    formulation = TspFormulation(formulation)
    build = build_mtz_lp if formulation is TspFormulation.MTZ else build_gg_lp
    return BoundedSimplex(build(spec, np.zeros(spec.num_edges)), rule)


def tsp_lp_relax(spec: TspSpec, cost: Sequence[float], formulation: TspFormulation = TspFormulation.MTZ,
                 lp: Optional[BoundedSimplex] = None) -> Solution:
    """
    Fractional optimum of the chosen formulation's LP relaxation.

    Directed arc values are summed per undirected pair and clamped to [0, 1].
    The returned objective is the LP optimum, a lower bound on tsp_solve.
    `lp` is a region from tsp_lp for the same spec and formulation.
    """
    formulation = TspFormulation(formulation)
    if lp is None:
        lp = tsp_lp(spec, formulation)
    c = as_cost_vector(cost, spec.num_edges)
    arcs = _directed_arcs(spec.num_nodes)
    arc_edges = np.array([spec.edge_index[i, j] for i, j in arcs])
    arc_cost = np.zeros(lp.num_vars)
    arc_cost[:len(arcs)] = c[arc_edges]
    result = lp.solve(arc_cost)
    if not result.is_optimal:
        raise RuntimeError(f"{formulation.value} relaxation ended with status {result.status.value}")
    values = np.bincount(arc_edges, weights=result.x[:len(arcs)], minlength=spec.num_edges)
    values = np.clip(values, 0.0, 1.0)
    return Solution(values=values, objective=result.objective)


def enumerate_optimal_tours(spec: TspSpec, cost: Sequence[float], limit: Optional[int] = None) -> List[np.ndarray]:
    """Brute force over (v-1)!/2 tours; every optimal edge set."""
    c = as_cost_vector(cost, spec.num_edges)
    D = spec.distance_matrix(c)
    best = np.inf
    tours: List[Tuple[float, Tuple[int, ...]]] = []
    for perm in itertools.permutations(range(1, spec.num_nodes)):
        if perm[0] > perm[-1]:
            continue  # each undirected tour once
        tour = (0,) + perm
        length = sum(D[tour[k], tour[(k + 1) % len(tour)]] for k in range(len(tour)))
        tours.append((length, tour))
        best = min(best, length)
    hits = [t for length, t in tours if length <= best + opt_tolerance(best)]
    check_enumeration_limit(len(hits), limit)
    return [spec.tour_to_edges(list(t)) for t in hits]


class TspOracle(OptimizationOracle):
    """Minimization oracle; `formulation` picks the LP used by `relax()`."""

    kind = "tsp"
    sense = ModelSense.MINIMIZE
    is_binary = True

    def __init__(self, spec: TspSpec, formulation: TspFormulation = TspFormulation.MTZ):
        self.spec = spec
        self.formulation = TspFormulation(formulation)
        self._lp: Optional[BoundedSimplex] = None

    @property
    def decision_dim(self) -> int:
        return self.spec.num_edges

    def spec_dict(self) -> Dict[str, Any]:
        return {"num_nodes": self.spec.num_nodes}

    def _solve_values(self, cost: np.ndarray) -> np.ndarray:
        return tsp_solve(self.spec, cost).values

    def _solve_relaxed_values(self, cost: np.ndarray) -> np.ndarray:
        if self._lp is None:
            self._lp = tsp_lp(self.spec, self.formulation)
        return tsp_lp_relax(self.spec, cost, self.formulation, self._lp).values

    def enumeration_size_ok(self) -> bool:
        return self.spec.num_nodes <= get_setting("TSP_ENUMERATION_LIMIT", 9)

    def _enumerate_values(self, cost: np.ndarray, limit: Optional[int] = None) -> List[np.ndarray]:
        if not self.enumeration_size_ok():
            raise SizeLimitError("too many nodes to enumerate tours")
        return enumerate_optimal_tours(self.spec, cost, limit)

    def is_feasible(self, values: np.ndarray) -> bool:
        v = self.spec.num_nodes
        if len(values) != self.decision_dim or not np.all(np.isin(values, (0.0, 1.0))):
            return False
        adj: List[List[int]] = [[] for _ in range(v)]
        for e, (i, j) in enumerate(self.spec.edges):
            if values[e] == 1.0:
                adj[i].append(j)
                adj[j].append(i)
        if any(len(nb) != 2 for nb in adj):
            return False
        # one cycle through every node
        seen, prev, cur = {0}, -1, 0
        while True:
            nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
            if nxt == 0:
                break
            seen.add(nxt)
            prev, cur = cur, nxt
        return len(seen) == v
