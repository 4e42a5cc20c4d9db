"""
Simplex Solver Module

Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves
    min / max  c^T x
    s.t.       A_ub x <= b_ub
               A_eq x  = b_eq
               lo <= x <= hi
Finite upper bounds are handled by the bounded-variable rule: a variable that
reaches its bound is complemented (y -> u - y) instead of getting a row of its
own, so the tableau has one row per constraint only.

Problem sizes here stay in the hundreds of variables, so the tableau is a
plain dense numpy array and no revised or sparse form is used.

`BoundedSimplex` runs phase I once for a feasible region and then solves any
number of cost vectors from that starting basis; oracles whose constraints
never change keep one around.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

try:
    from .errors import InvalidCostError
    from .opt_oracle import ModelSense, Solution
except ImportError:
    from src.errors import InvalidCostError
    from src.opt_oracle import ModelSense, Solution

logger = logging.getLogger(__name__)

PIVOT_EPS = 1e-9
FEAS_TOL = 1e-7
MAX_ITERATIONS = 100000
# consecutive zero-length steps before largest-coefficient pricing gives way to Bland
DEGENERATE_STREAK = 50


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class PivotRule(Enum):
    """
    Entering-variable choice.

    BLAND: smallest index with a negative reduced cost.
    DANTZIG: most negative reduced cost; switches to BLAND for the rest of the
    phase after DEGENERATE_STREAK degenerate steps, so it still terminates.
    """
    BLAND = "bland"
    DANTZIG = "dantzig"


@dataclass
class LpProblem:
    """Linear program in inequality form with optional equalities and bounds."""
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    sense: ModelSense = ModelSense.MINIMIZE

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        n = self.c.shape[0]
        self.A_ub = _as_matrix(self.A_ub, n)
        self.b_ub = np.asarray(self.b_ub if self.b_ub is not None else [], dtype=np.float64).reshape(-1)
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_eq = np.asarray(self.b_eq if self.b_eq is not None else [], dtype=np.float64).reshape(-1)
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=np.float64).reshape(-1)
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=np.float64).reshape(-1)
        if self.A_ub.shape[0] != self.b_ub.shape[0] or self.A_eq.shape[0] != self.b_eq.shape[0]:
            raise ValueError("constraint matrix and right-hand side lengths differ")
        if self.lo.shape[0] != n or self.hi.shape[0] != n:
            raise ValueError("bound vectors must match the number of variables")
        for arr in (self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq, self.lo):
            if not np.all(np.isfinite(arr)):
                raise InvalidCostError("LP data must be finite (lower bounds included)")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]


@dataclass
class LpResult:
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def to_solution(self) -> Solution:
        if not self.is_optimal:
            raise ValueError(f"LP has no optimal solution (status {self.status.value})")
        return Solution(values=self.x, objective=self.objective)


def _as_matrix(a, n: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    arr = np.asarray(a, dtype=np.float64)
    return arr.reshape(-1, n)


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row, :] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row, :])


class _Tableau:
    """
    Tableau over shifted variables y = x - lo, with complemented columns.

    A column j with flipped[j] set holds u_j - y_j; every nonbasic column
    sits at zero in that representation. The last row is the objective.
    """

    def __init__(self, T: np.ndarray, basis: List[int], upper: np.ndarray):
        self.T = T
        self.basis = basis
        self.upper = upper
        self.flipped = np.zeros(upper.shape[0], dtype=bool)

    def copy(self) -> "_Tableau":
        other = _Tableau(self.T.copy(), list(self.basis), self.upper)
        other.flipped = self.flipped.copy()
        return other

    @property
    def num_rows(self) -> int:
        return len(self.basis)

    def flip_nonbasic(self, col: int) -> None:
        self.T[:, -1] -= self.upper[col] * self.T[:, col]
        self.T[:, col] *= -1.0
        self.flipped[col] = not self.flipped[col]

    def flip_basic(self, row: int) -> None:
        b = self.basis[row]
        self.T[row, :] *= -1.0
        self.T[row, b] = 1.0
        self.T[row, -1] += self.upper[b]
        self.flipped[b] = not self.flipped[b]

    def values(self) -> np.ndarray:
        y = np.zeros(self.T.shape[1] - 1)
        for r, bv in enumerate(self.basis):
            y[bv] = self.T[r, -1]
        return np.where(self.flipped, self.upper - y, y)

    def iterate(self, rule: PivotRule, budget: int = MAX_ITERATIONS) -> Tuple[LpStatus, int]:
        T, upper = self.T, self.upper
        bland = rule is PivotRule.BLAND
        degenerate = 0
        for it in range(budget):
            reduced = T[-1, :-1]
            cand = np.flatnonzero(reduced < -PIVOT_EPS)
            if cand.size == 0:
                return LpStatus.OPTIMAL, it
            col = int(cand[0]) if bland else int(cand[np.argmin(reduced[cand])])

            column = T[:-1, col]
            rhs = np.maximum(T[:-1, -1], 0.0)
            basis = np.asarray(self.basis, dtype=np.int64)
            limits = np.full(column.shape[0], np.inf)
            down = column > PIVOT_EPS
            limits[down] = rhs[down] / column[down]
            cap = upper[basis] if basis.size else np.zeros(0)
            up = (column < -PIVOT_EPS) & np.isfinite(cap)
            limits[up] = np.maximum(cap[up] - rhs[up], 0.0) / -column[up]
            best = float(limits.min()) if limits.size else np.inf

            if upper[col] <= best:
                if not np.isfinite(upper[col]):
                    return LpStatus.UNBOUNDED, it
                step = float(upper[col])
                self.flip_nonbasic(col)
            else:
                step = best
                ties = np.flatnonzero(limits <= best + PIVOT_EPS * max(1.0, abs(best)))
                # Bland: among ties, the row whose basic variable has the smallest index
                row = int(min(ties, key=lambda r: self.basis[r]))
                if column[row] < 0.0:
                    self.flip_basic(row)
                _pivot(T, row, col)
                self.basis[row] = col

            degenerate = degenerate + 1 if step <= PIVOT_EPS else 0
            if not bland and degenerate > DEGENERATE_STREAK:
                bland = True
        return LpStatus.ITERATION_LIMIT, budget


def _standard_rows(problem: LpProblem) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """Constraint rows over y = x - lo, right-hand sides made nonnegative."""
    A = np.vstack([problem.A_ub, problem.A_eq])
    b = np.concatenate([problem.b_ub - problem.A_ub @ problem.lo, problem.b_eq - problem.A_eq @ problem.lo])
    signs = ["<="] * problem.A_ub.shape[0] + ["="] * problem.A_eq.shape[0]
    for i in np.flatnonzero(b < 0):
        A[i] *= -1.0
        b[i] *= -1.0
        if signs[i] == "<=":
            signs[i] = ">="
    return A, b, signs


class BoundedSimplex:
    """
    Feasible region of an LP with phase I already done.

    The cost vector of `problem` is ignored; pass costs to `solve`. Every
    solve starts from the same phase-I basis, so the result depends on the
    cost vector alone.
    """

    def __init__(self, problem: LpProblem, rule: PivotRule = PivotRule.BLAND):
        self.num_vars = problem.num_vars
        self.lo = problem.lo
        self.hi = problem.hi
        self.rule = PivotRule(rule)
        self.status: Optional[LpStatus] = None
        self.phase1_iterations = 0
        self._tableau: Optional[_Tableau] = None

        if np.any(problem.hi < problem.lo - FEAS_TOL):
            self.status = LpStatus.INFEASIBLE
            return
        self._tableau = self._phase_one(problem)

    @property
    def num_rows(self) -> int:
        """Constraint rows left after phase I."""
        return self._tableau.num_rows if self._tableau is not None else 0

    def _phase_one(self, problem: LpProblem) -> Optional[_Tableau]:
        n = self.num_vars
        A, b, signs = _standard_rows(problem)
        m = A.shape[0]
        n_slack = sum(1 for s in signs if s in ("<=", ">="))
        n_art = sum(1 for s in signs if s in ("=", ">="))
        total = n + n_slack + n_art
        art_start = n + n_slack

        T = np.zeros((m + 1, total + 1))
        T[:m, :n] = A
        T[:m, -1] = b
        basis: List[int] = []
        si, ai = n, art_start
        for i, s in enumerate(signs):
            if s != "=":
                T[i, si] = 1.0 if s == "<=" else -1.0
                si += 1
            if s == "<=":
                basis.append(si - 1)
            else:
                T[i, ai] = 1.0
                basis.append(ai)
                ai += 1
        upper = np.full(total, np.inf)
        upper[:n] = problem.hi - problem.lo
        tab = _Tableau(T, basis, upper)
        if not n_art:
            return tab

        # minimize the sum of artificials
        z = np.zeros(total + 1)
        z[art_start:total] = 1.0
        for r, bv in enumerate(basis):
            if bv >= art_start:
                z -= T[r]
        T[-1] = z
        status, it = tab.iterate(self.rule)
        self.phase1_iterations = it
        if status is not LpStatus.OPTIMAL:
            self.status = status
            return None
        if -T[-1, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            self.status = LpStatus.INFEASIBLE
            return None

        # drive artificials out of the basis, dropping redundant rows
        keep = []
        for r in range(m):
            if tab.basis[r] >= art_start:
                cand = np.flatnonzero(np.abs(T[r, :art_start]) > PIVOT_EPS)
                if cand.size:
                    _pivot(T, r, int(cand[0]))
                    tab.basis[r] = int(cand[0])
                    keep.append(r)
            else:
                keep.append(r)
        T = np.vstack([T[keep], T[-1:]])
        T = np.hstack([T[:, :art_start], T[:, -1:]])
        reduced = _Tableau(T, [tab.basis[r] for r in keep], upper[:art_start])
        reduced.flipped = tab.flipped[:art_start].copy()
        return reduced

    def solve(
        self,
        c: Sequence[float],
        sense: ModelSense = ModelSense.MINIMIZE,
        at_upper: Optional[Sequence[int]] = None,
    ) -> LpResult:
        """
        Phase II for cost vector `c`; statuses are returned, never raised.

        Args:
            c: Objective coefficients, one per variable
            sense: Minimize or maximize
            at_upper: Nonbasic variables to start at their upper bound. Ignored
                when that start would leave a basic variable out of its bounds.
        """
        if self._tableau is None:
            return LpResult(self.status, iterations=self.phase1_iterations)
        c = np.asarray(c, dtype=np.float64).reshape(-1)
        if c.shape[0] != self.num_vars:
            raise ValueError(f"cost has {c.shape[0]} entries, LP has {self.num_vars} variables")
        if not np.all(np.isfinite(c)):
            raise InvalidCostError("LP data must be finite (lower bounds included)")

        tab = self._crash(at_upper) if at_upper is not None else None
        if tab is None:
            tab = self._tableau.copy()
        T, n = tab.T, self.num_vars
        cost = np.zeros(T.shape[1] - 1)
        cost[:n] = c * ModelSense(sense).value
        cost = np.where(tab.flipped, -cost, cost)
        z = np.zeros(T.shape[1])
        z[:-1] = cost
        for r, bv in enumerate(tab.basis):
            if cost[bv] != 0.0:
                z -= cost[bv] * T[r]
        T[-1] = z
        status, it = tab.iterate(self.rule)
        iterations = self.phase1_iterations + it
        if status is not LpStatus.OPTIMAL:
            logger.debug(f"simplex stopped with status {status.value} after {iterations} pivots")
            return LpResult(status, iterations=iterations)

        y = tab.values()[:n]
        x = np.minimum(self.lo + np.maximum(y, 0.0), self.hi)
        return LpResult(LpStatus.OPTIMAL, x=x, objective=float(c @ x), iterations=iterations)

    def _crash(self, at_upper: Sequence[int]) -> Optional["_Tableau"]:
        cols = np.unique(np.asarray(at_upper, dtype=np.int64))
        tab = self._tableau
        if cols.size == 0:
            return None
        if np.any(cols >= self.num_vars) or np.any(np.isin(cols, tab.basis)):
            raise ValueError("at_upper must name nonbasic structural variables")
        cols = cols[~tab.flipped[cols]]
        if not np.all(np.isfinite(tab.upper[cols])):
            return None
        shifted = tab.T[:-1, -1] - tab.T[:-1, cols] @ tab.upper[cols]
        caps = tab.upper[np.asarray(tab.basis, dtype=np.int64)]
        if np.any(shifted < -FEAS_TOL) or np.any(shifted > caps + FEAS_TOL):
            return None
        crashed = tab.copy()
        for col in cols:
            crashed.flip_nonbasic(int(col))
        return crashed


def simplex_solve(problem: LpProblem, rule: PivotRule = PivotRule.BLAND) -> LpResult:
    """
    Solve an LP with the two-phase simplex method.

    Args:
        problem: LP data; infeasibility and unboundedness are statuses, not errors
        rule: Entering-variable rule (Bland by default)

    Returns:
        LpResult with a primal-optimal basic solution when status is OPTIMAL
    """
    return BoundedSimplex(problem, rule).solve(problem.c, problem.sense)
