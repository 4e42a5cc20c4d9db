"""
Solve Pool Module

Fans per-sample solves out to worker processes, each holding its own
oracle replica. Results come back in input order, so every caller stays
deterministic regardless of the worker count.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
from typing import Optional, Tuple

import numpy as np

try:
    from .errors import DecisionToolkitError, SolverFailureError
    from .import_utils import get_setting
    from .opt_oracle import OptimizationOracle, as_cost_vector
except ImportError:
    from src.errors import DecisionToolkitError, SolverFailureError
    from src.import_utils import get_setting
    from src.opt_oracle import OptimizationOracle, as_cost_vector

logger = logging.getLogger(__name__)

# Oracle replica owned by the current worker process
_worker_oracle: Optional[OptimizationOracle] = None


def _init_worker(oracle: OptimizationOracle) -> None:
    global _worker_oracle
    _worker_oracle = oracle.replicate()


def _solve_row(task: Tuple[int, np.ndarray]) -> np.ndarray:
    row, cost = task
    return _solve_with(_worker_oracle, row, cost)


def _solve_with(oracle: OptimizationOracle, row: int, cost: np.ndarray) -> np.ndarray:
    try:
        c = as_cost_vector(cost, oracle.decision_dim)
        return np.asarray(oracle._solve_values(c), dtype=np.float64)
    except DecisionToolkitError as e:
        if isinstance(e, SolverFailureError):
            raise
        raise SolverFailureError(str(e), row=row) from e
    except Exception as e:
        raise SolverFailureError(f"{type(e).__name__}: {e}", row=row) from e


class SolvePool:
    """
    Context-managed pool of oracle replicas.

    Args:
        oracle: Oracle to replicate into every worker
        workers: Number of processes; 1 solves inline in the calling process
    """

    def __init__(self, oracle: OptimizationOracle, workers: Optional[int] = None):
        self.oracle = oracle
        self.workers = int(workers or get_setting("DEFAULT_WORKERS", 1))
        self._pool = None
        if self.workers > 1:
            self._pool = mp.get_context().Pool(
                processes=self.workers, initializer=_init_worker, initargs=(oracle,)
            )
            logger.debug(f"started solve pool with {self.workers} workers for {oracle.kind}")

    def __enter__(self) -> "SolvePool":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def solve_many(self, costs: np.ndarray) -> np.ndarray:
        """Solutions (n x d) for the rows of `costs`, given in the oracle's own sense."""
        costs = np.atleast_2d(np.asarray(costs, dtype=np.float64))
        if self._pool is None:
            rows = [_solve_with(self.oracle, i, c) for i, c in enumerate(costs)]
        else:
            chunk = max(1, len(costs) // (4 * self.workers))
            rows = self._pool.map(_solve_row, list(enumerate(costs)), chunksize=chunk)
        if not rows:
            return np.zeros((0, self.oracle.decision_dim))
        return np.vstack(rows)

    def solve_many_min(self, costs_min: np.ndarray) -> np.ndarray:
        """Solutions for minimization-normalized costs."""
        costs_min = np.atleast_2d(np.asarray(costs_min, dtype=np.float64))
        return self.solve_many(costs_min * self.oracle.sense.value)
