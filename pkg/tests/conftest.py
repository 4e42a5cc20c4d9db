"""
Shared fixtures and the --runslow switch for the acceptance runs.
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.knapsack_solver import KnapsackOracle, KnapsackSpec
from src.opt_oracle import FiniteSetOracle, ModelSense
from src.shortest_path_solver import GridSpec, ShortestPathOracle
from src.tsp_solver import TspOracle, TspSpec


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance replication (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid2():
    """2x2 grid; arcs 0:(0,1) 1:(0,2) 2:(1,3) 3:(2,3)."""
    return ShortestPathOracle(GridSpec(2, 2))


@pytest.fixture
def grid3():
    return ShortestPathOracle(GridSpec(3, 3))


@pytest.fixture
def grid5():
    return ShortestPathOracle(GridSpec(5, 5))


@pytest.fixture
def small_knapsack():
    weights = np.array([
        [3.0, 4.0, 5.0, 6.0, 3.5, 7.0, 4.2, 5.1],
        [5.0, 3.0, 4.0, 3.3, 6.0, 4.4, 5.5, 3.8],
    ])
    return KnapsackOracle(KnapsackSpec(weights, np.array([15.0, 15.0])))


@pytest.fixture
def tsp6():
    return TspOracle(TspSpec(6))


@pytest.fixture
def two_point():
    """1-D feasible set {0, 1}, minimization."""
    return FiniteSetOracle([[0.0], [1.0]], ModelSense.MINIMIZE)
