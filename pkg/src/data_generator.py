"""
Data Generator Module

Synthetic feature/cost datasets for the shortest path, multi-dimensional
knapsack and TSP benchmarks.

Every random quantity comes from its own substream of the dataset seed,
split with numpy's SeedSequence:

    seed -> [features, b_matrix, noise, weights, coordinates]

so changing n leaves the B matrix, the knapsack weights and the TSP
coordinates untouched.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

try:
    from .shortest_path_solver import GridSpec
    from .tsp_solver import TspSpec
except ImportError:
    from src.shortest_path_solver import GridSpec
    from src.tsp_solver import TspSpec

logger = logging.getLogger(__name__)

SUBSTREAMS = ("features", "b_matrix", "noise", "weights", "coordinates")


@dataclass(frozen=True)
class GenSpec:
    """Common generator parameters plus the problem-specific size."""
    n: int
    p: int
    deg: int = 1
    noise_width: float = 0.0
    seed: int = 0
    grid: Optional[Tuple[int, int]] = None
    num_items: Optional[int] = None
    num_resources: Optional[int] = None
    num_nodes: Optional[int] = None

    def validate(self) -> None:
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be at least 1")
        if self.deg < 1:
            raise ValueError("deg must be at least 1")
        if not 0.0 <= self.noise_width < 1.0:
            raise ValueError("noise half-width must lie in [0, 1)")


@dataclass
class GeneratedData:
    features: np.ndarray
    costs: np.ndarray
    weights: Optional[np.ndarray] = None
    coordinates: Optional[np.ndarray] = None


def substreams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent generators for each random component of a dataset."""
    children = np.random.SeedSequence(int(seed)).spawn(len(SUBSTREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(SUBSTREAMS, children)}


def _features_and_noise(spec: GenSpec, d: int, streams: Dict[str, np.random.Generator]) -> Tuple[np.ndarray, np.ndarray]:
    x = streams["features"].standard_normal((spec.n, spec.p))
    eps = streams["noise"].uniform(1.0 - spec.noise_width, 1.0 + spec.noise_width, size=(spec.n, d))
    return x, eps


def _polynomial_costs(spec: GenSpec, x: np.ndarray, B: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """[(1/3.5^deg)((Bx)_j/sqrt(p) + 3)^deg + 1] * eps, noise on the whole bracket."""
    signal = (x @ B.T) / np.sqrt(spec.p) + 3.0
    return (signal ** spec.deg / 3.5 ** spec.deg + 1.0) * eps


def gen_shortest_path(spec: GenSpec) -> GeneratedData:
    """Features and arc costs for an h x w grid."""
    spec.validate()
    if spec.grid is None:
        raise ValueError("shortest path generation needs grid=(h, w)")
    d = GridSpec(*spec.grid).num_arcs
    streams = substreams(spec.seed)
    B = streams["b_matrix"].binomial(1, 0.5, size=(d, spec.p)).astype(np.float64)
    x, eps = _features_and_noise(spec, d, streams)
    costs = _polynomial_costs(spec, x, B, eps)
    logger.debug(f"generated shortest path data: n={spec.n}, p={spec.p}, d={d}")
    return GeneratedData(features=x, costs=costs)


def gen_knapsack(spec: GenSpec) -> GeneratedData:
    """
    Features, item values and a k x d weight matrix.

    Weights are drawn from the 51-point lattice {3.0, 3.1, ..., 8.0}.
    Capacities are not generated here.
    """
    spec.validate()
    if not spec.num_items or not spec.num_resources:
        raise ValueError("knapsack generation needs num_items and num_resources")
    d, k = spec.num_items, spec.num_resources
    streams = substreams(spec.seed)
    weights = streams["weights"].integers(30, 81, size=(k, d)) / 10.0
    B = streams["b_matrix"].binomial(1, 0.5, size=(d, spec.p)).astype(np.float64)
    x, eps = _features_and_noise(spec, d, streams)
    costs = _polynomial_costs(spec, x, B, eps)
    return GeneratedData(features=x, costs=costs, weights=weights)


def tsp_coordinates(num_nodes: int, rng: np.random.Generator) -> np.ndarray:
    """Per node, a fair coin picks N(0, I) or U(-2, 2)^2."""
    gaussian = rng.standard_normal((num_nodes, 2))
    uniform = rng.uniform(-2.0, 2.0, size=(num_nodes, 2))
    coin = rng.random(num_nodes) < 0.5
    return np.where(coin[:, None], gaussian, uniform)


def gen_tsp(spec: GenSpec) -> GeneratedData:
    """Edge costs = Euclidean distance + polynomial feature kernel."""
    spec.validate()
    if spec.num_nodes is None or spec.num_nodes < 3:
        raise ValueError("TSP generation needs num_nodes >= 3")
    tsp = TspSpec(spec.num_nodes)
    d = tsp.num_edges
    streams = substreams(spec.seed)
    coords = tsp_coordinates(spec.num_nodes, streams["coordinates"])
    dist = np.array([np.linalg.norm(coords[i] - coords[j]) for i, j in tsp.edges])
    rng_b = streams["b_matrix"]
    B = rng_b.binomial(1, 0.5, size=(d, spec.p)) * rng_b.uniform(-2.0, 2.0, size=(d, spec.p))
    x, eps = _features_and_noise(spec, d, streams)
    kernel = ((x @ B.T) / np.sqrt(spec.p) + 3.0) ** spec.deg / 3.0 ** (spec.deg - 1) * eps
    costs = dist[None, :] + kernel
    return GeneratedData(features=x, costs=costs, coordinates=coords)
