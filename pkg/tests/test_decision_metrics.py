"""
Tests for regret, unambiguous regret and the evaluation report.
"""

import numpy as np
import pytest

from src.data_generator import GenSpec, gen_shortest_path
from src.decision_dataset import build_dataset, unsolved_dataset
from src.decision_metrics import (
    EvaluationReport,
    evaluate,
    normalized_regret,
    regret_per_instance,
    unambiguous_regret_single,
)
from src.errors import UnsupportedCapabilityError
from src.linear_predictor import LinearPredictor
from src.opt_oracle import OptimizationOracle
from src.tsp_solver import TspOracle, TspSpec


class FixedCosts:
    """Stand-in model that ignores features."""

    def __init__(self, costs):
        self.costs = np.atleast_2d(np.asarray(costs, dtype=float))

    def predict(self, X):
        return np.repeat(self.costs, len(X), axis=0) if len(self.costs) == 1 else self.costs


class Echo:
    """Returns the true costs, optionally scaled."""

    def __init__(self, costs, scale=1.0):
        self.costs, self.scale = costs, scale

    def predict(self, X):
        return self.costs * self.scale


class NoEnumeration(OptimizationOracle):
    kind = "argmin"

    @property
    def decision_dim(self):
        return 2

    def _solve_values(self, cost):
        return np.eye(2)[int(np.argmin(cost))]


@pytest.fixture
def sp_data(grid3):
    data = gen_shortest_path(GenSpec(n=40, p=3, deg=2, noise_width=0.3, seed=1, grid=(3, 3)))
    return build_dataset(grid3, data.features, data.costs)


def test_tied_prediction_has_zero_regret(grid2):
    ds = build_dataset(grid2, [[0.0]], [[1.0, 1.0, 1.0, 1.0]])
    report = evaluate(FixedCosts([1.0, 5.0, 1.0, 5.0]), grid2, ds, want_unambiguous=True)
    assert report.normalized_regret == 0.0
    assert report.normalized_unambiguous_regret == 0.0


def test_unambiguous_regret_takes_worst_optimum(grid2):
    # predicted costs tie both paths; true costs 2 and 18
    value = unambiguous_regret_single([1.0, 1.0, 1.0, 1.0], [1.0, 9.0, 1.0, 9.0], 2.0, grid2)
    assert value == pytest.approx(16.0)

    ds = build_dataset(grid2, [[0.0]], [[1.0, 9.0, 1.0, 9.0]])
    report = evaluate(FixedCosts([1.0, 1.0, 1.0, 1.0]), grid2, ds, want_unambiguous=True)
    # tie-break picks the upper path, which is the true optimum
    assert report.normalized_regret == 0.0
    assert report.normalized_unambiguous_regret == pytest.approx(16.0 / 2.0)


def test_unique_optimum_unambiguous_equals_plain(grid3, sp_data, rng):
    pred = sp_data.costs + rng.normal(scale=0.3, size=sp_data.costs.shape)
    report = evaluate(Echo(pred), grid3, sp_data, want_unambiguous=True)
    assert report.normalized_unambiguous_regret == pytest.approx(report.normalized_regret)


def test_perfect_predictor(grid3, sp_data):
    report = evaluate(Echo(sp_data.costs), grid3, sp_data)
    assert report.normalized_regret == 0.0
    assert report.mse == 0.0
    assert report.solution_accuracy == 1.0
    assert report.per_instance_regret.shape == (40,)


def test_scaled_predictor_has_regret_zero_but_mse(grid3, sp_data):
    report = evaluate(Echo(sp_data.costs, scale=2.0), grid3, sp_data)
    assert report.normalized_regret == pytest.approx(0.0, abs=1e-12)
    assert report.mse > 0.0


def test_regret_nonnegative_for_maximization(small_knapsack, rng):
    C = rng.uniform(0.0, 5.0, size=(15, 8))
    ds = build_dataset(small_knapsack, np.zeros((15, 1)), C)
    regret = regret_per_instance(Echo(rng.uniform(0.0, 5.0, size=(15, 8))), small_knapsack, ds)
    assert np.all(regret >= -1e-9)
    assert regret.sum() > 0.0


def test_linear_predictor_is_accepted(grid3, sp_data):
    model = LinearPredictor.zeros(sp_data.num_feat, sp_data.num_cost)
    assert normalized_regret(model, grid3, sp_data) >= 0.0


def test_relaxed_solutions_are_rounded(small_knapsack, rng):
    C = rng.uniform(0.0, 5.0, size=(5, 8))
    ds = build_dataset(small_knapsack, np.zeros((5, 1)), C)
    report = evaluate(Echo(C), small_knapsack.relax(), ds)
    assert report.solution_accuracy is not None
    assert 0.0 <= report.solution_accuracy <= 1.0


def test_enumeration_budget_falls_back(grid3, sp_data):
    # all-zero predictions tie all six paths, over a budget of 2
    report = evaluate(FixedCosts(np.zeros(12)), grid3, sp_data, want_unambiguous=True, budget=2)
    assert report.unambiguous_fallbacks == 40
    assert report.normalized_unambiguous_regret == pytest.approx(report.normalized_regret)


def test_unsupported_unambiguous():
    oracle = NoEnumeration()
    ds = build_dataset(oracle, [[0.0]], [[1.0, 2.0]])
    with pytest.raises(UnsupportedCapabilityError):
        evaluate(FixedCosts([1.0, 2.0]), oracle, ds, want_unambiguous=True)
    assert evaluate(FixedCosts([1.0, 2.0]), oracle, ds).normalized_regret == 0.0


def test_unsolved_dataset_rejected(grid2):
    ds = unsolved_dataset(grid2, [[0.0]], [[1.0, 1.0, 1.0, 1.0]])
    with pytest.raises(UnsupportedCapabilityError):
        evaluate(FixedCosts([1.0, 1.0, 1.0, 1.0]), grid2, ds)


def test_large_tsp_falls_back_to_plain_regret():
    oracle = TspOracle(TspSpec(10))
    ds = build_dataset(oracle, [[0.0]], [np.arange(1.0, 46.0)])
    report = evaluate(FixedCosts(np.arange(1.0, 46.0)), oracle, ds, want_unambiguous=True)
    assert report.unambiguous_fallbacks == 1


def test_report_text():
    report = EvaluationReport(normalized_regret=0.125, mse=2.0, per_instance_regret=np.zeros(3))
    text = report.to_text()
    assert "normalized_regret = 0.125" in text
    assert "solution_accuracy = n/a" in text
    assert "instances = 3" in text
