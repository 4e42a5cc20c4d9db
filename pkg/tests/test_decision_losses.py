"""
Tests for SPO+, DBB, DPO, PFYL and the downstream losses.
"""

import numpy as np
import pytest
from scipy.stats import norm

from src.decision_losses import (
    DownstreamLoss,
    PerturbationConfig,
    dbb_backward,
    dbb_forward,
    downstream_loss_eval,
    dpo_backward,
    dpo_forward,
    dpo_jacobian,
    pfyl_loss_and_grad,
    regret_eval,
    spo_plus_forward,
    spo_plus_grad,
    spo_plus_loss,
)
from src.errors import DimensionMismatchError
from src.opt_oracle import solve

# few enough solves to stay quick, enough for a 4-sigma band
MC_SAMPLES = 20000


def true_solutions(oracle, C):
    sols = [solve(oracle, c) for c in C]
    return np.vstack([s.values for s in sols]), np.array([s.objective for s in sols])


class TestSpoPlus:

    def test_zero_at_truth(self, grid3, rng):
        C = rng.uniform(0.0, 5.0, size=(10, grid3.decision_dim))
        W, z = true_solutions(grid3, C)
        assert spo_plus_loss(C, C, W, z, grid3) == pytest.approx(np.zeros(10), abs=1e-9)

    def test_bounds_regret(self, grid3, rng):
        C = rng.uniform(0.0, 5.0, size=(50, grid3.decision_dim))
        W, z = true_solutions(grid3, C)
        pred = C + rng.normal(scale=2.0, size=C.shape)
        loss = spo_plus_loss(pred, C, W, z, grid3)
        regret = regret_eval(pred, C, z, grid3)
        assert np.all(regret >= -1e-9)
        assert np.all(regret <= loss + 1e-9)

    def test_bounds_regret_maximization(self, small_knapsack, rng):
        C = rng.uniform(0.0, 5.0, size=(20, small_knapsack.decision_dim))
        W, z = true_solutions(small_knapsack, C)
        pred = C + rng.normal(scale=2.0, size=C.shape)
        loss = spo_plus_loss(pred, C, W, z, small_knapsack)
        regret = regret_eval(pred, C, z, small_knapsack)
        assert np.all(regret >= -1e-9)
        assert np.all(regret <= loss + 1e-9)

    def test_single_vector_and_gradient(self, grid2):
        c = np.array([1.0, 5.0, 1.0, 5.0])
        sol = solve(grid2, c)
        pred = np.array([5.0, 1.0, 5.0, 1.0])
        loss, state = spo_plus_forward(pred, c, sol.values, sol.objective, grid2)
        assert isinstance(loss, float)
        # 2c_hat - c = [9, -3, 9, -3], minimized by the lower path
        assert loss == pytest.approx(-(-6.0) + 2.0 * 10.0 - 2.0)
        assert spo_plus_grad(state).tolist() == [2.0, -2.0, 2.0, -2.0]

    def test_dimension_mismatch(self, grid2):
        with pytest.raises(DimensionMismatchError):
            spo_plus_loss([1.0, 2.0], [1.0, 2.0], [1.0, 0.0], 1.0, grid2)


class TestDbb:

    def test_forward_is_plain_solve(self, grid3, rng):
        c = rng.uniform(0.0, 5.0, grid3.decision_dim)
        w, _ = dbb_forward(c, grid3)
        assert w.tolist() == solve(grid3, c).values.tolist()

    def test_no_change_gives_zero_gradient(self, grid2):
        _, state = dbb_forward([1.0, 5.0, 1.0, 5.0], grid2)
        grad = dbb_backward(state, np.full(4, 0.01), lambd=1.0)
        assert grad.tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_interpolated_step(self, grid2):
        _, state = dbb_forward([1.0, 1.5, 1.0, 1.5], grid2)
        # shifted costs [3, 1.5, 1, 1.5] switch to the lower path
        grad = dbb_backward(state, [1.0, 0.0, 0.0, 0.0], lambd=2.0)
        assert grad == pytest.approx([-0.5, 0.5, -0.5, 0.5])

    @pytest.mark.parametrize("lambd", [0.0, -1.0])
    def test_lambda_must_be_positive(self, grid2, lambd):
        _, state = dbb_forward([1.0, 5.0, 1.0, 5.0], grid2)
        with pytest.raises(ValueError, match="lambda must be positive"):
            dbb_backward(state, np.ones(4), lambd=lambd)


class TestPerturbed:

    @pytest.mark.parametrize("c_hat", [-1.0, 0.0, 0.5])
    @pytest.mark.parametrize("sigma", [0.5, 1.0])
    def test_dpo_expectation_closed_form(self, two_point, rng, c_hat, sigma):
        cfg = PerturbationConfig(n_samples=MC_SAMPLES, sigma=sigma)
        mean, state = dpo_forward([c_hat], cfg, two_point, rng)
        p = norm.cdf(-c_hat / sigma)
        se = np.sqrt(p * (1 - p) / MC_SAMPLES)
        assert abs(mean[0] - p) <= 4 * se

        # d/dc_hat of P(c_hat + sigma xi < 0) is -pdf(c_hat / sigma) / sigma
        jac = dpo_jacobian(state, cfg)[0, 0, 0]
        assert jac == pytest.approx(-norm.pdf(c_hat / sigma) / sigma, abs=4 / (sigma * np.sqrt(MC_SAMPLES)))

    def test_dpo_backward_matches_jacobian(self, grid2, rng):
        cfg = PerturbationConfig(n_samples=8, sigma=1.0)
        _, state = dpo_forward([1.0, 1.2, 0.8, 1.1], cfg, grid2, rng)
        g = np.array([0.3, -1.0, 2.0, 0.5])
        J = dpo_jacobian(state, cfg)[0]
        assert dpo_backward(state, g, cfg) == pytest.approx(J.T @ g)

    def test_unscaled_jacobian_drops_sigma(self, grid2):
        scaled = PerturbationConfig(n_samples=4, sigma=0.5)
        unscaled = PerturbationConfig(n_samples=4, sigma=0.5, unscaled_jacobian=True)
        _, state = dpo_forward([1.0, 1.2, 0.8, 1.1], scaled, grid2, np.random.default_rng(3))
        assert dpo_jacobian(state, unscaled) == pytest.approx(dpo_jacobian(state, scaled) * 0.5)

    def test_noise_depends_only_on_rng(self, grid3):
        cfg = PerturbationConfig(n_samples=5, sigma=1.0)
        a, _ = dpo_forward(np.ones(grid3.decision_dim), cfg, grid3, np.random.default_rng(9))
        b, _ = dpo_forward(np.ones(grid3.decision_dim), cfg, grid3, np.random.default_rng(9))
        assert a.tolist() == b.tolist()

    @pytest.mark.parametrize("c_hat", [-1.0, 0.5])
    def test_pfyl_gradient_closed_form(self, two_point, rng, c_hat):
        cfg = PerturbationConfig(n_samples=MC_SAMPLES, sigma=1.0)
        _, grad = pfyl_loss_and_grad([c_hat], [0.0], cfg, two_point, rng)
        p = norm.cdf(-c_hat)
        se = np.sqrt(p * (1 - p) / MC_SAMPLES)
        assert abs(grad[0] - (0.0 - p)) <= 4 * se

    def test_pfyl_gradient_vanishes_on_confident_truth(self, grid2, rng):
        # true path far cheaper than the other, noise never flips it
        cfg = PerturbationConfig(n_samples=10, sigma=0.01)
        c = np.array([1.0, 50.0, 1.0, 50.0])
        _, grad = pfyl_loss_and_grad(c, solve(grid2, c).values, cfg, grid2, rng)
        assert grad.tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PerturbationConfig(n_samples=0)
        with pytest.raises(ValueError):
            PerturbationConfig(sigma=0.0)


class TestDownstream:

    def test_regret_kind(self):
        loss, grad = downstream_loss_eval(DownstreamLoss.REGRET, [0.0, 1.0], [2.0, 3.0], objective=2.0)
        assert loss == pytest.approx(1.0)
        assert grad.tolist() == [2.0, 3.0]

    def test_hamming(self):
        loss, grad = downstream_loss_eval("hamming", [1.0, 0.0, 1.0], [1.0, 1.0, 0.0])
        assert loss == 2.0
        assert grad.tolist() == [-1.0, -1.0, 1.0]

    def test_hamming_rejects_fractional(self):
        with pytest.raises(ValueError):
            downstream_loss_eval(DownstreamLoss.HAMMING, [0.5, 0.5], [1.0, 0.0])

    def test_squared_error(self):
        loss, grad = downstream_loss_eval(DownstreamLoss.SQUARED_ERROR, [0.5, 0.5], [1.0, 0.0])
        assert loss == pytest.approx(0.5)
        assert grad == pytest.approx([-1.0, 1.0])


class TestOneDimensional:
    """Feasible set {0, 1}, minimization; every value below checked by hand."""

    def test_spo_plus_loss_and_gradient(self, two_point):
        loss, state = spo_plus_forward([-1.0], [1.0], [0.0], 0.0, two_point)
        assert loss == pytest.approx(3.0)
        assert regret_eval([-1.0], [1.0], 0.0, two_point) == pytest.approx(1.0)
        assert spo_plus_grad(state).tolist() == [-2.0]

    @pytest.mark.parametrize("lambd,expected", [(2.0, 0.5), (0.5, 0.0)])
    def test_dbb_gradient(self, two_point, lambd, expected):
        _, state = dbb_forward([1.0], two_point)
        assert dbb_backward(state, [-1.0], lambd=lambd).tolist() == [expected]

    def test_single_sample_dpo_gradient(self, two_point):
        cfg = PerturbationConfig(n_samples=1, sigma=0.5)
        w, state = dpo_forward([0.1], cfg, two_point, np.random.default_rng(4))
        xi = state.noise[0, 0, 0]
        assert w.tolist() in ([0.0], [1.0])
        assert dpo_backward(state, [2.0], cfg)[0] == pytest.approx(w[0] * xi / 0.5 * 2.0)
