import numpy as np
import pytest

from subsearch.objectives import (
    CountingObjective,
    LinearQuadraticRollout,
    make_planted_quadratic,
)
from subsearch.rng import RngStream


def central_difference(objective, params, step=1e-5):
    """Independent finite-difference gradient oracle."""
    grad = np.empty(len(params))
    for i in range(len(params)):
        bumped = params.copy()
        bumped[i] += step
        up = objective.true_value(bumped)
        bumped[i] -= 2 * step
        down = objective.true_value(bumped)
        grad[i] = (up - down) / (2 * step)
    return grad


class TestPlantedQuadratic:
    def test_maximum_at_optimum(self):
        obj = make_planted_quadratic(50, 5, seed=1)
        assert obj.true_value(obj.optimum) == 0.0

    def test_unit_step_along_planted_direction(self):
        # lambda_1 = -2, theta = optimum + b_1: value is exactly -2.
        obj = make_planted_quadratic(30, 3, spectrum=[-2.0, -1.0, -0.5], seed=2)
        theta = obj.optimum + obj.basis[:, 0]
        assert obj.true_value(theta) == pytest.approx(-2.0, abs=1e-12)

    def test_gradient_zero_at_optimum(self):
        obj = make_planted_quadratic(40, 4, seed=3)
        np.testing.assert_allclose(obj.gradient(obj.optimum), np.zeros(40), atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        obj = make_planted_quadratic(20, 6, seed=4)
        rng = RngStream(4)
        for _ in range(5):
            theta = rng.normal(20)
            g = obj.gradient(theta)
            fd = central_difference(obj, theta)
            assert np.max(np.abs(g - fd)) <= 1e-6 * (1.0 + np.max(np.abs(g)))

    def test_gradient_lies_in_planted_span(self):
        obj = make_planted_quadratic(60, 8, seed=5)
        theta = RngStream(5).normal(60)
        g = obj.gradient(theta)
        outside = g - obj.basis @ (obj.basis.T @ g)
        assert np.linalg.norm(outside) <= 1e-10

    def test_basis_orthonormal(self):
        obj = make_planted_quadratic(100, 10, seed=6)
        gram = obj.basis.T @ obj.basis
        assert np.max(np.abs(gram - np.eye(10))) <= 1e-10

    def test_same_seed_same_instance(self):
        a = make_planted_quadratic(30, 4, seed=7)
        b = make_planted_quadratic(30, 4, seed=7)
        assert np.array_equal(a.basis, b.basis)
        assert np.array_equal(a.optimum, b.optimum)

    def test_effective_dim_validated(self):
        with pytest.raises(ValueError):
            make_planted_quadratic(5, 6)

    def test_concavity(self):
        obj = make_planted_quadratic(25, 5, seed=8)
        rng = RngStream(8)
        for _ in range(50):
            t1, t2 = rng.normal(25), rng.normal(25)
            mid = obj.true_value((t1 + t2) / 2.0)
            avg = (obj.true_value(t1) + obj.true_value(t2)) / 2.0
            assert mid >= avg - 1e-12

    def test_hessian_rank_on_random_slice(self):
        # Brute-force the Hessian restricted to a random 20-dim slice of a
        # 1000-dim instance: its rank is the effective dimension.
        obj = make_planted_quadratic(1000, 10, seed=9)
        slice_basis, _ = np.linalg.qr(RngStream(9).normal((1000, 20)))
        # H = 2 B diag(spectrum) B^T restricted to the slice
        inner = obj.basis.T @ slice_basis  # (10, 20)
        restricted = 2.0 * inner.T @ np.diag(obj.spectrum) @ inner
        eigvals = np.linalg.eigvalsh(restricted)
        rank = int(np.count_nonzero(np.abs(eigvals) > 1e-10))
        assert rank == 10

    def test_noisy_evaluation_deterministic_given_seed(self):
        obj = make_planted_quadratic(20, 3, seed=10, noise_std=0.5)
        theta = RngStream(10).normal(20)
        assert obj.evaluate(theta, eval_seed=123) == obj.evaluate(theta, eval_seed=123)
        assert obj.evaluate(theta, eval_seed=123) != obj.evaluate(theta, eval_seed=124)

    def test_non_finite_params_rejected(self):
        obj = make_planted_quadratic(4, 2, seed=11)
        with pytest.raises(ValueError):
            obj.evaluate(np.array([1.0, np.inf, 0.0, 0.0]))


class TestLinearQuadraticRollout:
    def test_null_trajectory_scores_zero(self):
        obj = LinearQuadraticRollout(state_dim=3, action_dim=2, horizon=10, seed=0,
                                     initial_state=np.zeros(3))
        assert obj.true_value(np.zeros(obj.dim)) == 0.0

    def test_deterministic_rollout(self):
        obj = LinearQuadraticRollout(seed=1)
        theta = RngStream(1).normal(obj.dim) * 0.1
        assert obj.true_value(theta) == obj.true_value(theta)

    def test_dynamics_are_stable(self):
        obj = LinearQuadraticRollout(seed=2)
        radius = max(np.abs(np.linalg.eigvals(obj.dynamics)))
        assert radius == pytest.approx(0.95, abs=1e-10)

    def test_gradient_matches_finite_differences(self):
        obj = LinearQuadraticRollout(state_dim=3, action_dim=2, horizon=20, seed=3)
        rng = RngStream(3)
        for _ in range(5):
            theta = 0.05 * rng.normal(obj.dim)
            g = obj.gradient(theta)
            fd = central_difference(obj, theta)
            scale = 1.0 + np.max(np.abs(g))
            assert np.max(np.abs(g - fd)) <= 1e-5 * scale

    def test_returns_are_negative_costs(self):
        obj = LinearQuadraticRollout(seed=4)
        theta = 0.01 * RngStream(4).normal(obj.dim)
        assert obj.true_value(theta) <= 0.0


class TestCountingObjective:
    def test_counts_true_evaluations_only(self):
        inner = make_planted_quadratic(10, 2, seed=12)
        counted = CountingObjective(inner)
        theta = np.zeros(10)
        counted.evaluate(theta)
        counted.evaluate(theta, eval_seed=1)
        counted.gradient(theta)   # gradient calls are not rollouts
        counted.true_value(theta)  # nor are reporting reads
        assert counted.eval_count == 2
