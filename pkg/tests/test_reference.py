from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from vqasvm.circuits import FeatureMapSpec
from vqasvm.datasets import LabeledData, random_training_set
from vqasvm.estimation import Hyperparams
from vqasvm.reference import (
    SolverError,
    brute_force_simplex_oracle,
    classical_baseline_predict,
    hamiltonian_expectation,
    kernel_matrix,
    objective_hamiltonian_diagonal,
    polynomial_kernel,
    project_to_balanced_orthant,
    project_to_simplex,
    rbf_kernel,
    simplex_objective,
    solve_dual_svm,
    solve_hard_margin_dual,
    solve_probability_simplex_qp,
    validate_kernel,
)
from vqasvm.simulator import make_rng

HP = Hyperparams(lam=10.0, C=10.0)


def _kernel(M: int, seed: int, fmap: FeatureMapSpec = FeatureMapSpec.bloch()):
    S = random_training_set(M, fmap.feature_dim, seed=seed)
    return kernel_matrix(S, fmap), S.labels


def test_kernel_matrix_is_symmetric_with_unit_diagonal():
    K, _ = _kernel(8, 3, FeatureMapSpec.zz(2))
    assert np.array_equal(K, K.T)
    assert np.diag(K) == pytest.approx(np.ones(8))
    assert np.linalg.eigvalsh(K).min() > -1e-10


def test_validate_kernel_rejects_indefinite_and_asymmetric():
    with pytest.raises(SolverError):
        validate_kernel(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SolverError):
        validate_kernel(np.array([[1.0, 0.2], [0.3, 1.0]]))


def test_projection_onto_simplex():
    projected = project_to_simplex([0.5, 2.0, -1.0])
    assert projected.sum() == pytest.approx(1.0)
    assert np.all(projected >= 0)
    inside = np.array([0.2, 0.3, 0.5])
    assert project_to_simplex(inside) == pytest.approx(inside)


def test_balanced_projection_keeps_label_sum_zero():
    y = np.array([1, 1, -1, -1, 1])
    beta = project_to_balanced_orthant([0.3, -0.2, 1.5, 0.1, 0.8], y)
    assert np.all(beta >= 0)
    assert float(np.dot(beta, y)) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_duality_bridge(seed):
    M = 2 ** (1 + seed % 3)
    K, y = _kernel(M, seed)
    simplex = solve_probability_simplex_qp(K, y, HP)
    dual = solve_dual_svm(K, y, HP)
    assert simplex.alpha.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(simplex.alpha >= 0)
    assert dual.value == pytest.approx(1.0 / (2.0 * simplex.objective), rel=1e-6)
    assert simplex.beta == pytest.approx(simplex.alpha * simplex.B)


def test_symmetric_pair_has_uniform_optimum():
    S = LabeledData([[0.3, 0.1], [2.1, -1.0]], [1, -1])
    K = kernel_matrix(S, FeatureMapSpec.bloch())
    result = solve_probability_simplex_qp(K, S.labels, Hyperparams(1e4, 1e4))
    assert result.alpha == pytest.approx([0.5, 0.5], abs=1e-9)


@pytest.mark.parametrize("M, resolution", [(2, 1e-3), (4, 1.0 / 400)])
def test_simplex_solver_agrees_with_grid_search(M, resolution):
    K, y = _kernel(M, 10 + M)
    solved = solve_probability_simplex_qp(K, y, HP)
    grid_alpha, grid_value = brute_force_simplex_oracle(K, y, HP, grid_resolution=resolution)
    assert solved.objective <= grid_value + 1e-9
    assert grid_value - solved.objective < 1e-4
    assert simplex_objective(grid_alpha, K, y, HP) == pytest.approx(grid_value)


def test_grid_search_is_limited_to_small_sets():
    K, y = _kernel(8, 1)
    with pytest.raises(SolverError):
        brute_force_simplex_oracle(K, y, HP)


def test_hamiltonian_expectation_equals_quadratic_form():
    K, y = _kernel(4, 2)
    alpha = project_to_simplex(make_rng(2, 0).uniform(size=4))
    diagonal = objective_hamiltonian_diagonal(K, y, HP)
    assert diagonal.shape == (16,)
    assert hamiltonian_expectation(diagonal, alpha) == pytest.approx(simplex_objective(alpha, K, y, HP))


def test_smaller_lambda_enforces_label_balance():
    K, y = _kernel(8, 4)
    sweep = [Hyperparams(lam, 10.0) for lam in (1e3, 10.0, 1.0, 0.1, 0.01)]
    balances = [abs(float(np.dot(solve_probability_simplex_qp(K, y, hp).alpha, y))) for hp in sweep]
    assert all(b <= a + 1e-8 for a, b in zip(balances, balances[1:]))


def test_bias_is_label_weighted_alpha_over_lambda():
    K, y = _kernel(4, 6)
    result = solve_probability_simplex_qp(K, y, HP)
    assert result.bias == pytest.approx(float(np.dot(result.alpha, y)) / HP.lam)


def test_hard_margin_baseline_separates_clusters():
    X = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]])
    y = np.array([-1, -1, -1, 1, 1, 1])
    K = rbf_kernel(X, X, gamma=1.0)
    result = solve_hard_margin_dual(K, y)
    assert float(np.dot(result.beta, y)) == pytest.approx(0.0, abs=1e-8)
    assert result.support
    assert not result.median_fallback
    decisions = classical_baseline_predict(K, result, y)
    assert np.array_equal(np.where(decisions > 0, 1, -1), y)
    queries = np.array([[-3.0], [3.0]])
    assert np.array_equal(np.sign(classical_baseline_predict(rbf_kernel(queries, X), result, y)), [-1, 1])


def test_utility_kernels():
    X = np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 0.0]])
    poly = polynomial_kernel(X, X)
    assert poly[0, 1] == pytest.approx((1.0 * 0.5 + 2.0 * -1.0 + 1.0) ** 2)
    assert np.array_equal(poly, poly.T)
    rbf = rbf_kernel(X, X, gamma=2.0)
    assert np.diag(rbf) == pytest.approx(np.ones(3))
    assert rbf[0, 2] == pytest.approx(np.exp(-5.0))


@pytest.mark.parametrize("seed", range(6))
def test_dual_weights_match_rescaled_simplex_solution(seed):
    K, y = _kernel(2 ** (1 + seed % 3), 30 + seed)
    simplex = solve_probability_simplex_qp(K, y, HP)
    dual = solve_dual_svm(K, y, HP)
    assert simplex.beta == pytest.approx(dual.beta, abs=1e-5)


def test_hard_margin_bias_falls_back_to_median_without_support_vectors():
    X = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]])
    y = np.array([-1, -1, -1, 1, 1, 1])
    K = rbf_kernel(X, X, gamma=1.0)
    result = solve_hard_margin_dual(K, y, support_threshold=10.0)
    assert result.median_fallback
    assert result.support == ()
    expected = float(np.median(y - K @ (result.beta * y)))
    assert result.bias == pytest.approx(expected)
