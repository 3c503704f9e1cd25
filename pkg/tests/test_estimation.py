"""Quantum estimators against their classical kernel-sum counterparts."""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from vqasvm.circuits import AnsatzSpec, CircuitError, FeatureMapSpec, alpha_distribution
from vqasvm.datasets import random_training_set
from vqasvm.estimation import (
    CIRCUIT,
    DIRECT,
    EXACT,
    SHOTS,
    EstimationStats,
    EstimatorConfig,
    Hyperparams,
    estimate_decision,
    estimate_loss,
    estimate_objective,
    estimate_regularizer,
)
from vqasvm.reference import classical_decision, kernel_matrix, simplex_objective
from vqasvm.simulator import make_rng

HARD = Hyperparams(lam=50.0, C=math.inf)


def _instance(M: int, fmap: FeatureMapSpec, seed: int):
    S = random_training_set(M, fmap.feature_dim, seed=seed)
    ansatz = AnsatzSpec(S.index_qubits, layers=2)
    theta = make_rng(seed, 5).uniform(-math.pi, math.pi, size=ansatz.num_params)
    return S, ansatz, theta


FEATURE_MAPS = (
    FeatureMapSpec.bloch(),
    FeatureMapSpec.zz(2, reps=1),
    FeatureMapSpec.zz(2, reps=2),
    FeatureMapSpec.zz(3, reps=2),
)

CASES = [(M, fmap, seed) for M in (2, 4, 8, 16) for fmap in FEATURE_MAPS for seed in range(4)]


@pytest.mark.parametrize("M, fmap, seed", CASES)
def test_exact_loss_matches_kernel_sum(M, fmap, seed):
    S, ansatz, theta = _instance(M, fmap, seed)
    expected = simplex_objective(alpha_distribution(ansatz, theta), kernel_matrix(S, fmap), S.labels, HARD)
    direct = estimate_loss(theta, S, fmap, ansatz, HARD, EstimatorConfig(method=DIRECT))
    assert direct == pytest.approx(expected, abs=1e-9)
    if M <= 4:
        circuit = estimate_loss(theta, S, fmap, ansatz, HARD, EstimatorConfig(method=CIRCUIT))
        assert circuit == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("M, fmap, seed", CASES)
def test_exact_decision_matches_kernel_sum(M, fmap, seed):
    S, ansatz, theta = _instance(M, fmap, seed)
    x_hat = make_rng(seed, 6).uniform(-math.pi, math.pi, size=fmap.feature_dim)
    alpha = alpha_distribution(ansatz, theta)
    expected = classical_decision(x_hat, alpha, S, fmap, HARD.lam)
    for method in (DIRECT, CIRCUIT):
        value = estimate_decision(x_hat, theta, S, fmap, ansatz, HARD.lam, EstimatorConfig(method=method))
        assert value == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_exact_regularizer_is_collision_probability(m):
    ansatz = AnsatzSpec(m, layers=2)
    theta = make_rng(m, 9).uniform(-math.pi, math.pi, size=ansatz.num_params)
    expected = float(np.sum(alpha_distribution(ansatz, theta) ** 2))
    for method in (DIRECT, CIRCUIT):
        assert estimate_regularizer(theta, ansatz, EstimatorConfig(method=method)) == pytest.approx(expected, abs=1e-12)


def test_objective_adds_regularizer_over_c():
    S, ansatz, theta = _instance(4, FeatureMapSpec.bloch(), 1)
    hp = Hyperparams(lam=50.0, C=3.0)
    loss = estimate_loss(theta, S, FeatureMapSpec.bloch(), ansatz, hp, EstimatorConfig())
    reg = estimate_regularizer(theta, ansatz, EstimatorConfig())
    total = estimate_objective(theta, S, FeatureMapSpec.bloch(), ansatz, hp, EstimatorConfig())
    assert total == pytest.approx(loss + reg / 3.0)
    expected = simplex_objective(alpha_distribution(ansatz, theta), kernel_matrix(S, FeatureMapSpec.bloch()), S.labels, hp)
    assert total == pytest.approx(expected, abs=1e-9)


def test_hard_margin_never_evaluates_regularizer():
    S, ansatz, theta = _instance(4, FeatureMapSpec.bloch(), 2)
    stats = EstimationStats()
    estimate_objective(theta, S, FeatureMapSpec.bloch(), ansatz, HARD, EstimatorConfig(), stats=stats)
    assert stats.to_dict() == {"loss": 1, "regularizer": 0, "decision": 0}


def test_flipping_labels_negates_decision_and_keeps_loss():
    fmap = FeatureMapSpec.bloch()
    S, ansatz, theta = _instance(4, fmap, 0)
    flipped = S.flipped()
    x_hat = [0.4, 1.9]
    est = EstimatorConfig()
    assert estimate_decision(x_hat, theta, flipped, fmap, ansatz, 50.0, est) == pytest.approx(
        -estimate_decision(x_hat, theta, S, fmap, ansatz, 50.0, est)
    )
    assert estimate_loss(theta, flipped, fmap, ansatz, HARD, est) == pytest.approx(
        estimate_loss(theta, S, fmap, ansatz, HARD, est)
    )


def test_shot_estimates_are_seeded_per_evaluation_index():
    fmap = FeatureMapSpec.bloch()
    S, ansatz, theta = _instance(4, fmap, 3)
    est = EstimatorConfig(mode=SHOTS, shots=256, seed=4)
    first = estimate_loss(theta, S, fmap, ansatz, HARD, est, evaluation_index=7)
    again = estimate_loss(theta, S, fmap, ansatz, HARD, est, evaluation_index=7)
    assert first == again
    values = {estimate_loss(theta, S, fmap, ansatz, HARD, est, evaluation_index=k) for k in range(10)}
    assert len(values) > 1


def test_shot_estimates_concentrate_on_exact_value():
    fmap = FeatureMapSpec.bloch()
    S, ansatz, theta = _instance(4, fmap, 5)
    exact = estimate_loss(theta, S, fmap, ansatz, HARD, EstimatorConfig(mode=EXACT))
    noisy = estimate_loss(theta, S, fmap, ansatz, HARD, EstimatorConfig(mode=SHOTS, shots=200_000, seed=1))
    assert noisy == pytest.approx(exact, abs=0.02)
    x_hat = [1.0, -2.0]
    exact_f = estimate_decision(x_hat, theta, S, fmap, ansatz, HARD.lam, EstimatorConfig())
    noisy_f = estimate_decision(
        x_hat, theta, S, fmap, ansatz, HARD.lam, EstimatorConfig(mode=SHOTS, shots=200_000, seed=1)
    )
    assert noisy_f == pytest.approx(exact_f, abs=0.02)


def test_circuit_and_direct_shots_share_outcome_law():
    fmap = FeatureMapSpec.bloch()
    S, ansatz, theta = _instance(2, fmap, 6)
    values = {}
    for method in (DIRECT, CIRCUIT):
        est = EstimatorConfig(mode=SHOTS, shots=50_000, seed=2, method=method)
        values[method] = estimate_loss(theta, S, fmap, ansatz, HARD, est)
    assert values[DIRECT] == pytest.approx(values[CIRCUIT], abs=1e-9)


def test_estimator_config_validation():
    with pytest.raises(CircuitError):
        EstimatorConfig(mode="tomography")
    with pytest.raises(CircuitError):
        EstimatorConfig(mode=SHOTS, shots=0)
    with pytest.raises(CircuitError):
        Hyperparams(lam=0.0)


@pytest.mark.slow
def test_shot_noise_shrinks_as_inverse_square_root():
    fmap = FeatureMapSpec.bloch()
    S, ansatz, theta = _instance(4, fmap, 7)
    spreads = []
    for shots in (256, 1024, 4096):
        est = EstimatorConfig(mode=SHOTS, shots=shots, seed=3)
        samples = [estimate_loss(theta, S, fmap, ansatz, HARD, est, evaluation_index=k) for k in range(50)]
        spreads.append(float(np.std(samples, ddof=1)))
    for low, high in zip(spreads, spreads[1:]):
        ratio = low / high
        assert 1.0 <= ratio <= 4.0
