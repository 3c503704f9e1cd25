"""Training, inference and model persistence."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from vqasvm.circuits import AnsatzSpec, FeatureMapSpec
from vqasvm.datasets import LabeledData, ToyDatasetConfig, TrainingSet, generate_bloch_toy, random_training_set
from vqasvm.engine import (
    EXACT_DIRECT,
    Model,
    ModelError,
    WarmStartConfig,
    accuracy,
    average_decision_error,
    convex_optimum,
    infer,
    load_model,
    oracle_decisions,
    residual_curve,
    residual_loss,
    save_model,
    train,
)
from vqasvm.estimation import SHOTS, EstimationStats, EstimatorConfig, Hyperparams
from vqasvm.optimize import SPSAConfig
from vqasvm.reference import kernel_matrix, solve_probability_simplex_qp
from vqasvm.simulator import make_rng

BLOCH = FeatureMapSpec.bloch()
HARD = Hyperparams(lam=1e4, C=math.inf)


def _random_model(M: int = 4, seed: int = 0, hp: Hyperparams = HARD) -> Model:
    S = random_training_set(M, 2, seed=seed)
    ansatz = AnsatzSpec(S.index_qubits, layers=2)
    theta = make_rng(seed, 4).uniform(-math.pi, math.pi, size=ansatz.num_params)
    return Model(theta, ansatz, BLOCH, hp, S)


def _query_points(count: int, seed: int = 0) -> np.ndarray:
    return make_rng(seed, 8).uniform(-math.pi, math.pi, size=(count, 2))


def test_exact_inference_matches_kernel_sum():
    model = _random_model(8, seed=1)
    X = _query_points(12)
    labels, values = infer(model, X, EXACT_DIRECT)
    assert values == pytest.approx(oracle_decisions(model, X), abs=1e-9)
    assert np.array_equal(labels, np.where(values > 0, 1, -1))
    assert average_decision_error(model, X, EXACT_DIRECT) < 1e-9


def test_shot_inference_is_reproducible_across_threads():
    model = _random_model(4, seed=2)
    X = _query_points(9, seed=2)
    est = EstimatorConfig(mode=SHOTS, shots=256, seed=3)
    _, serial = infer(model, X, est)
    _, again = infer(model, X, est)
    _, parallel = infer(model, X, est, threads=2)
    assert np.array_equal(serial, again)
    assert np.array_equal(serial, parallel)


def test_residual_is_never_negative():
    for seed in range(5):
        model = _random_model(4, seed=seed, hp=Hyperparams(lam=10.0, C=10.0))
        assert residual_loss(model) >= -1e-6


def test_uniform_start_is_optimal_for_a_labelled_pair():
    S = TrainingSet([[0.4, 1.0], [2.5, -0.7]], [1, -1])
    model = Model(np.zeros(2), AnsatzSpec(1, layers=2), BLOCH, Hyperparams(1e4, 1e4), S)
    assert abs(residual_loss(model)) <= 1e-6


def test_convex_optimum_matches_reference_solver():
    S = random_training_set(4, 2, seed=6)
    hp = Hyperparams(10.0, 10.0)
    expected = solve_probability_simplex_qp(kernel_matrix(S, BLOCH), S.labels, hp).objective
    assert convex_optimum(S, BLOCH, hp) == pytest.approx(expected, rel=1e-9)


def test_model_round_trip(tmp_path):
    model = _random_model(4, seed=3)
    path = save_model(model, tmp_path / "model.json")
    payload = json.loads(path.read_text(encoding="utf-8"))
    assert set(payload) == {"schema_version", "theta_star", "ansatz", "fmap", "lambda", "C", "training_set", "trace_summary"}
    assert payload["C"] == "inf"

    loaded = load_model(path)
    assert np.array_equal(loaded.theta_star, model.theta_star)
    assert loaded.hp == model.hp
    assert loaded.ansatz == model.ansatz
    assert loaded.fmap == model.fmap
    assert np.array_equal(loaded.training_set.points, model.training_set.points)
    X = _query_points(5)
    assert infer(loaded, X, EXACT_DIRECT)[1] == pytest.approx(infer(model, X, EXACT_DIRECT)[1])


def test_broken_model_documents_are_rejected(tmp_path):
    broken = tmp_path / "model.json"
    broken.write_text('{"theta_star": [0.0]}', encoding="utf-8")
    with pytest.raises(ModelError):
        load_model(broken)
    with pytest.raises(ModelError):
        load_model(tmp_path / "missing.json")


def test_model_checks_shapes():
    S = random_training_set(4, 2)
    with pytest.raises(ModelError):
        Model(np.zeros(3), AnsatzSpec(2, layers=2), BLOCH, HARD, S)
    with pytest.raises(ModelError):
        Model(np.zeros(3), AnsatzSpec(3), BLOCH, HARD, S)


def test_inference_rejects_wrong_dimension_and_empty_sets():
    model = _random_model()
    with pytest.raises(ModelError):
        infer(model, np.zeros((3, 3)), EXACT_DIRECT)
    with pytest.raises(ModelError):
        accuracy(model, LabeledData(np.zeros((0, 2)), []), EXACT_DIRECT)


def test_flipping_test_labels_complements_accuracy():
    model = _random_model(4, seed=5)
    X = _query_points(10, seed=5)
    test = LabeledData(X, np.where(np.arange(10) % 3 == 0, 1, -1))
    assert accuracy(model, test.flipped(), EXACT_DIRECT) == pytest.approx(1.0 - accuracy(model, test, EXACT_DIRECT))


def test_training_counts_evaluations_and_tracks_residual_curve():
    S = random_training_set(4, 2, seed=7)
    stats = EstimationStats()
    config = SPSAConfig(max_iter=24, early_stopping=False, seed=2)
    model = train(S, BLOCH, AnsatzSpec(2, layers=2), Hyperparams(50.0, 5.0), EXACT_DIRECT, config, stats=stats)
    trace = model.trace
    assert trace is not None
    assert stats.loss == trace.evaluations
    assert stats.regularizer == trace.evaluations
    assert stats.decision == 0
    curve = residual_curve(model)
    assert len(curve) == len(trace.accepted_thetas)
    assert min(curve, default=0.0) >= -1e-6
    assert model.trace_summary["iterations"] == 24


def test_warm_start_hands_over_to_shot_estimator():
    S = random_training_set(4, 2, seed=8)
    stats = EstimationStats()
    est = EstimatorConfig(mode=SHOTS, shots=512, seed=1)
    config = SPSAConfig(max_iter=8, early_stopping=False, sigma=0.0, a=0.2, c=0.1)
    model = train(S, BLOCH, AnsatzSpec(2), HARD, est, config, warm=WarmStartConfig(iterations=4), stats=stats)
    assert stats.loss == 1 + 3 * 8
    assert stats.regularizer == 0
    assert model.trace.iterations == 8


def test_trained_toy_model_approaches_convex_optimum():
    toy = generate_bloch_toy(ToyDatasetConfig(seed=0))
    config = SPSAConfig(max_iter=512, seed=0)
    model = train(toy.train, BLOCH, AnsatzSpec(2, layers=2), HARD, EXACT_DIRECT, config)
    assert residual_loss(model) <= 0.05

    K = kernel_matrix(toy.train, BLOCH)
    alpha_star = solve_probability_simplex_qp(K, toy.train.labels, HARD).alpha
    oracle_values = oracle_decisions(model, toy.test.points, alpha_star)
    predicted, values = infer(model, toy.test.points, EXACT_DIRECT)
    assert int(np.sum(predicted == np.where(oracle_values > 0, 1, -1))) >= 29
    assert float(np.max(np.abs(values - oracle_values))) <= 0.1


def test_trained_pair_weights_match_convex_optimum():
    S = TrainingSet([[0.2, 0.3], [2.8, -1.1]], [1, -1])
    hp = Hyperparams(1e4, 1e4)
    config = SPSAConfig(max_iter=64, seed=1)
    model = train(S, BLOCH, AnsatzSpec(1, layers=1), hp, EXACT_DIRECT, config)
    alpha_star = solve_probability_simplex_qp(kernel_matrix(S, BLOCH), S.labels, hp).alpha
    assert model.alpha_star == pytest.approx(alpha_star, abs=0.05)
