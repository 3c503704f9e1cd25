"""Loss, decision and regularizer estimators in exact and finite-shot modes.

Two evaluation paths produce identical outcome distributions on the measured
bits:

* ``circuit`` simulates the gate-built circuits end to end;
* ``direct`` builds ``Σ_i √α_i |i⟩|φ(x_i)⟩|y_i⟩`` and reads the SWAP-test and
  parity statistics from the label blocks ``ρ_y`` of its reduced state.

Every shot-mode evaluation draws from its own random stream keyed by
``(seed, evaluation_index, channel)``.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from ..circuits import (
    AnsatzSpec,
    CircuitError,
    FeatureMapSpec,
    alpha_distribution,
    build_decision_circuit,
    build_loss_circuit,
    build_regularization_circuit,
    check_theta,
    check_training_set,
    feature_state,
    feature_states,
    prepare_training_state,
)
from ..datasets import TrainingSet
from ..simulator import (
    expectation_pauli_z,
    make_rng,
    marginal_probabilities,
    parity_mean,
    projector_probability,
    run_circuit,
    sample_from_probabilities,
)

logger = logging.getLogger(__name__)

EXACT = "exact"
SHOTS = "shots"
ESTIMATOR_MODES = (EXACT, SHOTS)

DIRECT = "direct"
CIRCUIT = "circuit"
ESTIMATOR_METHODS = (DIRECT, CIRCUIT)

LOSS_CHANNEL = 0
REGULARIZER_CHANNEL = 1
DECISION_CHANNEL = 2
_CHANNELS = 4


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = EXACT
    shots: int = 8192
    seed: int = 0
    method: str = DIRECT

    def __post_init__(self) -> None:
        if self.mode not in ESTIMATOR_MODES:
            raise CircuitError(f"Modo de estimação desconhecido: {self.mode}")
        if self.method not in ESTIMATOR_METHODS:
            raise CircuitError(f"Método de estimação desconhecido: {self.method}")
        if self.mode == SHOTS and self.shots < 1:
            raise CircuitError("O modo shots exige R >= 1")

    @property
    def exact(self) -> bool:
        return self.mode == EXACT

    def rng(self, evaluation_index: int, channel: int) -> np.random.Generator:
        return make_rng(self.seed, evaluation_index * _CHANNELS + channel)


@dataclass(frozen=True)
class Hyperparams:
    lam: float = 1e4
    C: float = 1e4

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise CircuitError("λ deve ser positivo")
        if not self.C > 0:
            raise CircuitError("C deve ser positivo")

    @property
    def hard_margin(self) -> bool:
        return math.isinf(self.C)

    @property
    def inverse_C(self) -> float:
        return 0.0 if self.hard_margin else 1.0 / self.C

    def to_dict(self) -> Dict[str, float]:
        return {"lambda": self.lam, "C": self.C}


@dataclass
class EstimationStats:
    """Evaluation counters, safe to share between worker threads."""

    loss: int = 0
    regularizer: int = 0
    decision: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, kind: str) -> None:
        with self._lock:
            setattr(self, kind, getattr(self, kind) + 1)

    def to_dict(self) -> Dict[str, int]:
        return {"loss": self.loss, "regularizer": self.regularizer, "decision": self.decision}


def _record(stats: Optional[EstimationStats], kind: str) -> None:
    if stats is not None:
        stats.record(kind)


def _label_blocks(S: TrainingSet, fmap: FeatureMapSpec, alpha: np.ndarray, features: Optional[np.ndarray]) -> np.ndarray:
    """Unnormalised ``ρ_y`` on the data register for ``y = +1`` (block 0) and ``y = -1`` (block 1)."""

    state = prepare_training_state(S, fmap, alpha, features)
    psi = np.asarray(state.amplitudes).reshape(2, 2 ** fmap.n, S.size)
    return np.einsum("yxi,yzi->yxz", psi, psi.conj())


def _loss_distribution(rho: np.ndarray) -> np.ndarray:
    """Joint law of bits ``(a, y0, y1)``, outcome index ``a + 2·y0 + 4·y1``."""

    traces = np.real(np.trace(rho, axis1=1, axis2=2))
    probabilities = np.zeros(8)
    for y0 in (0, 1):
        for y1 in (0, 1):
            product = traces[y0] * traces[y1]
            overlap = float(np.real(np.trace(rho[y0] @ rho[y1])))
            probabilities[0 + 2 * y0 + 4 * y1] = 0.5 * (product + overlap)
            probabilities[1 + 2 * y0 + 4 * y1] = 0.5 * (product - overlap)
    return np.clip(probabilities, 0.0, None)


def _decision_distribution(rho: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Joint law of bits ``(a, y)``, outcome index ``a + 2·y``."""

    traces = np.real(np.trace(rho, axis1=1, axis2=2))
    probabilities = np.zeros(4)
    for y in (0, 1):
        overlap = float(np.real(np.vdot(query, rho[y] @ query)))
        probabilities[0 + 2 * y] = 0.5 * (traces[y] + overlap)
        probabilities[1 + 2 * y] = 0.5 * (traces[y] - overlap)
    return np.clip(probabilities, 0.0, None)


def _collision_distribution(alpha: np.ndarray) -> np.ndarray:
    """Law of ``j ⊕ i`` after the transversal CNOTs: ``q[k] = Σ_i α_i α_{i⊕k}``."""

    index = np.arange(alpha.size)
    return np.array([float(np.dot(alpha, alpha[index ^ k])) for k in range(alpha.size)])


def _parity_from_distribution(probabilities: np.ndarray, positions: Sequence[int]) -> float:
    outcomes = np.arange(probabilities.size)
    parity = np.zeros_like(outcomes)
    for p in positions:
        parity ^= (outcomes >> p) & 1
    return float(np.dot(probabilities, 1 - 2 * parity))


def _combine(zz_a: float, zz: float, lam: float) -> float:
    return zz_a + zz / lam


def estimate_loss(
    theta: Sequence[float],
    S: TrainingSet,
    fmap: FeatureMapSpec,
    ansatz: AnsatzSpec,
    hp: Hyperparams,
    est: EstimatorConfig,
    *,
    evaluation_index: int = 0,
    features: Optional[np.ndarray] = None,
    stats: Optional[EstimationStats] = None,
) -> float:
    """``⟨Z_a Z_y0 Z_y1⟩ + ⟨Z_y0 Z_y1⟩ / λ``; shot mode forms both terms from one joint sample."""

    theta = check_theta(ansatz, theta)
    check_training_set(S, fmap)
    _record(stats, "loss")

    if est.method == CIRCUIT:
        circuit = build_loss_circuit(S, fmap, ansatz, theta)
        state = run_circuit(circuit)
        measured = [circuit.register("a")[0], circuit.register("y0")[0], circuit.register("y1")[0]]
        if est.exact:
            return _combine(
                expectation_pauli_z(state, measured),
                expectation_pauli_z(state, measured[1:]),
                hp.lam,
            )
        probabilities = marginal_probabilities(state, measured)
    else:
        rho = _label_blocks(S, fmap, alpha_distribution(ansatz, theta), features)
        probabilities = _loss_distribution(rho)
        if est.exact:
            return _combine(
                _parity_from_distribution(probabilities, (0, 1, 2)),
                _parity_from_distribution(probabilities, (1, 2)),
                hp.lam,
            )

    histogram = sample_from_probabilities(probabilities, 3, est.shots, est.rng(evaluation_index, LOSS_CHANNEL))
    return _combine(parity_mean(histogram, (0, 1, 2)), parity_mean(histogram, (1, 2)), hp.lam)


def estimate_regularizer(
    theta: Sequence[float],
    ansatz: AnsatzSpec,
    est: EstimatorConfig,
    *,
    evaluation_index: int = 0,
    stats: Optional[EstimationStats] = None,
) -> float:
    """Probability that register ``j`` reads all zeros, i.e. ``Σ_i α_i(θ)²``."""

    theta = check_theta(ansatz, theta)
    _record(stats, "regularizer")
    zeros = "0" * ansatz.m

    if est.method == CIRCUIT:
        state = run_circuit(build_regularization_circuit(ansatz, theta))
        if est.exact:
            return projector_probability(state, "j", zeros)
        probabilities = marginal_probabilities(state, state.register("j"))
    else:
        probabilities = _collision_distribution(alpha_distribution(ansatz, theta))
        if est.exact:
            return float(probabilities[0])

    histogram = sample_from_probabilities(
        probabilities, ansatz.m, est.shots, est.rng(evaluation_index, REGULARIZER_CHANNEL)
    )
    return histogram.get(zeros, 0) / est.shots


def estimate_objective(
    theta: Sequence[float],
    S: TrainingSet,
    fmap: FeatureMapSpec,
    ansatz: AnsatzSpec,
    hp: Hyperparams,
    est: EstimatorConfig,
    *,
    evaluation_index: int = 0,
    features: Optional[np.ndarray] = None,
    stats: Optional[EstimationStats] = None,
) -> float:
    """Loss plus ``R(θ)/C``; the regularizer is never evaluated when ``C`` is infinite."""

    value = estimate_loss(
        theta, S, fmap, ansatz, hp, est, evaluation_index=evaluation_index, features=features, stats=stats
    )
    if hp.hard_margin:
        return value
    regularizer = estimate_regularizer(theta, ansatz, est, evaluation_index=evaluation_index, stats=stats)
    return value + regularizer / hp.C


def estimate_decision(
    x_hat: Sequence[float],
    theta: Sequence[float],
    S: TrainingSet,
    fmap: FeatureMapSpec,
    ansatz: AnsatzSpec,
    lam: float,
    est: EstimatorConfig,
    *,
    evaluation_index: int = 0,
    features: Optional[np.ndarray] = None,
    stats: Optional[EstimationStats] = None,
) -> float:
    """``f(x̂) = ⟨Z_a Z_y⟩ + ⟨Z_y⟩ / λ``; its sign is the predicted label."""

    theta = check_theta(ansatz, theta)
    check_training_set(S, fmap)
    _record(stats, "decision")

    if est.method == CIRCUIT:
        circuit = build_decision_circuit(x_hat, S, fmap, ansatz, theta)
        state = run_circuit(circuit)
        measured = [circuit.register("a")[0], circuit.register("y")[0]]
        if est.exact:
            return _combine(expectation_pauli_z(state, measured), expectation_pauli_z(state, measured[1:]), lam)
        probabilities = marginal_probabilities(state, measured)
    else:
        rho = _label_blocks(S, fmap, alpha_distribution(ansatz, theta), features)
        probabilities = _decision_distribution(rho, feature_state(fmap, x_hat))
        if est.exact:
            return _combine(
                _parity_from_distribution(probabilities, (0, 1)),
                _parity_from_distribution(probabilities, (1,)),
                lam,
            )

    histogram = sample_from_probabilities(probabilities, 2, est.shots, est.rng(evaluation_index, DECISION_CHANNEL))
    return _combine(parity_mean(histogram, (0, 1)), parity_mean(histogram, (1,)), lam)


def training_features(S: TrainingSet, fmap: FeatureMapSpec) -> np.ndarray:
    """Feature states of a training set, computed once and reused across evaluations."""

    check_training_set(S, fmap)
    return feature_states(fmap, S.points)


__all__ = [
    "CIRCUIT",
    "DIRECT",
    "ESTIMATOR_METHODS",
    "ESTIMATOR_MODES",
    "EXACT",
    "EstimationStats",
    "EstimatorConfig",
    "Hyperparams",
    "SHOTS",
    "estimate_decision",
    "estimate_loss",
    "estimate_objective",
    "estimate_regularizer",
    "training_features",
]
