"""Training of the ansatz parameters and inference with the decision circuit only."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..circuits import AnsatzSpec, CircuitError, FeatureMapSpec, alpha_distribution, check_theta
from ..datasets import LabeledData, TrainingSet, sign_label
from ..estimation import (
    DIRECT,
    EXACT,
    EstimationStats,
    EstimatorConfig,
    Hyperparams,
    estimate_decision,
    estimate_objective,
    training_features,
)
from ..export import SCHEMA_VERSION, read_json, write_json
from ..optimize import OptimizationTrace, SPSAConfig, spsa_minimize, warm_start
from ..reference import classical_decisions, kernel_from_features, solve_probability_simplex_qp

logger = logging.getLogger(__name__)

EXACT_DIRECT = EstimatorConfig(mode=EXACT, method=DIRECT)


class ModelError(ValueError):
    """Raised for inconsistent or unreadable models."""


@dataclass
class WarmStartConfig:
    """Cheap estimator used for the first ``iterations`` SPSA steps."""

    estimator: EstimatorConfig = field(default_factory=lambda: EXACT_DIRECT)
    iterations: int = 32


@dataclass(eq=False)
class Model:
    theta_star: np.ndarray
    ansatz: AnsatzSpec
    fmap: FeatureMapSpec
    hp: Hyperparams
    training_set: TrainingSet
    trace: Optional[OptimizationTrace] = None
    trace_summary: Dict[str, object] = field(default_factory=dict)
    alpha_star: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        try:
            self.theta_star = check_theta(self.ansatz, self.theta_star)
        except CircuitError as exc:
            raise ModelError(str(exc)) from exc
        if 2 ** self.ansatz.m != self.training_set.size:
            raise ModelError(f"Ansatz com m = {self.ansatz.m} incompatível com M = {self.training_set.size}")
        if self.training_set.feature_dim != self.fmap.feature_dim:
            raise ModelError("Conjunto de treino incompatível com o mapa de atributos")
        if self.alpha_star is None:
            self.alpha_star = alpha_distribution(self.ansatz, self.theta_star)
        if self.trace is not None and not self.trace_summary:
            self.trace_summary = self.trace.summary()

    def to_dict(self) -> Dict[str, object]:
        return {
            "schema_version": SCHEMA_VERSION,
            "theta_star": self.theta_star.tolist(),
            "ansatz": self.ansatz.to_dict(),
            "fmap": self.fmap.to_dict(),
            "lambda": self.hp.lam,
            "C": self.hp.C,
            "training_set": {
                "points": self.training_set.points.tolist(),
                "labels": [int(v) for v in self.training_set.labels],
            },
            "trace_summary": self.trace_summary,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, object]) -> "Model":
        try:
            training = payload["training_set"]
            return cls(
                theta_star=np.asarray(payload["theta_star"], dtype=float),
                ansatz=AnsatzSpec.from_dict(payload["ansatz"]),  # type: ignore[arg-type]
                fmap=FeatureMapSpec.from_dict(payload["fmap"]),  # type: ignore[arg-type]
                hp=Hyperparams(float(payload["lambda"]), float(payload["C"])),  # type: ignore[arg-type]
                training_set=TrainingSet(training["points"], training["labels"]),  # type: ignore[index]
                trace_summary=dict(payload.get("trace_summary") or {}),  # type: ignore[arg-type]
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"Documento de modelo inválido: {exc}") from exc


def save_model(model: Model, path: Path) -> Path:
    return write_json(path, model.to_dict())


def load_model(path: Path) -> Model:
    source = Path(path)
    try:
        payload = read_json(source)
    except (OSError, ValueError) as exc:
        raise ModelError(f"Não foi possível ler o modelo {source}: {exc}") from exc
    return Model.from_dict(payload)


def _objective_for(
    S: TrainingSet,
    fmap: FeatureMapSpec,
    ansatz: AnsatzSpec,
    hp: Hyperparams,
    est: EstimatorConfig,
    features: np.ndarray,
    stats: Optional[EstimationStats],
):
    def objective(theta: np.ndarray, evaluation_index: int) -> float:
        return estimate_objective(
            theta, S, fmap, ansatz, hp, est, evaluation_index=evaluation_index, features=features, stats=stats
        )

    return objective


def train(
    S: TrainingSet,
    fmap: FeatureMapSpec,
    ansatz: AnsatzSpec,
    hp: Hyperparams,
    est: EstimatorConfig,
    spsa_config: Optional[SPSAConfig] = None,
    *,
    theta0: Optional[Sequence[float]] = None,
    warm: Optional[WarmStartConfig] = None,
    stats: Optional[EstimationStats] = None,
) -> Model:
    """Minimise loss + R/C over θ with SPSA, starting from the uniform-α point θ = 0."""

    if 2 ** ansatz.m != S.size:
        raise ModelError(f"Ansatz com m = {ansatz.m} incompatível com M = {S.size}")
    features = training_features(S, fmap)
    start = np.zeros(ansatz.num_params) if theta0 is None else check_theta(ansatz, theta0)
    config = spsa_config or SPSAConfig()
    objective = _objective_for(S, fmap, ansatz, hp, est, features, stats)

    logger.info(
        "Treinando VQASVM: M=%d, %d parâmetros, modo=%s, método=%s",
        S.size,
        ansatz.num_params,
        est.mode,
        est.method,
    )
    if warm is not None and warm.iterations > 0:
        cheap = _objective_for(S, fmap, ansatz, hp, warm.estimator, features, stats)
        theta_star, trace = warm_start(cheap, objective, start, config, handoff_iterations=warm.iterations)
    else:
        theta_star, trace = spsa_minimize(objective, start, config)
    logger.info(
        "Treino concluído: %d iterações, %d aceitas, objetivo final %.6e",
        trace.iterations,
        trace.accepted_count,
        trace.final_objective,
    )
    return Model(theta_star, ansatz, fmap, hp, S, trace=trace)


def infer(
    model: Model,
    X: np.ndarray,
    est: EstimatorConfig,
    *,
    threads: int = 1,
    stats: Optional[EstimationStats] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Labels and decision values for each row of ``X`` using the stored ``θ*``.

    Point ``k`` uses evaluation index ``k``, so results do not depend on ``threads``.
    """

    points = np.asarray(X, dtype=float)
    if points.ndim == 1:
        points = points.reshape(1, -1)
    if points.shape[1] != model.fmap.feature_dim:
        raise ModelError(
            f"Pontos com {points.shape[1]} atributos, o modelo espera {model.fmap.feature_dim}"
        )
    features = training_features(model.training_set, model.fmap)

    def decide(k: int) -> float:
        return estimate_decision(
            points[k],
            model.theta_star,
            model.training_set,
            model.fmap,
            model.ansatz,
            model.hp.lam,
            est,
            evaluation_index=k,
            features=features,
            stats=stats,
        )

    indices = range(points.shape[0])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(decide, indices))
    else:
        values = [decide(k) for k in indices]
    decisions = np.asarray(values, dtype=float)
    labels = np.array([sign_label(v) for v in decisions], dtype=int)
    return labels, decisions


def oracle_decisions(model: Model, X: np.ndarray, alpha: Optional[np.ndarray] = None) -> np.ndarray:
    """Kernel-sum decisions; ``alpha`` defaults to ``model.alpha_star``."""

    weights = model.alpha_star if alpha is None else alpha
    return classical_decisions(X, weights, model.training_set, model.fmap, model.hp.lam)


def convex_optimum(S: TrainingSet, fmap: FeatureMapSpec, hp: Hyperparams, features: Optional[np.ndarray] = None) -> float:
    """Simplex-QP optimum ``d̃*`` for the kernel induced by ``fmap``."""

    if features is None:
        features = training_features(S, fmap)
    K = kernel_from_features(features)
    return solve_probability_simplex_qp(0.5 * (K + K.T), S.labels, hp).objective


def residual_loss(model: Model, S: Optional[TrainingSet] = None, hp: Optional[Hyperparams] = None) -> float:
    """Exact objective at ``θ*`` minus the convex optimum ``d̃*``."""

    S = S or model.training_set
    hp = hp or model.hp
    features = training_features(S, model.fmap)
    optimum = convex_optimum(S, model.fmap, hp, features)
    value = estimate_objective(model.theta_star, S, model.fmap, model.ansatz, hp, EXACT_DIRECT, features=features)
    return value - optimum


def residual_curve(model: Model) -> List[float]:
    """Exact residual after every accepted SPSA step of the stored trace."""

    if model.trace is None:
        raise ModelError("O modelo não carrega o histórico de treino")
    features = training_features(model.training_set, model.fmap)
    optimum = convex_optimum(model.training_set, model.fmap, model.hp, features)
    return [
        estimate_objective(
            theta, model.training_set, model.fmap, model.ansatz, model.hp, EXACT_DIRECT, features=features
        )
        - optimum
        for theta in model.trace.accepted_thetas
    ]


def accuracy(model: Model, test_set: LabeledData, est: EstimatorConfig, *, threads: int = 1) -> float:
    """Fraction of test labels matched by the decision sign (sign(0) = -1)."""

    if test_set.size == 0:
        raise ModelError("Conjunto de teste vazio")
    labels, _ = infer(model, test_set.points, est, threads=threads)
    return float(np.mean(labels == test_set.labels))


def average_decision_error(model: Model, X: np.ndarray, est: EstimatorConfig, *, threads: int = 1) -> float:
    """Mean ``|f_quantum - f_oracle|`` over the rows of ``X``."""

    _, values = infer(model, X, est, threads=threads)
    return float(np.mean(np.abs(values - oracle_decisions(model, X))))


__all__ = [
    "EXACT_DIRECT",
    "Model",
    "ModelError",
    "WarmStartConfig",
    "accuracy",
    "average_decision_error",
    "convex_optimum",
    "infer",
    "load_model",
    "oracle_decisions",
    "residual_curve",
    "residual_loss",
    "save_model",
    "train",
]
