"""SPSA with blocking, early stopping, terminal averaging and warm-start handoff.

Objectives receive ``(theta, evaluation_index)``; the optimizer hands out
indices from a single counter so shot-noise streams are reproducible no
matter how evaluations are scheduled. Plain ``f(theta)`` callables are
accepted and wrapped.
"""

from __future__ import annotations

import hashlib
import inspect
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..simulator import make_rng

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray, int], float]

PERTURBATION_STREAM = 0
CALIBRATION_STREAM = 1 << 32


class OptimizationError(RuntimeError):
    """Raised for invalid SPSA settings or a non-finite objective."""


@dataclass
class SPSAConfig:
    """Gain schedules ``a_t = a/(t+1+A)^alpha_gain`` and ``c_t = c/(t+1)^gamma_gain``.

    ``None`` gains are resolved at run time: ``A = max_iter/10``, ``c = σ``
    (0.1 when σ = 0) and ``a`` calibrated so the first step moves about
    ``target_step`` radians. ``sigma`` skips the noise estimate when given.
    """

    max_iter: int = 1024
    a: Optional[float] = None
    c: Optional[float] = None
    A: Optional[float] = None
    alpha_gain: float = 0.602
    gamma_gain: float = 0.101
    blocking: bool = True
    sigma: Optional[float] = None
    sigma_estimation_samples: int = 25
    calibration_samples: int = 10
    target_step: float = 0.1
    early_stop_window_short: int = 16
    early_stop_window_long: int = 32
    early_stopping: bool = True
    averaging_window: int = 16
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise OptimizationError("max_iter deve ser >= 1")
        if not 0 < self.early_stop_window_short < self.early_stop_window_long:
            raise OptimizationError("Exige-se 0 < janela curta < janela longa")
        if self.early_stopping and self.early_stop_window_long > self.max_iter:
            raise OptimizationError("Com parada antecipada, a janela longa não pode exceder max_iter")
        for name in ("a", "c", "A"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise OptimizationError(f"O ganho {name} deve ser positivo")
        if not (self.alpha_gain > 0 and self.gamma_gain > 0 and self.target_step > 0):
            raise OptimizationError("Expoentes de ganho e passo alvo devem ser positivos")
        if self.sigma is not None and self.sigma < 0:
            raise OptimizationError("σ deve ser não negativo")
        if self.sigma_estimation_samples < 2:
            raise OptimizationError("A estimativa de σ exige ao menos 2 amostras")
        if self.averaging_window < 1 or self.calibration_samples < 1:
            raise OptimizationError("Janelas e amostras de calibração devem ser >= 1")


@dataclass(frozen=True)
class SPSARecord:
    iteration: int
    objective: float
    accepted: bool
    theta_hash: str


@dataclass
class OptimizationTrace:
    records: List[SPSARecord] = field(default_factory=list)
    theta_star: Optional[np.ndarray] = None
    accepted_values: List[float] = field(default_factory=list)
    accepted_thetas: List[np.ndarray] = field(default_factory=list)
    initial_objective: Optional[float] = None
    sigma: float = 0.0
    gains: Dict[str, float] = field(default_factory=dict)
    early_stopped: bool = False
    evaluations: int = 0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def accepted_count(self) -> int:
        return sum(record.accepted for record in self.records)

    @property
    def final_objective(self) -> Optional[float]:
        if self.accepted_values:
            return self.accepted_values[-1]
        return self.initial_objective

    def summary(self) -> Dict[str, object]:
        return {
            "iterations": self.iterations,
            "accepted": self.accepted_count,
            "early_stopped": self.early_stopped,
            "initial_objective": self.initial_objective,
            "final_objective": self.final_objective,
            "sigma": self.sigma,
            "gains": dict(self.gains),
            "evaluations": self.evaluations,
        }


def theta_hash(theta: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(theta, dtype=np.float64).tobytes()).hexdigest()[:16]


def as_indexed(objective: Callable[..., float]) -> Objective:
    """Accept ``f(theta)`` as well as ``f(theta, evaluation_index)``."""

    try:
        parameters = inspect.signature(objective).parameters.values()
    except (TypeError, ValueError):  # pragma: no cover - builtins without signatures
        return objective  # type: ignore[return-value]
    positional = [
        p for p in parameters if p.kind in (inspect.Parameter.POSITIONAL_ONLY, inspect.Parameter.POSITIONAL_OR_KEYWORD)
    ]
    variadic = any(p.kind == inspect.Parameter.VAR_POSITIONAL for p in parameters)
    if len(positional) >= 2 or variadic:
        return objective  # type: ignore[return-value]
    return lambda theta, _index: objective(theta)


def _finite(value: float, theta: np.ndarray, index: int) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise OptimizationError(
            f"Objetivo não finito ({value}) na avaliação {index} com θ = {np.array2string(theta, precision=4)}"
        )
    return value


def estimate_sigma(
    objective: Callable[..., float],
    theta0: Sequence[float],
    samples: int = 25,
    seed: int = 0,
) -> float:
    """Sample standard deviation of ``samples`` evaluations at ``theta0``.

    Evaluations use indices ``seed, seed + 1, …``.
    """

    if samples < 2:
        raise OptimizationError("A estimativa de σ exige ao menos 2 amostras")
    indexed = as_indexed(objective)
    theta = np.asarray(theta0, dtype=float)
    values = [_finite(indexed(theta, seed + k), theta, seed + k) for k in range(samples)]
    return float(np.std(values, ddof=1))


class _Run:
    """State of one SPSA trajectory; the objective may change at a handoff iteration."""

    def __init__(
        self,
        cheap: Objective,
        expensive: Objective,
        theta0: Sequence[float],
        config: SPSAConfig,
        handoff: int,
    ) -> None:
        self.cheap = cheap
        self.expensive = expensive
        self.config = config
        self.handoff = handoff
        self.theta = np.asarray(theta0, dtype=float).copy()
        self.theta0 = self.theta.copy()
        self.counter = 0
        self.trace = OptimizationTrace()
        self.pool: Optional[ThreadPoolExecutor] = None

    def _objective(self, iteration: int) -> Objective:
        return self.cheap if iteration < self.handoff else self.expensive

    def _evaluate(self, objective: Objective, theta: np.ndarray) -> float:
        index = self.counter
        self.counter += 1
        return _finite(objective(theta, index), theta, index)

    def _pair(self, objective: Objective, plus: np.ndarray, minus: np.ndarray) -> Tuple[float, float]:
        first, second = self.counter, self.counter + 1
        self.counter += 2
        if self.pool is None:
            return (
                _finite(objective(plus, first), plus, first),
                _finite(objective(minus, second), minus, second),
            )
        futures = (self.pool.submit(objective, plus, first), self.pool.submit(objective, minus, second))
        return _finite(futures[0].result(), plus, first), _finite(futures[1].result(), minus, second)

    def _calibrate(self, objective: Objective, c: float, A: float) -> float:
        config = self.config
        magnitudes = []
        for k in range(config.calibration_samples):
            delta = make_rng(config.seed, CALIBRATION_STREAM + k).choice([-1.0, 1.0], size=self.theta.size)
            plus, minus = self._pair(objective, self.theta + c * delta, self.theta - c * delta)
            magnitudes.append(abs(plus - minus) / (2.0 * c))
        magnitude = float(np.mean(magnitudes))
        scale = (A + 1.0) ** config.alpha_gain
        if magnitude == 0.0:
            logger.warning("Gradiente nulo na calibração de a; usando passo alvo sem escala")
            return config.target_step * scale
        return config.target_step * scale / magnitude

    def _should_stop(self) -> bool:
        config = self.config
        values = self.trace.accepted_values
        if not config.early_stopping or len(values) < config.early_stop_window_long:
            return False
        short = float(np.mean(values[-config.early_stop_window_short:]))
        long = float(np.mean(values[-config.early_stop_window_long:]))
        return short >= long

    def run(self) -> Tuple[np.ndarray, OptimizationTrace]:
        config = self.config
        trace = self.trace
        if config.workers > 1:
            self.pool = ThreadPoolExecutor(max_workers=2)
        try:
            setup = self._objective(0)
            if config.sigma is not None:
                sigma = float(config.sigma)
            else:
                sigma = estimate_sigma(setup, self.theta, config.sigma_estimation_samples, seed=self.counter)
                self.counter += config.sigma_estimation_samples
            A = config.A if config.A is not None else config.max_iter / 10.0
            c = config.c if config.c is not None else (sigma if sigma > 0 else 0.1)
            a = config.a if config.a is not None else self._calibrate(setup, c, A)
            trace.sigma = sigma
            trace.gains = {"a": a, "c": c, "A": A, "alpha": config.alpha_gain, "gamma": config.gamma_gain}
            logger.debug("SPSA: σ=%.3e a=%.4f c=%.4f A=%.1f", sigma, a, c, A)

            current = self._evaluate(setup, self.theta)
            trace.initial_objective = current

            for t in range(config.max_iter):
                objective = self._objective(t)
                a_t = a / (t + 1 + A) ** config.alpha_gain
                c_t = c / (t + 1) ** config.gamma_gain
                delta = make_rng(config.seed, PERTURBATION_STREAM + t).choice([-1.0, 1.0], size=self.theta.size)
                plus, minus = self._pair(objective, self.theta + c_t * delta, self.theta - c_t * delta)
                gradient = (plus - minus) / (2.0 * c_t * delta)
                candidate = self.theta - a_t * gradient
                value = self._evaluate(objective, candidate)

                accepted = not (config.blocking and value >= current + 2.0 * sigma)
                if accepted:
                    self.theta = candidate
                    current = value
                    trace.accepted_values.append(value)
                    trace.accepted_thetas.append(candidate.copy())
                trace.records.append(SPSARecord(t, value, accepted, theta_hash(self.theta)))
                logger.debug("SPSA t=%d f=%.6e aceito=%s", t, value, accepted)

                if accepted and self._should_stop():
                    trace.early_stopped = True
                    logger.warning("Parada antecipada na iteração %d", t)
                    break
        finally:
            if self.pool is not None:
                self.pool.shutdown(wait=True)

        trace.evaluations = self.counter
        window = trace.accepted_thetas[-config.averaging_window:]
        theta_star = np.mean(window, axis=0) if window else self.theta0.copy()
        trace.theta_star = theta_star
        return theta_star, trace


def spsa_minimize(
    objective: Callable[..., float],
    theta0: Sequence[float],
    config: Optional[SPSAConfig] = None,
) -> Tuple[np.ndarray, OptimizationTrace]:
    """Minimise ``objective`` and return the averaged parameters and the trace."""

    indexed = as_indexed(objective)
    return _Run(indexed, indexed, theta0, config or SPSAConfig(), handoff=0).run()


def warm_start(
    objective_cheap: Callable[..., float],
    objective_expensive: Callable[..., float],
    theta0: Sequence[float],
    config: Optional[SPSAConfig] = None,
    handoff_iterations: int = 32,
) -> Tuple[np.ndarray, OptimizationTrace]:
    """Run the first ``handoff_iterations`` (and the σ/gain set-up) on the cheap objective."""

    if handoff_iterations < 0:
        raise OptimizationError("handoff_iterations deve ser >= 0")
    cheap = as_indexed(objective_cheap)
    expensive = as_indexed(objective_expensive)
    return _Run(cheap, expensive, theta0, config or SPSAConfig(), handoff=handoff_iterations).run()


# ---------------------------------------------------------------------------
# diagnostics over recorded values


def coarse_grained_residual(values: Sequence[float], t: int, width: float = 0.1) -> float:
    """Mean of ``values`` over iterations ``[10^-width · t, 10^width · t]`` (1-based)."""

    data = np.asarray(values, dtype=float)
    low = max(int(math.floor(t * 10 ** (-width))), 1)
    high = min(int(math.ceil(t * 10 ** width)), data.size)
    if low > high:
        raise OptimizationError(f"Sem valores registrados em torno de t = {t}")
    return float(data[low - 1:high].mean())


def credible_interval_last(values: Sequence[float], window: int = 16, level: float = 0.95) -> Tuple[float, float]:
    """Normal-approximation interval for the mean of the last ``window`` values."""

    data = np.asarray(values, dtype=float)[-window:]
    if data.size < 2:
        raise OptimizationError("Intervalo exige ao menos dois valores")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    half = z * float(data.std(ddof=1)) / math.sqrt(data.size)
    centre = float(data.mean())
    return centre - half, centre + half


__all__ = [
    "OptimizationError",
    "OptimizationTrace",
    "Objective",
    "SPSAConfig",
    "SPSARecord",
    "as_indexed",
    "coarse_grained_residual",
    "credible_interval_last",
    "estimate_sigma",
    "spsa_minimize",
    "theta_hash",
    "warm_start",
]
