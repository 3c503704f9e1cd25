"""Classical kernels, convex SVM solvers and the exhaustive simplex oracle.

The simplex problem minimises ``αᵀQα`` with
``Q = (y yᵀ) ∘ (K + 1/λ) + I/C`` over the probability simplex; its optimum
``d̃*`` is tied to the relaxed dual optimum by ``d* = 1 / (2 d̃*)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..circuits import FeatureMapSpec, check_training_set, feature_state, feature_states
from ..datasets import LabeledData
from ..estimation import Hyperparams

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-8
SYMMETRY_TOLERANCE = 1e-10
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
ARMIJO = 1e-4
MAX_GRID_POINTS = 4


class SolverError(RuntimeError):
    """Raised when a reference problem is ill-posed."""


@dataclass(frozen=True, eq=False)
class SolverResult:
    alpha: np.ndarray
    objective: float
    beta: np.ndarray
    B: float
    bias: float
    converged: bool
    iterations: int


@dataclass(frozen=True, eq=False)
class DualResult:
    beta: np.ndarray
    value: float
    converged: bool
    iterations: int


@dataclass(frozen=True, eq=False)
class BaselineResult:
    beta: np.ndarray
    bias: float
    support: Tuple[int, ...]
    median_fallback: bool
    converged: bool


# ---------------------------------------------------------------------------
# kernels


def kernel_from_features(left: np.ndarray, right: Optional[np.ndarray] = None) -> np.ndarray:
    """Squared overlaps ``|⟨φ_i|φ_j⟩|²`` between rows of feature-state matrices."""

    right = left if right is None else right
    return np.abs(np.asarray(left).conj() @ np.asarray(right).T) ** 2


def kernel_matrix(S: LabeledData, fmap: FeatureMapSpec, threads: int = 1) -> np.ndarray:
    check_training_set(S, fmap)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda x: feature_state(fmap, x), S.points))
        features = np.array(rows).reshape(S.size, 2 ** fmap.n)
    else:
        features = feature_states(fmap, S.points)
    K = kernel_from_features(features)
    # exact symmetry; rounding in the two triangles differs in the last bit
    return 0.5 * (K + K.T)


def polynomial_kernel(X: np.ndarray, Z: np.ndarray, degree: int = 2, coef0: float = 1.0) -> np.ndarray:
    return (np.asarray(X, dtype=float) @ np.asarray(Z, dtype=float).T + coef0) ** degree


def rbf_kernel(X: np.ndarray, Z: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """``exp(-γ/2 · ‖x - z‖²)``."""

    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    squared = np.sum(X**2, axis=1)[:, None] + np.sum(Z**2, axis=1)[None, :] - 2.0 * X @ Z.T
    return np.exp(-0.5 * gamma * np.clip(squared, 0.0, None))


def validate_kernel(K: np.ndarray, lam: float = math.inf) -> np.ndarray:
    matrix = np.asarray(K, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise SolverError("A matriz de kernel deve ser quadrada")
    if not np.allclose(matrix, matrix.T, atol=SYMMETRY_TOLERANCE, rtol=0.0):
        raise SolverError("A matriz de kernel não é simétrica")
    shifted = matrix + (0.0 if math.isinf(lam) else 1.0 / lam)
    smallest = float(np.linalg.eigvalsh(0.5 * (shifted + shifted.T)).min())
    if smallest < -PSD_TOLERANCE:
        raise SolverError(f"K + 1/λ não é semidefinida positiva (menor autovalor {smallest:.3e})")
    return matrix


def objective_matrix(K: np.ndarray, y: Sequence[int], hp: Hyperparams) -> np.ndarray:
    labels = np.asarray(y, dtype=float)
    Q = np.outer(labels, labels) * (np.asarray(K, dtype=float) + 1.0 / hp.lam)
    return Q + np.eye(labels.size) * hp.inverse_C


def simplex_objective(alpha: Sequence[float], K: np.ndarray, y: Sequence[int], hp: Hyperparams) -> float:
    weights = np.asarray(alpha, dtype=float)
    return float(weights @ objective_matrix(K, y, hp) @ weights)


def objective_hamiltonian_diagonal(K: np.ndarray, y: Sequence[int], hp: Hyperparams) -> np.ndarray:
    """Diagonal of ``H = Σ_ij Q_ij |i⟩⟨i| ⊗ |j⟩⟨j|``, index ``i + M·j``."""

    return objective_matrix(K, y, hp).T.reshape(-1)


def hamiltonian_expectation(diagonal: np.ndarray, alpha: Sequence[float]) -> float:
    weights = np.asarray(alpha, dtype=float)
    return float(np.dot(diagonal, np.kron(weights, weights)))


# ---------------------------------------------------------------------------
# projections and the projected-gradient driver


def project_to_simplex(v: Sequence[float]) -> np.ndarray:
    """Euclidean projection onto ``{x ⪰ 0, Σx = 1}`` by sort and threshold."""

    values = np.asarray(v, dtype=float)
    u = np.sort(values)[::-1]
    cumulative = (np.cumsum(u) - 1.0) / np.arange(1, values.size + 1)
    k = np.nonzero(cumulative < u)[0][-1]
    return np.clip(values - cumulative[k], 0.0, None)


def project_to_orthant(v: Sequence[float]) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=float), 0.0, None)


def project_to_balanced_orthant(v: Sequence[float], y: Sequence[int]) -> np.ndarray:
    """Projection onto ``{β ⪰ 0, yᵀβ = 0}``: ``β = max(v - μy, 0)`` with ``μ`` found by bisection."""

    values = np.asarray(v, dtype=float)
    labels = np.asarray(y, dtype=float)
    if np.all(labels > 0) or np.all(labels < 0):
        return np.zeros_like(values)

    def balance(mu: float) -> float:
        return float(np.dot(labels, np.clip(values - mu * labels, 0.0, None)))

    spread = float(np.max(np.abs(values))) + 1.0
    low, high = -spread, spread
    for _ in range(200):
        mid = 0.5 * (low + high)
        if balance(mid) > 0:
            low = mid
        else:
            high = mid
    return np.clip(values - 0.5 * (low + high) * labels, 0.0, None)


def _projected_gradient(
    value: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    project: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    lipschitz: float,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, float, bool, int]:
    """Barzilai–Borwein step with Armijo backtracking along the projection arc.

    Stops when the relative objective change falls below ``tol``.
    """

    x = project(start)
    f = value(x)
    g = gradient(x)
    step = 1.0 / max(lipschitz, 1e-12)
    for iteration in range(1, max_iter + 1):
        t = step
        while True:
            candidate = project(x - t * g)
            f_candidate = value(candidate)
            if f_candidate <= f + ARMIJO * float(np.dot(g, candidate - x)) or t < 1e-20:
                break
            t *= 0.5
        s = candidate - x
        g_candidate = gradient(candidate)
        curvature = float(np.dot(s, g_candidate - g))
        step = float(np.dot(s, s)) / curvature if curvature > 0 else 1.0 / max(lipschitz, 1e-12)
        step = min(max(step, 1e-12), 1e12)
        change = abs(f - f_candidate) / max(abs(f), 1e-300)
        x, f, g = candidate, f_candidate, g_candidate
        if change < tol:
            return x, f, True, iteration
    return x, f, False, max_iter


def _polish_simplex(Q: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Solve the KKT system on the detected support; keep ``alpha`` if the solution is not optimal."""

    support = np.flatnonzero(alpha > 1e-9)
    if support.size == 0:
        return alpha
    try:
        direction = np.linalg.solve(Q[np.ix_(support, support)], np.ones(support.size))
    except np.linalg.LinAlgError:
        return alpha
    total = float(direction.sum())
    if total <= 0 or np.any(direction <= 0):
        return alpha
    polished = np.zeros_like(alpha)
    polished[support] = direction / total
    multiplier = float(polished @ Q @ polished)
    if np.any(Q @ polished < multiplier - 1e-12):
        return alpha
    if polished @ Q @ polished > alpha @ Q @ alpha:
        return alpha
    return polished


def _polish_orthant(Q: np.ndarray, beta: np.ndarray) -> np.ndarray:
    support = np.flatnonzero(beta > 1e-9 * max(float(beta.max(initial=0.0)), 1.0))
    if support.size == 0:
        return beta
    try:
        solution = np.linalg.solve(Q[np.ix_(support, support)], np.ones(support.size))
    except np.linalg.LinAlgError:
        return beta
    if np.any(solution <= 0):
        return beta
    polished = np.zeros_like(beta)
    polished[support] = solution
    if np.any(Q @ polished - 1.0 < -1e-12):
        return beta
    return polished


def _dual_value(Q: np.ndarray, beta: np.ndarray) -> float:
    return float(beta.sum() - 0.5 * beta @ Q @ beta)


# ---------------------------------------------------------------------------
# solvers


def solve_probability_simplex_qp(
    K: np.ndarray,
    y: Sequence[int],
    hp: Hyperparams,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolverResult:
    """Minimise ``αᵀQα`` over the simplex and recover ``B``, ``β`` and ``b*``."""

    validate_kernel(K, hp.lam)
    labels = np.asarray(y, dtype=float)
    Q = objective_matrix(K, labels, hp)
    size = labels.size
    lipschitz = 2.0 * float(np.linalg.eigvalsh(Q).max())
    alpha, _, converged, iterations = _projected_gradient(
        lambda a: float(a @ Q @ a),
        lambda a: 2.0 * Q @ a,
        project_to_simplex,
        np.full(size, 1.0 / size),
        lipschitz,
        tol,
        max_iter,
    )
    alpha = _polish_simplex(Q, alpha)
    objective = float(alpha @ Q @ alpha)
    if not converged:
        logger.warning("Solver do simplex atingiu %d iterações sem convergir", max_iter)
    if objective <= 0:
        raise SolverError("Ótimo do simplex não positivo; B = 1/W indefinido")
    B = 1.0 / objective
    bias = float(np.dot(alpha, labels)) / hp.lam
    return SolverResult(alpha, objective, alpha * B, B, bias, converged, iterations)


def solve_dual_svm(
    K: np.ndarray,
    y: Sequence[int],
    hp: Hyperparams,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> DualResult:
    """Maximise ``Σβ - ½βᵀQβ`` over ``β ⪰ 0``."""

    validate_kernel(K, hp.lam)
    Q = objective_matrix(K, y, hp)
    size = Q.shape[0]
    lipschitz = float(np.linalg.eigvalsh(Q).max())
    beta, _, converged, iterations = _projected_gradient(
        lambda b: -_dual_value(Q, b),
        lambda b: Q @ b - 1.0,
        project_to_orthant,
        np.full(size, 1.0 / max(lipschitz, 1e-12) / size),
        lipschitz,
        tol,
        max_iter,
    )
    beta = _polish_orthant(Q, beta)
    if not converged:
        logger.warning("Solver dual atingiu %d iterações sem convergir", max_iter)
    return DualResult(beta, _dual_value(Q, beta), converged, iterations)


def solve_hard_margin_dual(
    K: np.ndarray,
    y: Sequence[int],
    C: float = math.inf,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    support_threshold: float = 1e-6,
) -> BaselineResult:
    """Dual with the ``Σβ_i y_i = 0`` constraint and bias recovered from support vectors."""

    matrix = validate_kernel(K)
    labels = np.asarray(y, dtype=float)
    inverse_C = 0.0 if math.isinf(C) else 1.0 / C
    Q = np.outer(labels, labels) * matrix + inverse_C * np.eye(labels.size)
    lipschitz = float(np.linalg.eigvalsh(Q).max())
    beta, _, converged, _ = _projected_gradient(
        lambda b: -_dual_value(Q, b),
        lambda b: Q @ b - 1.0,
        lambda v: project_to_balanced_orthant(v, labels),
        np.ones(labels.size),
        lipschitz,
        tol,
        max_iter,
    )
    if not converged:
        logger.warning("Dual com margem rígida atingiu %d iterações sem convergir", max_iter)

    coefficients = beta * labels
    scale = max(float(beta.max(initial=0.0)), 1.0)
    support = tuple(int(q) for q in np.flatnonzero(beta > support_threshold * scale))
    if support:
        estimates = [labels[q] * (1.0 - inverse_C * beta[q]) - float(matrix[q] @ coefficients) for q in support]
        return BaselineResult(beta, float(np.mean(estimates)), support, False, converged)

    logger.warning("Nenhum vetor de suporte acima do limiar; usando a mediana para o viés")
    residuals = labels - matrix @ coefficients
    return BaselineResult(beta, float(np.median(residuals)), support, True, converged)


def classical_baseline_predict(K_cross: np.ndarray, result: BaselineResult, y: Sequence[int]) -> np.ndarray:
    """Decision values ``Σ_i β_i y_i k(x, x_i) + b`` for rows of ``K_cross`` (test × train)."""

    return np.asarray(K_cross, dtype=float) @ (result.beta * np.asarray(y, dtype=float)) + result.bias


def classical_decisions(
    X: np.ndarray,
    alpha: Sequence[float],
    S: LabeledData,
    fmap: FeatureMapSpec,
    lam: float,
    *,
    features: Optional[np.ndarray] = None,
) -> np.ndarray:
    """``f(x̂) = Σ_i α_i y_i (k(x_i, x̂) + 1/λ)`` for every row of ``X``."""

    check_training_set(S, fmap)
    if features is None:
        features = feature_states(fmap, S.points)
    queries = feature_states(fmap, np.asarray(X, dtype=float).reshape(-1, fmap.feature_dim))
    cross = kernel_from_features(queries, features)
    weights = np.asarray(alpha, dtype=float) * S.labels
    return (cross + 1.0 / lam) @ weights


def classical_decision(x_hat: Sequence[float], alpha: Sequence[float], S: LabeledData, fmap: FeatureMapSpec, lam: float) -> float:
    return float(classical_decisions(np.asarray([x_hat], dtype=float), alpha, S, fmap, lam)[0])


def brute_force_simplex_oracle(
    K: np.ndarray,
    y: Sequence[int],
    hp: Hyperparams,
    grid_resolution: float = 1e-3,
) -> Tuple[np.ndarray, float]:
    """Exhaustive search over ``{k/N : Σk = N}`` with ``N = round(1/grid_resolution)``."""

    Q = objective_matrix(K, y, hp)
    size = Q.shape[0]
    if size > MAX_GRID_POINTS:
        raise SolverError(f"Busca exaustiva limitada a M <= {MAX_GRID_POINTS}, recebeu {size}")
    if size == 1:
        return np.ones(1), float(Q[0, 0])
    N = max(int(round(1.0 / grid_resolution)), 1)

    best_value = math.inf
    best_alpha = np.full(size, 1.0 / size)
    # loop over leading coordinates, vectorise the trailing two free ones
    lead = max(size - 3, 0)
    for prefix in itertools.product(range(N + 1), repeat=lead):
        rest = N - sum(prefix)
        if rest < 0:
            continue
        if size - lead == 2:
            a = np.arange(rest + 1)
            grid = np.stack([a, rest - a], axis=1)
        else:
            a, b = np.meshgrid(np.arange(rest + 1), np.arange(rest + 1), indexing="ij")
            keep = a + b <= rest
            grid = np.stack([a[keep], b[keep], rest - a[keep] - b[keep]], axis=1)
        candidates = np.hstack([np.tile(np.asarray(prefix, dtype=float), (grid.shape[0], 1)), grid]) / N
        values = np.einsum("pi,ij,pj->p", candidates, Q, candidates)
        winner = int(np.argmin(values))
        if values[winner] < best_value:
            best_value = float(values[winner])
            best_alpha = candidates[winner]
    return best_alpha, best_value


__all__ = [
    "BaselineResult",
    "DualResult",
    "SolverError",
    "SolverResult",
    "brute_force_simplex_oracle",
    "classical_baseline_predict",
    "classical_decision",
    "classical_decisions",
    "hamiltonian_expectation",
    "kernel_from_features",
    "kernel_matrix",
    "objective_hamiltonian_diagonal",
    "objective_matrix",
    "polynomial_kernel",
    "project_to_balanced_orthant",
    "project_to_orthant",
    "project_to_simplex",
    "rbf_kernel",
    "simplex_objective",
    "solve_dual_svm",
    "solve_hard_margin_dual",
    "solve_probability_simplex_qp",
    "validate_kernel",
]
