"""Command line interface for VQASVM."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .circuits import (
    ANSATZ_KINDS,
    BLOCH,
    FEATURE_MAP_KINDS,
    HEA,
    ZZ,
    ZZ_DEFAULT_ROTATION,
    AnsatzSpec,
    CircuitError,
    FeatureMapSpec,
    build_loss_circuit,
    uniformly_controlled_rotation,
)
from .circuits.depth import basis_decomposition, circuit_depth, gate_counts
from .config import THREADS_ENV, ConfigError, RunConfig
from .datasets import (
    BALANCE_CHOICES,
    UNBALANCED,
    DatasetError,
    LabeledData,
    PreprocessRules,
    ToyDatasetConfig,
    TrainingSet,
    as_training_set,
    generate_bloch_toy,
    load_csv,
    load_dataset,
    load_points,
    preprocess,
    random_training_set,
    write_dataset_csv,
    write_dataset_json,
)
from .engine import (
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
from .estimation import (
    CIRCUIT,
    DIRECT,
    ESTIMATOR_METHODS,
    EXACT,
    SHOTS,
    EstimationStats,
    EstimatorConfig,
    Hyperparams,
    estimate_loss,
)
from .export import write_csv, write_json
from .optimize import OptimizationError, SPSAConfig, coarse_grained_residual, credible_interval_last
from .provenance import write_run_manifest
from .reference import (
    SolverError,
    classical_baseline_predict,
    hamiltonian_expectation,
    kernel_matrix,
    objective_hamiltonian_diagonal,
    solve_dual_svm,
    solve_hard_margin_dual,
    solve_probability_simplex_qp,
)
from .simulator import SimulationError, make_rng

LOG_FORMAT = "[%(levelname)s] %(message)s"

DOMAIN_ERRORS = (
    ConfigError,
    CircuitError,
    DatasetError,
    ModelError,
    OptimizationError,
    SimulationError,
    SolverError,
)

logger = logging.getLogger("vqasvm")


# ---------------------------------------------------------------------------
# argument types


def _positive_or_inf(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"valor numérico esperado: {text!r}") from exc
    if not value > 0:
        raise argparse.ArgumentTypeError("o valor deve ser positivo (ou inf)")
    return value


def _float_list(text: str) -> List[float]:
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"lista de números inválida: {text!r}") from exc
    if not values or any(not v > 0 for v in values):
        raise argparse.ArgumentTypeError("a lista deve conter valores positivos")
    return values


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"lista de inteiros inválida: {text!r}") from exc


def _default_threads() -> int:
    try:
        return max(int(os.environ.get(THREADS_ENV, "1")), 1)
    except ValueError:
        return 1


def _serialise_value(value: Any) -> Any:
    if isinstance(value, Path):
        # only the file name; host paths would make manifests differ between machines
        return value.name
    if isinstance(value, (list, tuple)):
        return [_serialise_value(item) for item in value]
    if isinstance(value, dict):
        return {key: _serialise_value(val) for key, val in value.items()}
    return value


# ---------------------------------------------------------------------------
# parser


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("output"), help="Diretório dos arquivos de saída")
    common.add_argument("--run-id", help="Identificador da execução (resumo dos parâmetros por padrão)")
    common.add_argument("--seed", type=int, default=0, help="Semente de todos os geradores aleatórios")
    common.add_argument(
        "--threads",
        type=int,
        default=_default_threads(),
        help=f"Número de threads para avaliações independentes (padrão: ${THREADS_ENV} ou 1)",
    )
    common.add_argument("--config", type=Path, help="Arquivo de configuração (YAML, JSON ou chave = valor)")
    common.add_argument("--verbose", action="store_true", help="Mostra logs detalhados")
    return common


def _add_feature_map_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--feature-map", choices=FEATURE_MAP_KINDS, default=BLOCH, help="Mapa de atributos")
    parser.add_argument("--reps", type=int, default=2, help="Repetições do mapa ZZ")
    parser.add_argument(
        "--zz-rotation",
        type=_positive_or_inf,
        default=ZZ_DEFAULT_ROTATION,
        help="Fator das rotações do mapa ZZ (2 dá RZ(2·x); valores menores alargam o kernel)",
    )


def _add_hyperparameter_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lam", type=_positive_or_inf, default=1e4, help="Penalidade λ do viés")
    parser.add_argument("--C", dest="C", type=_positive_or_inf, default=1e4, help="Constante C (inf = margem rígida)")


def _add_estimator_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true", help="Valores esperados exatos (R = ∞)")
    group.add_argument("--shots", type=int, help="Número de medições R por estimativa")
    parser.add_argument(
        "--method",
        choices=ESTIMATOR_METHODS,
        default=DIRECT,
        help="Simulação direta dos blocos reduzidos ou dos circuitos completos",
    )


def _add_dataset_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--label-column", default="label", help="Coluna de rótulos em arquivos CSV")


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    common = _common_options()
    parser = argparse.ArgumentParser(description="Simulação clássica do SVM variacional quântico aproximado")
    subparsers = parser.add_subparsers(dest="command", required=True)
    commands: Dict[str, argparse.ArgumentParser] = {}

    toy = subparsers.add_parser("generate-toy", parents=[common], help="Gera o conjunto toy na esfera de Bloch")
    toy.add_argument("--balance", choices=BALANCE_CHOICES, default=UNBALANCED, help="Proporção de rótulos do treino")
    toy.add_argument("--num-test", type=int, default=30, help="Pontos de teste igualmente espaçados")
    toy.add_argument("--cluster-spread", type=float, default=0.15, help="Desvio angular máximo em radianos")
    commands["generate-toy"] = toy

    trainer = subparsers.add_parser("train", parents=[common], help="Treina θ com SPSA e salva o modelo")
    trainer.add_argument("--train", type=Path, help="Dados de treino (JSON ou CSV)")
    _add_dataset_options(trainer)
    trainer.add_argument("--positive", nargs="+", help="Valores de rótulo mapeados para +1 (CSV bruto)")
    trainer.add_argument("--train-size", type=int, help="M: pontos amostrados para treino (CSV bruto)")
    trainer.add_argument("--no-scale", action="store_true", help="Não reescala os atributos para [-π, π]")
    _add_feature_map_options(trainer)
    trainer.add_argument("--ansatz", choices=ANSATZ_KINDS, default=HEA, help="Família do ansatz")
    trainer.add_argument("--layers", type=int, default=2, help="Camadas do ansatz")
    _add_hyperparameter_options(trainer)
    _add_estimator_options(trainer)
    trainer.add_argument("--max-iter", type=int, default=1024, help="Iterações máximas do SPSA")
    trainer.add_argument("--no-blocking", dest="blocking", action="store_false", help="Desativa o bloqueio do SPSA")
    trainer.add_argument(
        "--warm-start",
        type=int,
        default=0,
        help="Iterações iniciais com o estimador exato antes de trocar para o configurado",
    )
    trainer.add_argument(
        "--residual-curve",
        action="store_true",
        help="Grava residual_curve.csv com Δ exato após cada passo aceito",
    )
    commands["train"] = trainer

    classify = subparsers.add_parser("classify", parents=[common], help="Classifica pontos com um modelo salvo")
    classify.add_argument("--model", type=Path, help="Modelo JSON gerado por 'train'")
    classify.add_argument("--test", type=Path, help="Pontos a classificar (JSON ou CSV)")
    _add_dataset_options(classify)
    _add_estimator_options(classify)
    classify.add_argument(
        "--with-oracle",
        action="store_true",
        help="Inclui o valor de decisão clássico calculado com α*",
    )
    commands["classify"] = classify

    reference = subparsers.add_parser("reference-solve", parents=[common], help="Resolve os problemas convexos clássicos")
    reference.add_argument("--train", type=Path, help="Dados de treino (JSON ou CSV)")
    _add_dataset_options(reference)
    _add_feature_map_options(reference)
    _add_hyperparameter_options(reference)
    reference.add_argument("--lambda-sweep", type=_float_list, help="Lista de λ separada por vírgulas")
    reference.add_argument("--baseline", action="store_true", help="Inclui o SVM dual com restrição de igualdade")
    commands["reference-solve"] = reference

    bench = subparsers.add_parser("scaling-bench", parents=[common], help="Profundidade e portas em função de M")
    bench.add_argument("--sizes", type=_int_list, default=[4, 8, 16, 32, 64], help="Valores de M separados por vírgulas")
    _add_feature_map_options(bench)
    bench.add_argument("--qubits", type=int, default=2, help="Qubits do mapa ZZ")
    bench.add_argument("--layers", type=int, default=1, help="Camadas do ansatz")
    bench.add_argument(
        "--repeats",
        type=int,
        default=1,
        help="Repetições cronometradas da avaliação de perda (0 desativa)",
    )
    commands["scaling-bench"] = bench

    return parser, commands


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Apply ``--config`` values as subcommand defaults, then parse the command line."""

    parser, commands = build_parser()
    tokens = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(tokens)
    command = next((token for token in tokens if token in commands), None)
    if known.config is not None and command is not None:
        RunConfig.from_file(known.config, command, commands[command]).apply(commands[command])
    return parser.parse_args(tokens)


# ---------------------------------------------------------------------------
# helpers shared by commands


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name) is None]
    if missing:
        raise ConfigError(f"Parâmetros obrigatórios ausentes: {', '.join(missing)}")


def _parameters(args: argparse.Namespace) -> Dict[str, Any]:
    skipped = {"command", "run_id", "out", "verbose", "threads"}
    return {key: _serialise_value(value) for key, value in sorted(vars(args).items()) if key not in skipped}


def _run_id(args: argparse.Namespace, parameters: Dict[str, Any]) -> str:
    if args.run_id:
        return args.run_id
    digest = hashlib.sha256(
        json.dumps({"command": args.command, **parameters}, sort_keys=True, default=str).encode("utf-8")
    )
    return digest.hexdigest()[:12]


def _configure_logging(out_dir: Path, command: str, verbose: bool) -> List[logging.Handler]:
    logs_dir = out_dir / "logs"
    logs_dir.mkdir(parents=True, exist_ok=True)
    handlers: List[logging.Handler] = [
        logging.StreamHandler(),
        logging.FileHandler(logs_dir / f"{command}.log", mode="w", encoding="utf-8"),
    ]
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    return handlers


def _release_logging(handlers: Sequence[logging.Handler]) -> None:
    root = logging.getLogger()
    for handler in handlers:
        root.removeHandler(handler)
        handler.close()


def _feature_map(args: argparse.Namespace, feature_dim: int) -> FeatureMapSpec:
    if args.feature_map == ZZ:
        return FeatureMapSpec.zz(feature_dim, args.reps, args.zz_rotation)
    return FeatureMapSpec.bloch()


def _estimator(args: argparse.Namespace) -> EstimatorConfig:
    if args.shots is not None:
        return EstimatorConfig(mode=SHOTS, shots=args.shots, seed=args.seed, method=args.method)
    return EstimatorConfig(mode=EXACT, seed=args.seed, method=args.method)


def _emit(payload: Dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(payload, ensure_ascii=False, sort_keys=True, default=str) + "\n")


def _load_training_set(
    args: argparse.Namespace, out_dir: Path, written: List[Path]
) -> Tuple[TrainingSet, Optional[LabeledData]]:
    """Training set plus the held-out split when a raw CSV is subsampled."""

    if args.positive:
        if args.train_size is None:
            raise DatasetError("--positive exige --train-size")
        table = load_csv(args.train, args.label_column)
        prepared = preprocess(
            table,
            PreprocessRules(tuple(args.positive), args.train_size, seed=args.seed, scale=not args.no_scale),
        )
        written.append(write_dataset_json(out_dir / "train.json", prepared.train, prepared.scaling))
        written.append(write_dataset_json(out_dir / "test.json", prepared.test, prepared.scaling))
        logger.info(
            "Pré-processamento: %d pontos de treino, %d de teste",
            prepared.train.size,
            prepared.test.size,
        )
        return prepared.train, prepared.test
    data, _ = load_dataset(args.train, args.label_column)
    return as_training_set(data), None


def _residual_rows(model: Model) -> List[Tuple[int, float, float]]:
    curve = residual_curve(model)
    return [(step, value, coarse_grained_residual(curve, step)) for step, value in enumerate(curve, start=1)]


# ---------------------------------------------------------------------------
# commands


def cmd_generate_toy(args: argparse.Namespace, out_dir: Path) -> Tuple[Dict[str, Any], List[Path], List[Path]]:
    config = ToyDatasetConfig(
        seed=args.seed,
        balance=args.balance,
        num_test=args.num_test,
        cluster_spread=args.cluster_spread,
    )
    toy = generate_bloch_toy(config)
    written = [
        write_dataset_json(out_dir / "train.json", toy.train),
        write_dataset_json(out_dir / "test.json", toy.test),
        write_dataset_csv(out_dir / "train.csv", toy.train),
        write_dataset_csv(out_dir / "test.csv", toy.test),
        write_json(
            out_dir / "toy_manifest.json",
            {
                "seed": config.seed,
                "balance": config.balance,
                "cluster_spread": config.cluster_spread,
                "longitude": toy.longitude,
                "center_angles": list(toy.center_angles),
                "centers": toy.centers,
            },
        ),
    ]
    summary = {
        "train_points": toy.train.size,
        "test_points": toy.test.size,
        "train_labels": [int(v) for v in toy.train.labels],
    }
    return summary, written, []


def cmd_train(args: argparse.Namespace, out_dir: Path) -> Tuple[Dict[str, Any], List[Path], List[Path]]:
    _require(args, "train")
    written: List[Path] = []
    S, held_out = _load_training_set(args, out_dir, written)
    fmap = _feature_map(args, S.feature_dim)
    ansatz = AnsatzSpec(S.index_qubits, args.layers, args.ansatz)
    hp = Hyperparams(args.lam, args.C)
    est = _estimator(args)
    long_window = SPSAConfig.early_stop_window_long
    spsa_config = SPSAConfig(
        max_iter=args.max_iter,
        blocking=args.blocking,
        early_stopping=args.max_iter >= long_window,
        seed=args.seed,
        workers=args.threads,
    )
    warm = WarmStartConfig(EXACT_DIRECT, args.warm_start) if args.warm_start > 0 else None
    stats = EstimationStats()

    model = train(S, fmap, ansatz, hp, est, spsa_config, warm=warm, stats=stats)
    optimum = convex_optimum(S, fmap, hp)
    residual = residual_loss(model)
    trace = model.trace
    assert trace is not None

    written.append(save_model(model, out_dir / "model.json"))
    written.append(
        write_csv(
            out_dir / "trace.csv",
            ["iteration", "objective", "accepted", "theta_hash"],
            [(r.iteration, r.objective, r.accepted, r.theta_hash) for r in trace.records],
        )
    )
    report = {
        "objective": residual + optimum,
        "optimum": optimum,
        "residual": residual,
        "trace": trace.summary(),
        "evaluations": stats.to_dict(),
        "estimator": {"mode": est.mode, "shots": None if est.exact else est.shots, "method": est.method},
        "hyperparameters": hp.to_dict(),
        "alpha_star": model.alpha_star,
    }
    if len(trace.accepted_values) >= 2:
        report["objective_interval"] = list(credible_interval_last(trace.accepted_values))
    if args.residual_curve:
        rows = _residual_rows(model)
        written.append(write_csv(out_dir / "residual_curve.csv", ["step", "residual", "coarse_residual"], rows))
        logger.info("Curva de resíduo com %d passos aceitos", len(rows))
    if held_out is not None and held_out.size:
        report["test_accuracy"] = accuracy(model, held_out, est, threads=args.threads)
        logger.info("Acurácia no conjunto de teste: %.4f", report["test_accuracy"])
    written.append(write_json(out_dir / "run_report.json", report))
    logger.info("Δ = %.6e (objetivo exato %.6e, ótimo convexo %.6e)", residual, residual + optimum, optimum)

    summary = {
        "final_objective": residual + optimum,
        "optimum": optimum,
        "residual": residual,
        "iterations": trace.iterations,
        "accepted": trace.accepted_count,
        "evaluations": stats.to_dict(),
    }
    if "test_accuracy" in report:
        summary["test_accuracy"] = report["test_accuracy"]
    return summary, written, [args.train]


def cmd_classify(args: argparse.Namespace, out_dir: Path) -> Tuple[Dict[str, Any], List[Path], List[Path]]:
    _require(args, "model", "test")
    model = load_model(args.model)
    points, labels = load_points(args.test, args.label_column)
    est = _estimator(args)
    predicted, decisions = infer(model, points, est, threads=args.threads)

    header = ["point_id", "decision_value", "label"]
    columns: List[Sequence[Any]] = [range(points.shape[0]), decisions, predicted]
    if labels is not None:
        header.append("true_label")
        columns.append(labels)
    if args.with_oracle:
        header.append("oracle_decision")
        columns.append(oracle_decisions(model, points))
    written = [write_csv(out_dir / "predictions.csv", header, zip(*columns))]

    summary: Dict[str, Any] = {"points": int(points.shape[0])}
    if labels is not None:
        summary["accuracy"] = accuracy(model, LabeledData(points, labels), est, threads=args.threads)
        logger.info("Acurácia: %.4f", summary["accuracy"])
    if args.with_oracle:
        oracle = np.asarray(columns[-1], dtype=float)
        summary["oracle_agreement"] = float(np.mean(np.where(oracle > 0, 1, -1) == predicted))
        summary["max_oracle_gap"] = float(np.max(np.abs(oracle - decisions)))
        summary["mean_oracle_gap"] = average_decision_error(model, points, est, threads=args.threads)
    return summary, written, [args.model, args.test]


def _reference_solution(K: np.ndarray, S: LabeledData, hp: Hyperparams) -> Dict[str, Any]:
    simplex = solve_probability_simplex_qp(K, S.labels, hp)
    dual = solve_dual_svm(K, S.labels, hp)
    bridge = dual.value * 2.0 * simplex.objective
    return {
        "alpha_star": simplex.alpha,
        "beta_star": simplex.beta,
        "beta_dual": dual.beta,
        "B": simplex.B,
        "d_tilde_star": simplex.objective,
        "d_star": dual.value,
        "b_star": simplex.bias,
        "bridge": bridge,
        "balance": abs(float(np.dot(simplex.alpha, S.labels))),
        "converged": {"simplex": simplex.converged, "dual": dual.converged},
    }


def cmd_reference_solve(args: argparse.Namespace, out_dir: Path) -> Tuple[Dict[str, Any], List[Path], List[Path]]:
    _require(args, "train")
    data, _ = load_dataset(args.train, args.label_column)
    fmap = _feature_map(args, data.feature_dim)
    hp = Hyperparams(args.lam, args.C)
    K = kernel_matrix(data, fmap, threads=args.threads)

    solution = _reference_solution(K, data, hp)
    solution["hyperparameters"] = hp.to_dict()
    solution["hamiltonian_objective"] = hamiltonian_expectation(
        objective_hamiltonian_diagonal(K, data.labels, hp), solution["alpha_star"]
    )
    if args.baseline:
        baseline = solve_hard_margin_dual(K, data.labels, hp.C)
        fitted = classical_baseline_predict(K, baseline, data.labels)
        solution["baseline"] = {
            "beta": baseline.beta,
            "bias": baseline.bias,
            "support": list(baseline.support),
            "median_fallback": baseline.median_fallback,
            "converged": baseline.converged,
            "train_accuracy": float(np.mean(np.where(fitted > 0, 1, -1) == data.labels)),
        }
    written = [write_json(out_dir / "reference.json", solution)]

    if args.lambda_sweep:
        rows = []
        for lam in args.lambda_sweep:
            point = _reference_solution(K, data, Hyperparams(lam, args.C))
            rows.append(
                (
                    lam,
                    point["balance"],
                    point["d_tilde_star"],
                    point["d_star"],
                    point["bridge"],
                    point["b_star"],
                    point["converged"]["simplex"] and point["converged"]["dual"],
                )
            )
        written.append(
            write_csv(
                out_dir / "reference_sweep.csv",
                ["lambda", "balance", "d_tilde_star", "d_star", "bridge", "b_star", "converged"],
                rows,
            )
        )

    summary = {
        "d_tilde_star": solution["d_tilde_star"],
        "d_star": solution["d_star"],
        "bridge": solution["bridge"],
        "converged": solution["converged"],
    }
    return summary, written, [args.train]


def _bench_point(M: int, args: argparse.Namespace) -> Tuple[Tuple[Any, ...], Optional[float]]:
    feature_dim = 2 if args.feature_map == BLOCH else args.qubits
    fmap = _feature_map(args, feature_dim)
    S = random_training_set(M, feature_dim, seed=args.seed)
    ansatz = AnsatzSpec(S.index_qubits, args.layers)
    theta = make_rng(args.seed, 2).uniform(-math.pi, math.pi, size=ansatz.num_params)

    circuit = build_loss_circuit(S, fmap, ansatz, theta)
    decomposed = basis_decomposition(circuit)
    counts = gate_counts(decomposed)
    multiplexer = uniformly_controlled_rotation(
        np.zeros(M), "Y", list(range(ansatz.m)), ansatz.m
    )
    entanglers = gate_counts(multiplexer).get("CZ", 0)
    row = (M, circuit.num_qubits, circuit_depth(decomposed), counts.get("CNOT", 0), entanglers, len(decomposed))
    logger.debug("M=%d: %d qubits, profundidade %d, %d CNOTs", M, row[1], row[2], row[3])

    seconds: Optional[float] = None
    if args.repeats > 0:
        est = EstimatorConfig(mode=EXACT, method=CIRCUIT)
        hp = Hyperparams()
        start = time.perf_counter()
        for _ in range(args.repeats):
            estimate_loss(theta, S, fmap, ansatz, hp, est)
        seconds = (time.perf_counter() - start) / args.repeats
    return row, seconds


def _linear_fit(x: Sequence[float], y: Sequence[float]) -> Dict[str, float]:
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.size < 2:
        return {"slope": math.nan, "intercept": math.nan, "r2": math.nan}
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = float(np.sum((ys - (slope * xs + intercept)) ** 2))
    total = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if total == 0 else 1.0 - residual / total
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def cmd_scaling_bench(args: argparse.Namespace, out_dir: Path) -> Tuple[Dict[str, Any], List[Path], List[Path]]:
    sizes = sorted(set(args.sizes))
    if not sizes or any(M < 2 or M & (M - 1) for M in sizes):
        raise DatasetError(f"Cada M deve ser potência de dois >= 2: {args.sizes}")

    rows = []
    timings = []
    for M in sizes:
        row, seconds = _bench_point(M, args)
        rows.append(row)
        if seconds is not None:
            timings.append((M, seconds))
            logger.info("M=%d: profundidade %d, %.4f s por avaliação de perda", M, row[2], seconds)

    written = [
        write_csv(
            out_dir / "scaling.csv",
            ["M", "num_qubits", "depth", "cnot_count", "multiplexer_entanglers", "basis_gates"],
            rows,
        )
    ]
    # wall-clock lives in its own table so scaling.csv stays reproducible
    if timings:
        written.append(write_csv(out_dir / "scaling_timing.csv", ["M", "seconds_per_loss_evaluation"], timings))

    fit = _linear_fit([row[0] for row in rows], [row[2] for row in rows])
    written.append(write_json(out_dir / "scaling_summary.json", {"depth_fit": fit, "sizes": sizes}))
    return {"depth_fit": fit, "sizes": sizes}, written, []


COMMANDS: Dict[str, Callable[[argparse.Namespace, Path], Tuple[Dict[str, Any], List[Path], List[Path]]]] = {
    "generate-toy": cmd_generate_toy,
    "train": cmd_train,
    "classify": cmd_classify,
    "reference-solve": cmd_reference_solve,
    "scaling-bench": cmd_scaling_bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_arguments(argv)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}, ensure_ascii=False) + "\n")
        return 1

    out_dir = Path(args.out)
    parameters = _parameters(args)
    run_id = _run_id(args, parameters)
    handlers: List[logging.Handler] = []
    started = time.perf_counter()
    try:
        handlers = _configure_logging(out_dir, args.command, args.verbose)
        logger.info("Iniciando '%s' (execução %s)", args.command, run_id)
        summary, written, inputs = COMMANDS[args.command](args, out_dir)
        manifest = write_run_manifest(
            out_dir,
            run_id=run_id,
            command=args.command,
            parameters=parameters,
            software={"vqasvm": __version__},
            artifacts=written,
            inputs=inputs,
        )
        for path in [*written, manifest]:
            logger.info("Arquivo exportado: %s", path)
    except (*DOMAIN_ERRORS, OSError) as exc:
        logger.debug("Falha em '%s'", args.command, exc_info=True)
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}, ensure_ascii=False) + "\n")
        return 1
    finally:
        _release_logging(handlers)

    summary["wall_time_s"] = round(time.perf_counter() - started, 3)
    _emit(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
