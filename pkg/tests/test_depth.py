from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from vqasvm.circuits import AnsatzSpec, FeatureMapSpec, build_loss_circuit
from vqasvm.circuits.depth import BASIS_KINDS, basis_decomposition, circuit_depth, decompose_gate, gate_counts
from vqasvm.datasets import random_training_set
from vqasvm.simulator import Circuit, Gate, StateVector, make_rng, run_circuit


def _random_state(num_qubits: int, seed: int) -> StateVector:
    rng = make_rng(seed, 11)
    values = rng.normal(size=2 ** num_qubits) + 1j * rng.normal(size=2 ** num_qubits)
    return StateVector.from_amplitudes(values, normalize=True)


def _phase_entries(width: int, terms: dict) -> np.ndarray:
    """Diagonal with phase ``Σ c_S Π_{j∈S} z_j`` for ``terms`` mapping subset masks to ``c_S``."""

    phases = np.zeros(2 ** width)
    for x in range(2 ** width):
        for subset, value in terms.items():
            phases[x] += value * (1 - 2 * (bin(subset & x).count("1") % 2))
    return np.exp(1j * phases)


PAIR_MINUS_QUARTER = Gate("DIAGONAL", (0, 2), diag_entries=_phase_entries(2, {0b11: -math.pi / 4, 0b01: 0.3}))
TRIPLE_HALF = Gate("DIAGONAL", (0, 1, 2), diag_entries=_phase_entries(3, {0b111: math.pi / 2, 0b100: 0.2}))
PAIR_GENERIC = Gate("DIAGONAL", (1, 2), diag_entries=_phase_entries(2, {0b11: 0.4}))


@pytest.mark.parametrize(
    "gate",
    [
        Gate("H", (1,)),
        Gate("X", (0,)),
        Gate("SX", (2,)),
        Gate("CZ", (0, 2)),
        Gate("SWAP", (2, 1)),
        Gate("CSWAP", (0, 1, 2)),
        Gate("CSWAP", (2, 0, 1)),
        Gate("DIAGONAL", (0, 1, 2), diag_entries=np.exp(1j * np.linspace(-1.0, 2.0, 8))),
        Gate("DIAGONAL", (1, 2), diag_entries=[1, 1, 1, -1]),
        PAIR_MINUS_QUARTER,
        TRIPLE_HALF,
        PAIR_GENERIC,
    ],
)
def test_decomposition_matches_gate_up_to_global_phase(gate):
    initial = _random_state(3, seed=len(gate.qubits))
    reference = run_circuit(Circuit(3, [gate]), initial)
    decomposed = decompose_gate(gate)
    assert all(g.kind in BASIS_KINDS for g in decomposed)
    rewritten = run_circuit(Circuit(3, decomposed), initial)
    assert abs(np.vdot(reference.amplitudes, rewritten.amplitudes)) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize(
    "gate, cnots",
    [
        (Gate("DIAGONAL", (1, 2), diag_entries=[1, 1, 1, -1]), 1),
        (PAIR_MINUS_QUARTER, 1),
        (TRIPLE_HALF, 0),
        (PAIR_GENERIC, 2),
    ],
)
def test_diagonal_phase_terms_use_fewest_cnots(gate, cnots):
    assert gate_counts(Circuit(3, decompose_gate(gate))).get("CNOT", 0) == cnots


def test_depth_counts_parallel_layers():
    circuit = Circuit(3, [Gate("H", (0,)), Gate("H", (1,)), Gate("CNOT", (0, 1)), Gate("RZ", (2,), 0.1)])
    assert circuit_depth(circuit) == 2
    assert gate_counts(circuit) == {"CNOT": 1, "H": 2, "RZ": 1}
    assert circuit_depth(Circuit(1)) == 0


def _loss_depth(M: int) -> int:
    S = random_training_set(M, 2, seed=1)
    ansatz = AnsatzSpec(S.index_qubits)
    theta = make_rng(0, 2).uniform(-math.pi, math.pi, size=ansatz.num_params)
    return circuit_depth(build_loss_circuit(S, FeatureMapSpec.bloch(), ansatz, theta), decompose_to_basis=True)


def test_basis_decomposition_keeps_registers():
    S = random_training_set(4, 2)
    circuit = build_loss_circuit(S, FeatureMapSpec.bloch(), AnsatzSpec(2), np.zeros(2))
    decomposed = basis_decomposition(circuit)
    assert decomposed.registers == circuit.registers
    assert set(gate_counts(decomposed)) <= set(BASIS_KINDS)


def test_loss_circuit_depth_grows_linearly_with_m():
    sizes = [4, 8, 16, 32, 64]
    depths = [_loss_depth(M) for M in sizes]
    assert all(b > a for a, b in zip(depths, depths[1:]))
    slope, intercept = np.polyfit(sizes, depths, 1)
    predicted = slope * np.asarray(sizes) + intercept
    residual = float(np.sum((np.asarray(depths) - predicted) ** 2))
    total = float(np.sum((np.asarray(depths) - np.mean(depths)) ** 2))
    assert 1.0 - residual / total >= 0.99
