"""Depth and gate counts over the ``{RX, RY, RZ, CNOT}`` basis.

Rewrite rules, each exact up to a global phase:

* ``H``      → ``RZ(π)`` then ``RY(π/2)``
* ``X``      → ``RX(π)``;  ``SX`` → ``RX(π/2)``
* ``CZ``     → ``H_t · CNOT · H_t``
* ``SWAP``   → three alternating CNOTs
* ``CSWAP``  → ``CNOT(b→a) · Toffoli(c, a → b) · CNOT(b→a)`` with the
  standard 6-CNOT Toffoli and ``T = RZ(π/4)``
* ``DIAGONAL`` → Walsh phase polynomial: one ``RZ`` per non-zero parity
  term, conjugated by a CNOT ladder onto the last qubit of the term;
  CZ-equivalent pair terms use the single-CNOT ``CZ`` rule
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from typing import Dict, List, Sequence

import numpy as np

from ..simulator import Circuit, Gate

logger = logging.getLogger(__name__)

BASIS_KINDS = ("RX", "RY", "RZ", "CNOT")
PHASE_CUTOFF = 1e-12
PHASE_TOLERANCE = 1e-9


def _h(q: int) -> List[Gate]:
    return [Gate("RZ", (q,), math.pi), Gate("RY", (q,), math.pi / 2.0)]


def _t(q: int, sign: float = 1.0) -> Gate:
    return Gate("RZ", (q,), sign * math.pi / 4.0)


def _cnot(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


def _toffoli(c0: int, c1: int, target: int) -> List[Gate]:
    gates = _h(target)
    gates += [
        _cnot(c1, target),
        _t(target, -1.0),
        _cnot(c0, target),
        _t(target),
        _cnot(c1, target),
        _t(target, -1.0),
        _cnot(c0, target),
        _t(c1),
        _t(target),
    ]
    gates += _h(target)
    gates += [_cnot(c0, c1), _t(c0), _t(c1, -1.0), _cnot(c0, c1)]
    return gates


def _cz(control: int, target: int) -> List[Gate]:
    return _h(target) + [_cnot(control, target)] + _h(target)


def _near(value: float, target: float) -> bool:
    return abs(value - target) < PHASE_TOLERANCE


def _phase_polynomial(qubits: Sequence[int], entries: np.ndarray) -> List[Gate]:
    """Diagonal ``exp(i Σ_S c_S Π_{j∈S} z_j)`` as CNOT ladders around ``RZ`` terms.

    Coefficients are taken modulo π. Multi-qubit terms at ±π/2 are Pauli-Z
    products and fold into single-qubit terms; pair terms at ±π/4 become one
    CZ plus single-qubit corrections.
    """

    width = len(qubits)
    phases = np.angle(entries)
    coefficients: Dict[int, float] = {}
    for subset in range(1, 2 ** width):
        parity = np.array([bin(subset & x).count("1") % 2 for x in range(2 ** width)])
        value = float(np.dot(phases, 1 - 2 * parity)) / 2 ** width
        coefficients[subset] = value - math.pi * round(value / math.pi)

    gates: List[Gate] = []
    singles = {j: coefficients[1 << j] for j in range(width)}
    for subset, value in coefficients.items():
        members = [j for j in range(width) if subset >> j & 1]
        if len(members) < 2 or abs(value) < PHASE_CUTOFF:
            continue
        if _near(abs(value), math.pi / 2.0):
            for j in members:
                singles[j] -= math.pi / 2.0
            continue
        if len(members) == 2 and _near(abs(value), math.pi / 4.0):
            gates += _cz(qubits[members[0]], qubits[members[1]])
            shift = math.pi / 4.0 if value > 0 else -math.pi / 4.0
            for j in members:
                singles[j] += shift
            continue
        wires = [qubits[j] for j in members]
        ladder = [_cnot(wires[k], wires[k + 1]) for k in range(len(wires) - 1)]
        gates += ladder
        gates.append(Gate("RZ", (wires[-1],), -2.0 * value))
        gates += list(reversed(ladder))
    for j, value in singles.items():
        value -= math.pi * round(value / math.pi)
        if abs(value) >= PHASE_CUTOFF:
            gates.append(Gate("RZ", (qubits[j],), -2.0 * value))
    return gates


def decompose_gate(gate: Gate) -> List[Gate]:
    kind = gate.kind
    if kind in BASIS_KINDS:
        return [gate]
    if kind == "H":
        return _h(gate.qubits[0])
    if kind == "X":
        return [Gate("RX", gate.qubits, math.pi)]
    if kind == "SX":
        return [Gate("RX", gate.qubits, math.pi / 2.0)]
    if kind == "CZ":
        control, target = gate.qubits
        return _cz(control, target)
    if kind == "SWAP":
        a, b = gate.qubits
        return [_cnot(a, b), _cnot(b, a), _cnot(a, b)]
    if kind == "CSWAP":
        control, a, b = gate.qubits
        return [_cnot(b, a)] + _toffoli(control, a, b) + [_cnot(b, a)]
    if kind == "DIAGONAL":
        return _phase_polynomial(gate.qubits, gate.diag_entries)
    raise ValueError(f"Sem regra de decomposição para {kind}")


def basis_decomposition(circuit: Circuit) -> Circuit:
    """Rewrite ``circuit`` into ``{RX, RY, RZ, CNOT}`` keeping its registers."""

    gates: List[Gate] = []
    for gate in circuit.gates:
        gates.extend(decompose_gate(gate))
    return Circuit(circuit.num_qubits, gates, circuit.registers)


def circuit_depth(circuit: Circuit, decompose_to_basis: bool = False) -> int:
    """Longest chain when every gate occupies all of its qubits for one layer."""

    if decompose_to_basis:
        circuit = basis_decomposition(circuit)
    free: Dict[int, int] = {}
    for gate in circuit.gates:
        layer = max((free.get(q, 0) for q in gate.qubits), default=0) + 1
        for q in gate.qubits:
            free[q] = layer
    return max(free.values(), default=0)


def gate_counts(circuit: Circuit) -> Dict[str, int]:
    return dict(sorted(Counter(gate.kind for gate in circuit.gates).items()))


__all__ = [
    "BASIS_KINDS",
    "basis_decomposition",
    "circuit_depth",
    "decompose_gate",
    "gate_counts",
]
