"""Dense statevector simulation of small quantum circuits.

Amplitudes are little-endian: qubit ``q`` is bit ``q`` of the basis index.
Multi-qubit gates address their qubits in listed order, so the local basis
index of a gate acting on ``qubits`` is ``sum(bit(qubits[j]) << j)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

MAX_QUBITS = 26
NORM_TOLERANCE = 1e-10
UNITARY_TOLERANCE = 1e-12

ROTATION_KINDS = ("RX", "RY", "RZ")
FIXED_KINDS = ("H", "X", "SX", "CNOT", "CZ", "SWAP", "CSWAP")
GATE_ARITY: Dict[str, int] = {
    "RX": 1,
    "RY": 1,
    "RZ": 1,
    "H": 1,
    "X": 1,
    "SX": 1,
    "CNOT": 2,
    "CZ": 2,
    "SWAP": 2,
    "CSWAP": 3,
}


class SimulationError(ValueError):
    """Raised when a simulation request is malformed."""


def _rotation_matrix(kind: str, theta: float) -> np.ndarray:
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    phase = np.exp(-0.5j * theta)
    return np.array([[phase, 0.0], [0.0, np.conj(phase)]], dtype=complex)


def _permutation_matrix(size: int, swaps: Sequence[Tuple[int, int]]) -> np.ndarray:
    order = list(range(size))
    for left, right in swaps:
        order[left], order[right] = order[right], order[left]
    return np.eye(size, dtype=complex)[order]


_FIXED_MATRICES: Dict[str, np.ndarray] = {
    "H": np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "SX": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
    # local bit 0 is the control, bit 1 the target
    "CNOT": _permutation_matrix(4, [(1, 3)]),
    "CZ": np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex),
    "SWAP": _permutation_matrix(4, [(1, 2)]),
    # local bit 0 is the control, bits 1 and 2 are exchanged
    "CSWAP": _permutation_matrix(8, [(3, 5)]),
}


@dataclass(frozen=True, eq=False)
class Gate:
    """One gate of the simulator's basis.

    ``parameter`` is only meaningful for rotations and ``diag_entries`` only for
    ``DIAGONAL`` gates, whose entries are indexed by the gate's local basis index.
    """

    kind: str
    qubits: Tuple[int, ...]
    parameter: Optional[float] = None
    diag_entries: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        if len(set(qubits)) != len(qubits):
            raise SimulationError(f"Qubits repetidos na porta {self.kind}: {qubits}")
        if any(q < 0 for q in qubits):
            raise SimulationError(f"Índice de qubit negativo na porta {self.kind}: {qubits}")

        if self.kind == "DIAGONAL":
            if self.diag_entries is None:
                raise SimulationError("Porta DIAGONAL exige diag_entries")
            entries = np.asarray(self.diag_entries, dtype=complex).reshape(-1)
            if entries.size != 2 ** len(qubits):
                raise SimulationError(
                    f"DIAGONAL sobre {len(qubits)} qubits exige {2 ** len(qubits)} entradas, recebeu {entries.size}"
                )
            if not np.allclose(np.abs(entries), 1.0, atol=UNITARY_TOLERANCE, rtol=0.0):
                raise SimulationError("Entradas da porta DIAGONAL não têm módulo unitário")
            entries.setflags(write=False)
            object.__setattr__(self, "diag_entries", entries)
            return

        arity = GATE_ARITY.get(self.kind)
        if arity is None:
            raise SimulationError(f"Tipo de porta desconhecido: {self.kind}")
        if len(qubits) != arity:
            raise SimulationError(f"Porta {self.kind} exige {arity} qubits, recebeu {len(qubits)}")
        if self.kind in ROTATION_KINDS:
            if self.parameter is None or not math.isfinite(float(self.parameter)):
                raise SimulationError(f"Rotação {self.kind} exige ângulo finito")
            object.__setattr__(self, "parameter", float(self.parameter))

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATION_KINDS

    def matrix(self) -> np.ndarray:
        """Return the dense unitary in the gate's local basis."""

        if self.kind in ROTATION_KINDS:
            return _rotation_matrix(self.kind, float(self.parameter))
        if self.kind == "DIAGONAL":
            return np.diag(self.diag_entries)
        return _FIXED_MATRICES[self.kind].copy()

    def inverse(self) -> Tuple["Gate", ...]:
        """Gates whose product undoes this one exactly, global phase included."""

        if self.kind in ROTATION_KINDS:
            return (Gate(self.kind, self.qubits, -float(self.parameter)),)
        if self.kind == "DIAGONAL":
            return (Gate("DIAGONAL", self.qubits, diag_entries=np.conj(self.diag_entries)),)
        if self.kind == "SX":
            # SX^4 = I
            return (self, self, self)
        return (self,)

    def remap(self, mapping: Sequence[int]) -> "Gate":
        """Return the same gate with qubit ``q`` relabelled as ``mapping[q]``."""

        return Gate(
            self.kind,
            tuple(mapping[q] for q in self.qubits),
            parameter=self.parameter,
            diag_entries=self.diag_entries,
        )


def _as_register(indices: Iterable[int]) -> Tuple[int, ...]:
    return tuple(int(q) for q in indices)


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over named, contiguous and disjoint qubit registers."""

    num_qubits: int
    gates: Tuple[Gate, ...] = ()
    registers: Mapping[str, Tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise SimulationError("Circuito precisa de ao menos um qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        registers = {name: _as_register(span) for name, span in dict(self.registers).items()}
        if not registers:
            registers = {"q": tuple(range(self.num_qubits))}

        claimed: Dict[int, str] = {}
        for name, span in registers.items():
            if span and span != tuple(range(span[0], span[0] + len(span))):
                raise SimulationError(f"Registrador {name!r} não é contíguo: {span}")
            for q in span:
                if not 0 <= q < self.num_qubits:
                    raise SimulationError(f"Registrador {name!r} excede {self.num_qubits} qubits")
                if q in claimed:
                    raise SimulationError(f"Registradores {claimed[q]!r} e {name!r} se sobrepõem no qubit {q}")
                claimed[q] = name
        object.__setattr__(self, "registers", registers)

        for gate in self.gates:
            for q in gate.qubits:
                if q not in claimed:
                    raise SimulationError(
                        f"Porta {gate.kind} usa o qubit {q}, fora dos registradores declarados"
                    )

    def register(self, name: str) -> Tuple[int, ...]:
        try:
            return self.registers[name]
        except KeyError as exc:
            raise SimulationError(f"Registrador desconhecido: {name!r}") from exc

    def __len__(self) -> int:
        return len(self.gates)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalised amplitudes over ``2**num_qubits`` basis states."""

    num_qubits: int
    amplitudes: np.ndarray
    registers: Mapping[str, Tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise SimulationError(
                f"Largura de {self.num_qubits} qubits fora do intervalo suportado [1, {MAX_QUBITS}]; "
                "circuitos mais largos (ex.: perda com M=256 e n=4, 27 qubits) só são avaliados pelo método direct"
            )
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != 2 ** self.num_qubits:
            raise SimulationError(
                f"Esperadas {2 ** self.num_qubits} amplitudes, recebidas {amplitudes.size}"
            )
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise SimulationError(f"Estado não normalizado (norma² = {norm:.3e})")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(
            self, "registers", {name: _as_register(span) for name, span in dict(self.registers).items()}
        )

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        return cls.basis(num_qubits, 0)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "StateVector":
        if not 0 <= index < 2 ** num_qubits:
            raise SimulationError(f"Índice de base {index} fora do intervalo")
        amplitudes = np.zeros(2 ** num_qubits, dtype=complex)
        amplitudes[index] = 1.0
        return cls(num_qubits, amplitudes)

    @classmethod
    def from_amplitudes(
        cls,
        amplitudes: Sequence[complex],
        *,
        normalize: bool = False,
        registers: Optional[Mapping[str, Tuple[int, ...]]] = None,
    ) -> "StateVector":
        values = np.asarray(amplitudes, dtype=complex).reshape(-1)
        num_qubits = int(round(math.log2(values.size))) if values.size else 0
        if values.size == 0 or 2 ** num_qubits != values.size:
            raise SimulationError(f"Número de amplitudes ({values.size}) não é potência de dois")
        if normalize:
            norm = float(np.linalg.norm(values))
            if norm == 0.0:
                raise SimulationError("Não é possível normalizar o vetor nulo")
            values = values / norm
        return cls(num_qubits, values, registers or {})

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def register(self, name: str) -> Tuple[int, ...]:
        try:
            return self.registers[name]
        except KeyError as exc:
            raise SimulationError(f"Registrador desconhecido: {name!r}") from exc


def _check_qubits(qubits: Sequence[int], num_qubits: int) -> None:
    for q in qubits:
        if not 0 <= int(q) < num_qubits:
            raise SimulationError(f"Qubit {q} fora do intervalo de um estado com {num_qubits} qubits")


def _local_index(qubits: Sequence[int], num_qubits: int) -> np.ndarray:
    index = np.arange(2 ** num_qubits)
    local = np.zeros_like(index)
    for position, q in enumerate(qubits):
        local |= ((index >> q) & 1) << position
    return local


def _apply(buffer: np.ndarray, gate: Gate, num_qubits: int) -> np.ndarray:
    if gate.kind == "DIAGONAL":
        return buffer * gate.diag_entries[_local_index(gate.qubits, num_qubits)]

    width = len(gate.qubits)
    tensor = buffer.reshape((2,) * num_qubits)
    # tensor axis of qubit q is num_qubits - 1 - q; the gate's most significant local bit comes first
    axes = [num_qubits - 1 - q for q in reversed(gate.qubits)]
    operator = gate.matrix().reshape((2,) * (2 * width))
    moved = np.tensordot(operator, tensor, axes=(list(range(width, 2 * width)), axes))
    return np.moveaxis(moved, list(range(width)), axes).reshape(-1)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Return ``U|state⟩`` for the unitary of ``gate``."""

    _check_qubits(gate.qubits, state.num_qubits)
    amplitudes = _apply(np.array(state.amplitudes), gate, state.num_qubits)
    return StateVector(state.num_qubits, amplitudes, state.registers)


def run_circuit(circuit: Circuit, initial: Optional[StateVector] = None) -> StateVector:
    """Apply every gate of ``circuit`` in order, starting from ``initial`` or ``|0…0⟩``."""

    if initial is None:
        initial = StateVector.zero(circuit.num_qubits)
    if initial.num_qubits != circuit.num_qubits:
        raise SimulationError(
            f"Estado com {initial.num_qubits} qubits incompatível com circuito de {circuit.num_qubits}"
        )
    buffer = np.array(initial.amplitudes)
    for gate in circuit.gates:
        buffer = _apply(buffer, gate, circuit.num_qubits)
    logger.debug("Simulados %d portas sobre %d qubits", len(circuit.gates), circuit.num_qubits)
    return StateVector(circuit.num_qubits, buffer, circuit.registers)


def expectation_pauli_z(state: StateVector, qubits: Iterable[int]) -> float:
    """Exact ``⟨Z⊗…⊗Z⟩`` over ``qubits``; the empty product is the identity."""

    qubits = list(qubits)
    _check_qubits(qubits, state.num_qubits)
    probabilities = state.probabilities()
    if not qubits:
        return float(probabilities.sum())
    index = np.arange(probabilities.size)
    parity = np.zeros_like(index)
    for q in qubits:
        parity ^= (index >> q) & 1
    return float(np.dot(probabilities, 1 - 2 * parity))


def marginal_probabilities(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """Outcome distribution on ``qubits``; outcome ``o`` has bit ``j`` equal to ``qubits[j]``."""

    qubits = list(qubits)
    _check_qubits(qubits, state.num_qubits)
    outcomes = _local_index(qubits, state.num_qubits)
    return np.bincount(outcomes, weights=state.probabilities(), minlength=2 ** len(qubits))


def projector_probability(state: StateVector, register: str, bitstring: str) -> float:
    """Probability that ``register`` reads ``bitstring`` (character ``j`` is the register's ``j``-th qubit)."""

    qubits = state.register(register)
    if len(bitstring) != len(qubits) or set(bitstring) - {"0", "1"}:
        raise SimulationError(
            f"Bitstring {bitstring!r} incompatível com o registrador {register!r} de {len(qubits)} qubits"
        )
    outcome = sum(1 << j for j, bit in enumerate(bitstring) if bit == "1")
    return float(marginal_probabilities(state, qubits)[outcome])


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``.

    Streams are independent of the order in which they are requested, so
    concurrent evaluations reproduce sequential ones exactly.
    """

    key = np.array([int(seed) % 2 ** 64, int(stream) % 2 ** 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_from_probabilities(
    probabilities: np.ndarray, width: int, shots: int, rng: np.random.Generator
) -> Dict[str, int]:
    """Multinomial histogram over ``width``-bit outcomes, keyed by bitstring."""

    if shots < 1:
        raise SimulationError("O número de shots deve ser >= 1")
    weights = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
    weights = weights / weights.sum()
    counts = rng.multinomial(int(shots), weights)
    histogram: Dict[str, int] = {}
    for outcome in np.flatnonzero(counts):
        bits = "".join("1" if (int(outcome) >> j) & 1 else "0" for j in range(width))
        histogram[bits] = int(counts[outcome])
    return dict(sorted(histogram.items()))


def sample_bits(state: StateVector, qubits: Sequence[int], shots: int, seed: int, stream: int = 0) -> Dict[str, int]:
    """Seeded measurement histogram of the listed qubits."""

    if shots < 1:
        raise SimulationError("O número de shots deve ser >= 1")
    probabilities = marginal_probabilities(state, qubits)
    return sample_from_probabilities(probabilities, len(list(qubits)), shots, make_rng(seed, stream))


def parity_mean(histogram: Mapping[str, int], positions: Sequence[int]) -> float:
    """Empirical ``⟨Z…Z⟩`` over the bit positions of a histogram's bitstrings."""

    total = 0
    signed = 0
    for bits, count in histogram.items():
        parity = sum(bits[p] == "1" for p in positions) % 2
        signed += count if parity == 0 else -count
        total += count
    if total == 0:
        raise SimulationError("Histograma vazio")
    return signed / total


__all__ = [
    "Circuit",
    "FIXED_KINDS",
    "Gate",
    "GATE_ARITY",
    "MAX_QUBITS",
    "ROTATION_KINDS",
    "SimulationError",
    "StateVector",
    "apply_gate",
    "expectation_pauli_z",
    "make_rng",
    "marginal_probabilities",
    "parity_mean",
    "projector_probability",
    "run_circuit",
    "sample_bits",
    "sample_from_probabilities",
]
