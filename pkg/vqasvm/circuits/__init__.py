"""Feature maps, ansatz, dataset oracle and the loss/decision/regularization circuits.

Register layouts (little-endian, listed from qubit 0 upwards):

* loss:            a(1) i(m) j(m) x0(n) x1(n) y0(1) y1(1)
* decision:        a(1) i(m) x(n) y(1) xhat(n)
* regularization:  i(m) j(m)

The label qubit reads ``|0⟩`` for ``y = +1`` and ``|1⟩`` for ``y = -1`` so that
``⟨Z_y⟩`` equals the label.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..datasets import LabeledData, TrainingSet
from ..simulator import Circuit, Gate, StateVector, run_circuit

logger = logging.getLogger(__name__)

BLOCH = "bloch"
ZZ = "zz"
FEATURE_MAP_KINDS = (BLOCH, ZZ)

HEA = "hea"
REAL_AMPLITUDES = "real-amplitudes"
ANSATZ_KINDS = (HEA, REAL_AMPLITUDES)

ZZ_RANGE_TOLERANCE = 1e-9
ZZ_DEFAULT_ROTATION = 2.0


class CircuitError(ValueError):
    """Raised when circuit specifications or parameters do not fit together."""


@dataclass(frozen=True)
class FeatureMapSpec:
    """Feature map selection.

    For the ZZ map, ``rotation`` multiplies both the single-qubit phases
    ``x_i`` and the couplings ``(π - x_i)(π - x_{i+1})``. The default 2.0
    gives ``RZ(2·x_i)``; smaller values widen the kernel.
    """

    kind: str = BLOCH
    n: int = 1
    reps: int = 2
    feature_dim: Optional[int] = None
    rotation: float = ZZ_DEFAULT_ROTATION

    def __post_init__(self) -> None:
        if self.kind not in FEATURE_MAP_KINDS:
            raise CircuitError(f"Mapa de atributos desconhecido: {self.kind}")
        if self.kind == BLOCH:
            if self.n != 1 or self.feature_dim not in (None, 2):
                raise CircuitError("O mapa de Bloch exige n = 1 qubit e N = 2 atributos")
            object.__setattr__(self, "feature_dim", 2)
        else:
            if self.n < 2:
                raise CircuitError("O mapa ZZ exige n >= 2")
            if self.feature_dim not in (None, self.n):
                raise CircuitError("O mapa ZZ exige N = n")
            if self.reps < 1:
                raise CircuitError("reps deve ser >= 1")
            if not (math.isfinite(self.rotation) and self.rotation > 0):
                raise CircuitError("O fator de rotação do mapa ZZ deve ser positivo e finito")
            object.__setattr__(self, "feature_dim", self.n)

    @classmethod
    def bloch(cls) -> "FeatureMapSpec":
        return cls(BLOCH, 1)

    @classmethod
    def zz(cls, n: int, reps: int = 2, rotation: float = ZZ_DEFAULT_ROTATION) -> "FeatureMapSpec":
        return cls(ZZ, n, reps, rotation=rotation)

    def to_dict(self) -> Dict[str, object]:
        payload: Dict[str, object] = {"kind": self.kind, "n": self.n, "reps": self.reps}
        if self.rotation != ZZ_DEFAULT_ROTATION:
            payload["rotation"] = self.rotation
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, object]) -> "FeatureMapSpec":
        return cls(
            str(payload["kind"]),
            int(payload["n"]),
            int(payload.get("reps", 2)),
            rotation=float(payload.get("rotation", ZZ_DEFAULT_ROTATION)),
        )


@dataclass(frozen=True)
class AnsatzSpec:
    """Layered ansatz over the ``m``-qubit index register.

    ``hea`` applies RY on every qubit followed by a linear CZ chain in each
    layer; ``real-amplitudes`` separates RY layers with linear CNOT chains
    and has no entangler after the last layer.
    """

    m: int
    layers: int = 1
    kind: str = HEA

    def __post_init__(self) -> None:
        if self.m < 1:
            raise CircuitError("O ansatz precisa de ao menos um qubit de índice")
        if self.layers < 1:
            raise CircuitError("O ansatz precisa de ao menos uma camada")
        if self.kind not in ANSATZ_KINDS:
            raise CircuitError(f"Ansatz desconhecido: {self.kind}")

    @property
    def num_params(self) -> int:
        return self.layers * self.m

    def to_dict(self) -> Dict[str, object]:
        payload: Dict[str, object] = {"m": self.m, "layers": self.layers}
        if self.kind != HEA:
            payload["kind"] = self.kind
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, object]) -> "AnsatzSpec":
        return cls(int(payload["m"]), int(payload["layers"]), str(payload.get("kind", HEA)))


def check_theta(spec: AnsatzSpec, theta: Sequence[float]) -> np.ndarray:
    values = np.asarray(theta, dtype=float).reshape(-1)
    if values.size != spec.num_params:
        raise CircuitError(f"θ tem {values.size} entradas, o ansatz exige {spec.num_params}")
    if not np.all(np.isfinite(values)):
        raise CircuitError("θ contém entradas não finitas")
    return values


# ---------------------------------------------------------------------------
# feature maps


def _bloch_gates(x: Sequence[float]) -> List[Gate]:
    x0, x1 = (float(v) for v in x)
    return [Gate("RY", (0,), x0), Gate("RZ", (0,), x1)]


def _zz_gates(x: Sequence[float], reps: int, rotation: float = ZZ_DEFAULT_ROTATION) -> List[Gate]:
    values = [float(v) for v in x]
    n = len(values)
    if any(abs(v) > math.pi + ZZ_RANGE_TOLERANCE for v in values):
        raise CircuitError("Atributos do mapa ZZ devem estar em [-π, π]")
    gates: List[Gate] = []
    for _ in range(reps):
        gates.extend(Gate("H", (q,)) for q in range(n))
        gates.extend(Gate("RZ", (q,), rotation * values[q]) for q in range(n))
        for q in range(n - 1):
            coupling = rotation * (math.pi - values[q]) * (math.pi - values[q + 1])
            gates.append(Gate("CNOT", (q, q + 1)))
            gates.append(Gate("RZ", (q + 1,), coupling))
            gates.append(Gate("CNOT", (q, q + 1)))
    return gates


def feature_map_gates(spec: FeatureMapSpec, x: Sequence[float]) -> List[Gate]:
    """Gate template of ``U_φ(x)`` on qubits ``0..n-1``."""

    values = np.asarray(x, dtype=float).reshape(-1)
    if values.size != spec.feature_dim:
        raise CircuitError(f"Esperados {spec.feature_dim} atributos, recebidos {values.size}")
    if not np.all(np.isfinite(values)):
        raise CircuitError("Atributos não finitos")
    if spec.kind == BLOCH:
        return _bloch_gates(values)
    return _zz_gates(values, spec.reps, spec.rotation)


def bloch_feature_map(x0: float, x1: float) -> Circuit:
    return Circuit(1, _bloch_gates((x0, x1)))


def zz_feature_map(x: Sequence[float], reps: int = 2, rotation: float = ZZ_DEFAULT_ROTATION) -> Circuit:
    values = list(x)
    if len(values) < 2:
        raise CircuitError("O mapa ZZ exige n >= 2")
    return Circuit(len(values), _zz_gates(values, reps, rotation))


def feature_map_circuit(spec: FeatureMapSpec, x: Sequence[float]) -> Circuit:
    return Circuit(spec.n, feature_map_gates(spec, x))


def feature_state(spec: FeatureMapSpec, x: Sequence[float]) -> np.ndarray:
    """Amplitudes of ``|φ(x)⟩``."""

    return np.array(run_circuit(feature_map_circuit(spec, x)).amplitudes)


def feature_states(spec: FeatureMapSpec, points: np.ndarray) -> np.ndarray:
    """Row ``i`` holds ``|φ(x_i)⟩``."""

    rows = np.asarray(points, dtype=float)
    return np.array([feature_state(spec, row) for row in rows]).reshape(len(rows), 2 ** spec.n)


def check_training_set(S: LabeledData, fmap: FeatureMapSpec) -> None:
    if S.feature_dim != fmap.feature_dim:
        raise CircuitError(
            f"Dados com {S.feature_dim} atributos incompatíveis com o mapa {fmap.kind} (N = {fmap.feature_dim})"
        )


# ---------------------------------------------------------------------------
# ansatz


def ansatz_gates(spec: AnsatzSpec, theta: Sequence[float], qubits: Optional[Sequence[int]] = None) -> List[Gate]:
    values = check_theta(spec, theta)
    wires = list(qubits) if qubits is not None else list(range(spec.m))
    if len(wires) != spec.m:
        raise CircuitError(f"O ansatz exige {spec.m} qubits, recebeu {len(wires)}")
    entangler = "CZ" if spec.kind == HEA else "CNOT"
    gates: List[Gate] = []
    for layer in range(spec.layers):
        gates.extend(Gate("RY", (wires[q],), values[layer * spec.m + q]) for q in range(spec.m))
        if spec.kind == REAL_AMPLITUDES and layer == spec.layers - 1:
            break
        gates.extend(Gate(entangler, (wires[q], wires[q + 1])) for q in range(spec.m - 1))
    return gates


def build_ansatz(spec: AnsatzSpec, theta: Sequence[float]) -> Circuit:
    """``V(θ)`` on its own ``m`` qubits, without the initial Hadamards."""

    return Circuit(spec.m, ansatz_gates(spec, theta), {"i": tuple(range(spec.m))})


def _index_preparation(spec: AnsatzSpec, theta: Sequence[float], qubits: Sequence[int]) -> List[Gate]:
    return [Gate("H", (q,)) for q in qubits] + ansatz_gates(spec, theta, qubits)


def alpha_distribution(spec: AnsatzSpec, theta: Sequence[float]) -> np.ndarray:
    """``α_i(θ) = |⟨i|V(θ)|+…+⟩|²``."""

    wires = tuple(range(spec.m))
    state = run_circuit(Circuit(spec.m, _index_preparation(spec, theta, wires)))
    alpha = state.probabilities()
    return alpha / alpha.sum()


# ---------------------------------------------------------------------------
# uniformly controlled rotations


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def gray_code_angles(angles: Sequence[float]) -> np.ndarray:
    """Angles of the Gray-ordered rotation chain realising a multiplexed rotation."""

    values = np.asarray(angles, dtype=float).reshape(-1)
    size = values.size
    signs = np.array(
        [[(-1) ** bin(b & _gray(k)).count("1") for k in range(size)] for b in range(size)],
        dtype=float,
    )
    return signs.T @ values / size


def _multiplexer_gates(angles: Sequence[float], axis: str, controls: Sequence[int], target: int) -> List[Gate]:
    values = np.asarray(angles, dtype=float).reshape(-1)
    controls = list(controls)
    size = values.size
    if size != 2 ** len(controls):
        raise CircuitError(f"{size} ângulos exigem 2^m entradas para {len(controls)} controles")
    if axis not in ("X", "Y", "Z"):
        raise CircuitError(f"Eixo desconhecido: {axis}")
    if not controls:
        return [Gate(f"R{axis}", (target,), values[0])]

    # CZ anticommutes with X and Y; the Z case is conjugated into the X case by H
    chain_axis = "RX" if axis == "Z" else f"R{axis}"
    gates: List[Gate] = [Gate("H", (target,))] if axis == "Z" else []
    for k, phi in enumerate(gray_code_angles(values)):
        gates.append(Gate(chain_axis, (target,), phi))
        if k < size - 1:
            flipped = (_gray(k) ^ _gray(k + 1)).bit_length() - 1
            gates.append(Gate("CZ", (controls[flipped], target)))
    # closing entangler between the top control and the target
    width = len(controls) + 1
    entries = np.ones(2 ** width, dtype=complex)
    top = 1 << (len(controls) - 1)
    for local in range(2 ** width):
        if local & top and local >> len(controls) & 1:
            entries[local] = -1.0
    gates.append(Gate("DIAGONAL", (*controls, target), diag_entries=entries))
    if axis == "Z":
        gates.append(Gate("H", (target,)))
    return gates


def uniformly_controlled_rotation(
    angles: Sequence[float],
    axis: str,
    controls: Sequence[int],
    target: int,
) -> Circuit:
    """Apply ``R_axis(angles[i])`` to ``target`` when ``controls`` read ``i``.

    ``M`` single-qubit rotations, ``M - 1`` CZ entanglers and one closing
    ``DIAGONAL`` over controls and target.
    """

    wires = [*controls, target]
    if len(set(wires)) != len(wires):
        raise CircuitError("Controles e alvo devem ser qubits distintos")
    return Circuit(max(wires) + 1, _multiplexer_gates(angles, axis, controls, target))


# ---------------------------------------------------------------------------
# dataset oracle


def label_angles(labels: Sequence[int]) -> np.ndarray:
    return np.array([0.0 if int(label) > 0 else math.pi for label in labels])


def _oracle_gates(
    S: LabeledData,
    fmap: FeatureMapSpec,
    index: Sequence[int],
    data: Sequence[int],
    label: int,
) -> List[Gate]:
    check_training_set(S, fmap)
    if S.size != 2 ** len(index):
        raise CircuitError(f"{S.size} pontos não cabem em um registrador de índice de {len(index)} qubits")
    if len(data) != fmap.n:
        raise CircuitError(f"O registrador de dados precisa de {fmap.n} qubits")

    templates = [feature_map_gates(fmap, point) for point in S.points]
    gates: List[Gate] = []
    for position, reference in enumerate(templates[0]):
        column = [template[position] for template in templates]
        if any(g.kind != reference.kind or g.qubits != reference.qubits for g in column):
            raise CircuitError("Modelos do mapa de atributos divergem entre pontos")
        if reference.is_rotation:
            angles = [g.parameter for g in column]
            gates.extend(_multiplexer_gates(angles, reference.kind[1], index, data[reference.qubits[0]]))
        else:
            gates.append(reference.remap(data))
    gates.extend(_multiplexer_gates(label_angles(S.labels), "X", index, label))
    return gates


def build_dataset_oracle(
    S: LabeledData,
    fmap: FeatureMapSpec,
    index_register: Optional[Sequence[int]] = None,
    data_register: Optional[Sequence[int]] = None,
    label_register: Optional[int] = None,
) -> Circuit:
    """``U_φ,S |i⟩|0…0⟩|0⟩ = |i⟩|φ(x_i)⟩|y_i⟩`` up to per-branch phases."""

    m = max(S.size.bit_length() - 1, 0)
    index = tuple(index_register) if index_register is not None else tuple(range(m))
    data = tuple(data_register) if data_register is not None else tuple(range(m, m + fmap.n))
    label = int(label_register) if label_register is not None else m + fmap.n
    wires = [*index, *data, label]
    if len(set(wires)) != len(wires):
        raise CircuitError("Registradores do oráculo colidem")
    gates = _oracle_gates(S, fmap, index, data, label)
    registers = {"x": data, "y": (label,)}
    if index:
        registers["i"] = index
    return Circuit(max(wires) + 1, gates, registers)


def prepare_training_state(
    S: LabeledData,
    fmap: FeatureMapSpec,
    alpha: Sequence[float],
    features: Optional[np.ndarray] = None,
) -> StateVector:
    """Directly built ``Σ_i √α_i |i⟩|φ(x_i)⟩|y_i⟩`` over registers i, x, y."""

    check_training_set(S, fmap)
    weights = np.asarray(alpha, dtype=float).reshape(-1)
    if weights.size != S.size:
        raise CircuitError("α e o conjunto de treino têm tamanhos diferentes")
    if features is None:
        features = feature_states(fmap, S.points)
    m = S.size.bit_length() - 1
    block = np.zeros((2, 2 ** fmap.n, S.size), dtype=complex)
    for i, label in enumerate(S.labels):
        block[0 if label > 0 else 1, :, i] = math.sqrt(max(weights[i], 0.0)) * features[i]
    registers = {"x": tuple(range(m, m + fmap.n)), "y": (m + fmap.n,)}
    if m:
        registers["i"] = tuple(range(m))
    return StateVector.from_amplitudes(block.reshape(-1), normalize=True, registers=registers)


# ---------------------------------------------------------------------------
# assembled circuits


def allocate_registers(widths: Sequence[Tuple[str, int]]) -> Tuple[Dict[str, Tuple[int, ...]], int]:
    registers: Dict[str, Tuple[int, ...]] = {}
    cursor = 0
    for name, width in widths:
        if name in registers:
            raise CircuitError(f"Registrador duplicado: {name}")
        registers[name] = tuple(range(cursor, cursor + width))
        cursor += width
    return registers, cursor


def swap_test_gates(ancilla: int, left: Sequence[int], right: Sequence[int]) -> List[Gate]:
    """``H_a``, qubit-pairwise CSWAPs sharing the ancilla, ``H_a``."""

    if len(left) != len(right):
        raise CircuitError("Registradores do teste SWAP têm larguras diferentes")
    gates = [Gate("H", (ancilla,))]
    gates.extend(Gate("CSWAP", (ancilla, a, b)) for a, b in zip(left, right))
    gates.append(Gate("H", (ancilla,)))
    return gates


def _check_ansatz(S: LabeledData, ansatz: AnsatzSpec) -> None:
    if 2 ** ansatz.m != S.size:
        raise CircuitError(f"Ansatz com m = {ansatz.m} incompatível com M = {S.size}")


def loss_layout(m: int, n: int) -> Tuple[Dict[str, Tuple[int, ...]], int]:
    return allocate_registers([("a", 1), ("i", m), ("j", m), ("x0", n), ("x1", n), ("y0", 1), ("y1", 1)])


def decision_layout(m: int, n: int) -> Tuple[Dict[str, Tuple[int, ...]], int]:
    return allocate_registers([("a", 1), ("i", m), ("x", n), ("y", 1), ("xhat", n)])


def build_loss_circuit(S: TrainingSet, fmap: FeatureMapSpec, ansatz: AnsatzSpec, theta: Sequence[float]) -> Circuit:
    _check_ansatz(S, ansatz)
    registers, width = loss_layout(ansatz.m, fmap.n)
    (a,) = registers["a"]
    body: List[Gate] = []
    body += _index_preparation(ansatz, theta, registers["i"])
    body += _index_preparation(ansatz, theta, registers["j"])
    body += _oracle_gates(S, fmap, registers["i"], registers["x0"], registers["y0"][0])
    body += _oracle_gates(S, fmap, registers["j"], registers["x1"], registers["y1"][0])
    swap = swap_test_gates(a, registers["x0"], registers["x1"])
    circuit = Circuit(width, [swap[0], *body, *swap[1:]], registers)
    logger.debug("Circuito de perda: %d qubits, %d portas", width, len(circuit))
    return circuit


def build_decision_circuit(
    x_hat: Sequence[float],
    S: TrainingSet,
    fmap: FeatureMapSpec,
    ansatz: AnsatzSpec,
    theta: Sequence[float],
) -> Circuit:
    _check_ansatz(S, ansatz)
    registers, width = decision_layout(ansatz.m, fmap.n)
    (a,) = registers["a"]
    body: List[Gate] = []
    body += _index_preparation(ansatz, theta, registers["i"])
    body += _oracle_gates(S, fmap, registers["i"], registers["x"], registers["y"][0])
    body += [gate.remap(registers["xhat"]) for gate in feature_map_gates(fmap, x_hat)]
    swap = swap_test_gates(a, registers["x"], registers["xhat"])
    return Circuit(width, [swap[0], *body, *swap[1:]], registers)


def build_regularization_circuit(ansatz: AnsatzSpec, theta: Sequence[float]) -> Circuit:
    registers, width = allocate_registers([("i", ansatz.m), ("j", ansatz.m)])
    gates = _index_preparation(ansatz, theta, registers["i"])
    gates += _index_preparation(ansatz, theta, registers["j"])
    gates += [Gate("CNOT", (i, j)) for i, j in zip(registers["i"], registers["j"])]
    return Circuit(width, gates, registers)


__all__ = [
    "ANSATZ_KINDS",
    "AnsatzSpec",
    "BLOCH",
    "CircuitError",
    "FEATURE_MAP_KINDS",
    "FeatureMapSpec",
    "HEA",
    "REAL_AMPLITUDES",
    "ZZ",
    "ZZ_DEFAULT_ROTATION",
    "allocate_registers",
    "alpha_distribution",
    "ansatz_gates",
    "bloch_feature_map",
    "build_ansatz",
    "build_dataset_oracle",
    "build_decision_circuit",
    "build_loss_circuit",
    "build_regularization_circuit",
    "check_theta",
    "check_training_set",
    "decision_layout",
    "feature_map_circuit",
    "feature_map_gates",
    "feature_state",
    "feature_states",
    "gray_code_angles",
    "label_angles",
    "loss_layout",
    "prepare_training_state",
    "swap_test_gates",
    "uniformly_controlled_rotation",
    "zz_feature_map",
]
