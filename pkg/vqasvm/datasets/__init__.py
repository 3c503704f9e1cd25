"""Training data: labelled sets, the Bloch-sphere toy generator and CSV ingestion."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..export import read_json, write_csv, write_json
from ..simulator import make_rng

logger = logging.getLogger(__name__)

BALANCED = "balanced"
UNBALANCED = "unbalanced"
BALANCE_CHOICES = (BALANCED, UNBALANCED)


class DatasetError(ValueError):
    """Raised for malformed datasets or impossible preprocessing requests."""


def is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


@dataclass(frozen=True, eq=False)
class LabeledData:
    """Feature matrix with ±1 labels, one row per point."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1) if points.size else points.reshape(0, 0)
        if points.ndim != 2:
            raise DatasetError("Os pontos devem formar uma matriz M × N")
        labels = np.array(self.labels, dtype=int).reshape(-1)
        if labels.size != points.shape[0]:
            raise DatasetError(
                f"{points.shape[0]} pontos mas {labels.size} rótulos"
            )
        if not np.all(np.isfinite(points)):
            raise DatasetError("Os pontos contêm NaN ou infinito")
        if labels.size and not np.all(np.isin(labels, (-1, 1))):
            raise DatasetError("Rótulos devem pertencer a {-1, +1}")
        points.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.points.shape[1])

    def flipped(self) -> "LabeledData":
        return type(self)(self.points, -self.labels)


@dataclass(frozen=True, eq=False)
class TrainingSet(LabeledData):
    """Labelled set whose size is a power of two, as the index register requires."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if not is_power_of_two(self.size):
            raise DatasetError(f"O conjunto de treino precisa de 2^m pontos, recebeu {self.size}")

    @property
    def index_qubits(self) -> int:
        return self.size.bit_length() - 1


# ---------------------------------------------------------------------------
# Bloch-sphere toy data


@dataclass
class ToyDatasetConfig:
    seed: int = 0
    balance: str = UNBALANCED
    num_test: int = 30
    cluster_spread: float = 0.15
    min_test_distance: float = 0.05
    max_attempts: int = 10_000

    def __post_init__(self) -> None:
        if self.balance not in BALANCE_CHOICES:
            raise DatasetError(f"Balanceamento desconhecido: {self.balance}")
        if self.num_test < 1:
            raise DatasetError("num_test deve ser >= 1")
        if self.cluster_spread < 0:
            raise DatasetError("cluster_spread deve ser não negativo")


@dataclass(frozen=True, eq=False)
class ToyDataset:
    train: TrainingSet
    test: LabeledData
    centers: np.ndarray
    longitude: float
    center_angles: Tuple[float, float]
    config: ToyDatasetConfig = field(default_factory=ToyDatasetConfig)


def _wrap_angle(value: float) -> float:
    """Map an angle into ``(-π, π]``."""

    wrapped = math.remainder(value, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def _circular_distance(a: float, b: float) -> float:
    return abs(math.remainder(a - b, 2.0 * math.pi))


def meridian_point(angle: float, longitude: float) -> Tuple[float, float]:
    """Features ``(x0, x1)`` of the point at ``angle`` along the great circle through both poles."""

    s = angle % (2.0 * math.pi)
    if s <= math.pi:
        return s, _wrap_angle(longitude)
    return 2.0 * math.pi - s, _wrap_angle(longitude + math.pi)


def bloch_vector(x0: float, x1: float) -> np.ndarray:
    """Bloch vector of ``RZ(x1) RY(x0) |0⟩``."""

    return np.array([math.sin(x0) * math.cos(x1), math.sin(x0) * math.sin(x1), math.cos(x0)])


def sign_label(value: float) -> int:
    """Classification sign with the boundary sent to -1."""

    return 1 if value > 0 else -1


def generate_bloch_toy(config: Optional[ToyDatasetConfig] = None) -> ToyDataset:
    """Four training points near two antipodal centres on a random meridian, plus evenly spaced test points."""

    config = config or ToyDatasetConfig()
    rng = make_rng(config.seed, 0)
    longitude = float(rng.uniform(-math.pi, math.pi))
    center_a = float(rng.uniform(0.0, 2.0 * math.pi))
    center_b = (center_a + math.pi) % (2.0 * math.pi)

    test_angles = [2.0 * math.pi * k / config.num_test for k in range(config.num_test)]

    per_class = (2, 2) if config.balance == BALANCED else (3, 1)
    train_angles: List[float] = []
    train_labels: List[int] = []
    for center, label, count in ((center_a, 1, per_class[0]), (center_b, -1, per_class[1])):
        for _ in range(count):
            for _attempt in range(config.max_attempts):
                candidate = center + float(rng.uniform(-config.cluster_spread, config.cluster_spread))
                taken = test_angles + train_angles
                if all(_circular_distance(candidate, other) >= config.min_test_distance for other in taken):
                    break
            else:
                raise DatasetError("Não foi possível posicionar um ponto de treino sem sobreposição")
            train_angles.append(candidate)
            train_labels.append(label)

    center_vector = bloch_vector(*meridian_point(center_a, longitude))
    test_points = [meridian_point(angle, longitude) for angle in test_angles]
    test_labels = [sign_label(float(np.dot(bloch_vector(*p), center_vector))) for p in test_points]

    train = TrainingSet([meridian_point(angle, longitude) for angle in train_angles], train_labels)
    test = LabeledData(test_points, test_labels)
    centers = np.array([meridian_point(center_a, longitude), meridian_point(center_b, longitude)])
    logger.debug(
        "Conjunto toy: longitude=%.4f centros=(%.4f, %.4f) rótulos=%s",
        longitude,
        center_a,
        center_b,
        train_labels,
    )
    return ToyDataset(train, test, centers, longitude, (center_a, center_b), config)


# ---------------------------------------------------------------------------
# CSV ingestion and preprocessing


@dataclass(frozen=True, eq=False)
class RawTable:
    columns: Tuple[str, ...]
    features: np.ndarray
    labels: Tuple[str, ...]


@dataclass
class PreprocessRules:
    """How a raw table becomes a training split and a test split.

    Rows whose label is in ``positive_labels`` become +1, the rest -1.
    ``train_size`` rows (a power of two) are drawn with ``seed``; the
    remainder is the test split.
    """

    positive_labels: Tuple[str, ...]
    train_size: int
    seed: int = 0
    scale: bool = True


@dataclass(frozen=True, eq=False)
class FeatureScaling:
    """Per-feature affine map of ``[minimum, maximum]`` onto ``[-π, π]``."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, points: np.ndarray) -> "FeatureScaling":
        values = np.asarray(points, dtype=float)
        return cls(values.min(axis=0), values.max(axis=0))

    def apply(self, points: np.ndarray, *, clip: bool = False) -> np.ndarray:
        values = np.asarray(points, dtype=float)
        span = self.maximum - self.minimum
        constant = span == 0
        safe_span = np.where(constant, 1.0, span)
        scaled = -math.pi + 2.0 * math.pi * (values - self.minimum) / safe_span
        # constant columns sit at the midpoint of the range
        scaled = np.where(constant, 0.0, scaled)
        if clip:
            outside = int(np.count_nonzero((scaled < -math.pi) | (scaled > math.pi)))
            if outside:
                logger.debug("%d valores do conjunto de teste truncados para [-π, π]", outside)
            scaled = np.clip(scaled, -math.pi, math.pi)
        return scaled

    def to_dict(self) -> Dict[str, List[float]]:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, payload: Dict[str, Sequence[float]]) -> "FeatureScaling":
        return cls(np.asarray(payload["min"], dtype=float), np.asarray(payload["max"], dtype=float))


@dataclass(frozen=True, eq=False)
class PreparedDataset:
    train: TrainingSet
    test: LabeledData
    scaling: Optional[FeatureScaling]
    train_rows: Tuple[int, ...]


def load_csv(
    path: Path,
    label_column: Optional[str],
    feature_columns: Optional[Sequence[str]] = None,
) -> RawTable:
    """Read a header-first, comma-separated UTF-8 file into numeric features and raw labels."""

    source = Path(path)
    try:
        with source.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            header = list(reader.fieldnames or [])
            if label_column is not None and label_column not in header:
                raise DatasetError(f"Coluna de rótulo {label_column!r} ausente em {source}")
            columns = list(feature_columns) if feature_columns else [c for c in header if c != label_column]
            missing = [c for c in columns if c not in header]
            if missing:
                raise DatasetError(f"Colunas ausentes em {source}: {', '.join(missing)}")
            rows: List[List[float]] = []
            labels: List[str] = []
            for line_number, record in enumerate(reader, start=2):
                try:
                    rows.append([float(record[c]) for c in columns])
                except (TypeError, ValueError) as exc:
                    raise DatasetError(f"Valor não numérico em {source}, linha {line_number}") from exc
                labels.append(str(record[label_column]).strip() if label_column is not None else "")
    except OSError as exc:
        raise DatasetError(f"Não foi possível ler {source}: {exc}") from exc

    if not rows:
        raise DatasetError(f"Arquivo sem linhas de dados: {source}")
    features = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(features)):
        raise DatasetError(f"Valores não finitos em {source}")
    logger.debug("Lidas %d linhas e %d atributos de %s", features.shape[0], features.shape[1], source)
    return RawTable(tuple(columns), features, tuple(labels))


def preprocess(table: RawTable, rules: PreprocessRules) -> PreparedDataset:
    """Label mapping, seeded power-of-two subsample and range scaling fitted on the training split."""

    total = table.features.shape[0]
    if not is_power_of_two(rules.train_size):
        raise DatasetError(f"M = {rules.train_size} não é potência de dois")
    if rules.train_size > total:
        raise DatasetError(f"M = {rules.train_size} excede as {total} linhas disponíveis")

    positive = {str(value).strip() for value in rules.positive_labels}
    labels = np.array([1 if value in positive else -1 for value in table.labels], dtype=int)

    order = make_rng(rules.seed, 0).permutation(total)
    train_rows = np.sort(order[: rules.train_size])
    test_rows = np.sort(order[rules.train_size:])

    train_points = table.features[train_rows]
    test_points = table.features[test_rows]
    scaling: Optional[FeatureScaling] = None
    if rules.scale:
        scaling = FeatureScaling.fit(train_points)
        train_points = scaling.apply(train_points)
        test_points = scaling.apply(test_points, clip=True)

    return PreparedDataset(
        TrainingSet(train_points, labels[train_rows]),
        LabeledData(test_points.reshape(len(test_rows), table.features.shape[1]), labels[test_rows]),
        scaling,
        tuple(int(row) for row in train_rows),
    )


def random_training_set(size: int, feature_dim: int, seed: int = 0) -> TrainingSet:
    """Uniform points in ``[-π, π]^N`` with alternating labels."""

    rng = make_rng(seed, 1)
    points = rng.uniform(-math.pi, math.pi, size=(size, feature_dim))
    labels = np.where(np.arange(size) % 2 == 0, 1, -1)
    return TrainingSet(points, labels)


# ---------------------------------------------------------------------------
# persistence


def dataset_to_dict(data: LabeledData, scaling: Optional[FeatureScaling] = None) -> Dict[str, object]:
    return {
        "points": data.points.tolist(),
        "labels": [int(label) for label in data.labels],
        "scaling": scaling.to_dict() if scaling is not None else None,
    }


def write_dataset_json(path: Path, data: LabeledData, scaling: Optional[FeatureScaling] = None) -> Path:
    return write_json(path, dataset_to_dict(data, scaling))


def write_dataset_csv(path: Path, data: LabeledData) -> Path:
    header = [f"x{k}" for k in range(data.feature_dim)] + ["label"]
    rows = [list(point) + [int(label)] for point, label in zip(data.points, data.labels)]
    return write_csv(path, header, rows)


def load_dataset(path: Path, label_column: str = "label") -> Tuple[LabeledData, Optional[FeatureScaling]]:
    """Load a dataset dump (``.json``) or an already-scaled CSV with numeric ±1 labels."""

    source = Path(path)
    if not source.exists():
        raise DatasetError(f"Arquivo de dados não encontrado: {source}")
    if source.suffix.lower() == ".json":
        try:
            payload = read_json(source)
            points = payload["points"]
            labels = payload["labels"]
        except (ValueError, KeyError, TypeError) as exc:
            raise DatasetError(f"Dump de dados inválido: {source}") from exc
        if not points:
            raise DatasetError(f"Conjunto vazio: {source}")
        scaling = FeatureScaling.from_dict(payload["scaling"]) if payload.get("scaling") else None
        return LabeledData(points, labels), scaling

    table = load_csv(source, label_column)
    try:
        labels = [int(float(value)) for value in table.labels]
    except ValueError as exc:
        raise DatasetError(f"Rótulos de {source} devem ser -1 ou +1") from exc
    return LabeledData(table.features, labels), None


def load_points(path: Path, label_column: str = "label") -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Points to classify; labels are returned only when the file carries them."""

    source = Path(path)
    if not source.exists():
        raise DatasetError(f"Arquivo de dados não encontrado: {source}")
    if source.suffix.lower() == ".json":
        try:
            payload = read_json(source)
            points = np.asarray(payload["points"], dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise DatasetError(f"Dump de dados inválido: {source}") from exc
        if points.size == 0:
            raise DatasetError(f"Conjunto vazio: {source}")
        if payload.get("labels") is None:
            return points.reshape(points.shape[0], -1), None
        data = LabeledData(points, payload["labels"])
        return data.points, data.labels

    with source.open("r", encoding="utf-8", newline="") as fh:
        header = next(csv.reader(fh), [])
    if label_column in header:
        data, _ = load_dataset(source, label_column)
        return data.points, data.labels
    table = load_csv(source, None)
    return table.features, None


def as_training_set(data: LabeledData) -> TrainingSet:
    if isinstance(data, TrainingSet):
        return data
    return TrainingSet(data.points, data.labels)


__all__ = [
    "BALANCED",
    "BALANCE_CHOICES",
    "DatasetError",
    "FeatureScaling",
    "LabeledData",
    "PreparedDataset",
    "PreprocessRules",
    "RawTable",
    "ToyDataset",
    "ToyDatasetConfig",
    "TrainingSet",
    "UNBALANCED",
    "as_training_set",
    "bloch_vector",
    "dataset_to_dict",
    "generate_bloch_toy",
    "is_power_of_two",
    "load_csv",
    "load_dataset",
    "load_points",
    "meridian_point",
    "preprocess",
    "random_training_set",
    "sign_label",
    "write_dataset_csv",
    "write_dataset_json",
]
