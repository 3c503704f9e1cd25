"""JSON and CSV writers shared by every stage."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Sequence

import numpy as np

SCHEMA_VERSION = 1


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        # JSON has no infinities; "inf" round-trips through float()
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, Mapping):
        return {str(key): _jsonable(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    return value


def dumps_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(_jsonable(payload), ensure_ascii=False, indent=2) + "\n"


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    """Write ``payload`` as UTF-8 JSON, stamping ``schema_version`` when absent."""

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    document = dict(payload)
    document.setdefault("schema_version", SCHEMA_VERSION)
    target.write_text(dumps_json(document), encoding="utf-8")
    return target


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a tidy CSV table; floats use ``repr`` so reruns are byte-identical."""

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_cell(value) for value in row])
    return target


def read_csv_rows(path: Path) -> List[dict]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


__all__ = [
    "SCHEMA_VERSION",
    "dumps_json",
    "format_cell",
    "read_csv_rows",
    "read_json",
    "write_csv",
    "write_json",
]
