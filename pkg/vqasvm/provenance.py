"""Run manifests: what a command read, what it wrote and with which software.

Only content-derived fields are recorded. Clock time and absolute host paths
are left out so two runs with the same seed produce the same manifest.
"""

from __future__ import annotations

import hashlib
import platform
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .export import write_json

MANIFEST_NAME = "run_manifest.json"
_CHUNK = 1 << 20


def sha256_of(path: Path) -> Optional[str]:
    digest = hashlib.sha256()
    try:
        with Path(path).open("rb") as fh:
            while chunk := fh.read(_CHUNK):
                digest.update(chunk)
    except OSError:
        return None
    return digest.hexdigest()


@dataclass(frozen=True)
class ArtifactRecord:
    path: str
    exists: bool
    sha256: Optional[str] = None
    size_bytes: Optional[int] = None

    @classmethod
    def inspect(cls, path: Path, base: Path) -> "ArtifactRecord":
        target = Path(path)
        try:
            relative = target.resolve().relative_to(base.resolve()).as_posix()
        except ValueError:
            relative = target.name
        if not target.is_file():
            return cls(relative, False)
        return cls(relative, True, sha256_of(target), target.stat().st_size)

    def to_dict(self) -> Dict[str, object]:
        if not self.exists:
            return {"path": self.path, "exists": False}
        return {"path": self.path, "exists": True, "sha256": self.sha256, "size_bytes": self.size_bytes}


def _source_commit() -> Optional[str]:
    try:
        output = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            check=True,
        )
    except (OSError, subprocess.CalledProcessError):
        return None
    return output.stdout.strip() or None


def write_run_manifest(
    out_dir: Path,
    *,
    run_id: str,
    command: str,
    parameters: Mapping[str, object],
    software: Mapping[str, object],
    artifacts: Sequence[Path],
    inputs: Sequence[Path] = (),
) -> Path:
    """Write ``run_manifest.json`` into ``out_dir`` and return its path."""

    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)

    manifest: Dict[str, object] = {
        "run_id": run_id,
        "command": command,
        "parameters": dict(parameters),
        "software": dict(software),
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }
    commit = _source_commit()
    if commit is not None:
        manifest["source_control"] = {"commit": commit}
    if inputs:
        manifest["inputs"] = [{"name": Path(item).name, "sha256": sha256_of(Path(item))} for item in inputs]
    records: List[Dict[str, object]] = [ArtifactRecord.inspect(item, base).to_dict() for item in artifacts]
    manifest["artifacts"] = records
    return write_json(base / MANIFEST_NAME, manifest)


__all__ = ["ArtifactRecord", "MANIFEST_NAME", "sha256_of", "write_run_manifest"]
