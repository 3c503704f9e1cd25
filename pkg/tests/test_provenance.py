from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from vqasvm.provenance import write_run_manifest


def _write_inputs(tmp_path: Path):
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    artifact = out_dir / "model.json"
    artifact.write_text('{"theta_star": [0.1]}\n', encoding="utf-8")
    source = tmp_path / "train.json"
    source.write_text('{"points": [[0, 0]], "labels": [1]}\n', encoding="utf-8")
    return out_dir, artifact, source


def test_manifest_records_artifacts_and_inputs(tmp_path):
    out_dir, artifact, source = _write_inputs(tmp_path)
    manifest_path = write_run_manifest(
        out_dir,
        run_id="abc123",
        command="train",
        parameters={"seed": 0, "max_iter": 16},
        software={"vqasvm": "0.1.0"},
        artifacts=[artifact, out_dir / "absent.csv"],
        inputs=[source],
    )
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    assert manifest["run_id"] == "abc123"
    assert manifest["command"] == "train"
    assert manifest["parameters"] == {"seed": 0, "max_iter": 16}
    assert "numpy" in manifest["environment"]

    present, absent = manifest["artifacts"]
    assert present["path"] == "model.json"
    assert present["sha256"] == hashlib.sha256(artifact.read_bytes()).hexdigest()
    assert present["size_bytes"] == artifact.stat().st_size
    assert absent == {"path": "absent.csv", "exists": False}

    assert manifest["inputs"] == [
        {"name": "train.json", "sha256": hashlib.sha256(source.read_bytes()).hexdigest()}
    ]


def test_manifest_is_identical_across_reruns(tmp_path):
    out_dir, artifact, source = _write_inputs(tmp_path)
    kwargs = dict(
        run_id="r1",
        command="train",
        parameters={"seed": 3},
        software={"vqasvm": "0.1.0"},
        artifacts=[artifact],
        inputs=[source],
    )
    first = write_run_manifest(out_dir, **kwargs).read_bytes()
    second = write_run_manifest(out_dir, **kwargs).read_bytes()
    assert first == second
