from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from vqasvm.cli import main
from vqasvm.export import read_csv_rows

TOY_FILES = ("train.json", "test.json", "train.csv", "test.csv", "toy_manifest.json", "run_manifest.json")


def _run(capsys, *argv: str) -> dict:
    assert main(list(argv)) == 0
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


@pytest.fixture
def toy_dir(tmp_path, capsys) -> Path:
    out_dir = tmp_path / "toy"
    _run(capsys, "generate-toy", "--out", str(out_dir), "--seed", "3")
    return out_dir


@pytest.fixture
def model_path(tmp_path, toy_dir, capsys) -> Path:
    out_dir = tmp_path / "model"
    _run(
        capsys,
        "train",
        "--train", str(toy_dir / "train.json"),
        "--out", str(out_dir),
        "--exact",
        "--C", "inf",
        "--layers", "1",
        "--max-iter", "8",
    )
    return out_dir / "model.json"


def test_generate_toy_is_byte_identical_for_a_seed(tmp_path, capsys):
    summary = _run(capsys, "generate-toy", "--out", str(tmp_path / "a"), "--seed", "5")
    _run(capsys, "generate-toy", "--out", str(tmp_path / "b"), "--seed", "5")
    assert summary["train_points"] == 4
    assert summary["test_points"] == 30
    for name in TOY_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "logs" / "generate-toy.log").exists()


def test_train_writes_model_trace_and_report(model_path):
    out_dir = model_path.parent
    report = json.loads((out_dir / "run_report.json").read_text(encoding="utf-8"))
    assert report["evaluations"]["regularizer"] == 0
    assert report["evaluations"]["loss"] == report["trace"]["evaluations"]
    assert report["residual"] >= -1e-6
    assert report["hyperparameters"]["C"] == "inf"
    assert len(read_csv_rows(out_dir / "trace.csv")) == 8

    manifest = json.loads((out_dir / "run_manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "train"
    assert manifest["inputs"][0]["name"] == "train.json"
    assert {item["path"] for item in manifest["artifacts"]} == {"model.json", "trace.csv", "run_report.json"}


def test_train_residual_curve_and_objective_interval(tmp_path, toy_dir, capsys):
    out_dir = tmp_path / "curve"
    _run(
        capsys,
        "train",
        "--train", str(toy_dir / "train.json"),
        "--out", str(out_dir),
        "--exact",
        "--layers", "1",
        "--max-iter", "8",
        "--no-blocking",
        "--residual-curve",
    )
    rows = read_csv_rows(out_dir / "residual_curve.csv")
    assert len(rows) == 8
    assert list(rows[0]) == ["step", "residual", "coarse_residual"]
    assert [int(row["step"]) for row in rows] == list(range(1, 9))
    assert all(float(row["residual"]) >= -1e-6 for row in rows)

    report = json.loads((out_dir / "run_report.json").read_text(encoding="utf-8"))
    low, high = report["objective_interval"]
    assert low <= high
    manifest = json.loads((out_dir / "run_manifest.json").read_text(encoding="utf-8"))
    assert "residual_curve.csv" in {item["path"] for item in manifest["artifacts"]}


def test_classify_writes_predictions_with_oracle(tmp_path, toy_dir, model_path, capsys):
    out_dir = tmp_path / "pred"
    summary = _run(
        capsys,
        "classify",
        "--model", str(model_path),
        "--test", str(toy_dir / "test.json"),
        "--out", str(out_dir),
        "--exact",
        "--with-oracle",
    )
    rows = read_csv_rows(out_dir / "predictions.csv")
    assert len(rows) == 30
    assert list(rows[0]) == ["point_id", "decision_value", "label", "true_label", "oracle_decision"]
    assert summary["points"] == 30
    assert 0.0 <= summary["accuracy"] <= 1.0
    assert summary["max_oracle_gap"] < 1e-9
    assert summary["mean_oracle_gap"] < 1e-9
    assert summary["oracle_agreement"] == 1.0


def test_classify_rejects_empty_test_file(tmp_path, model_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text('{"points": [], "labels": []}', encoding="utf-8")
    out_dir = tmp_path / "pred"
    code = main(["classify", "--model", str(model_path), "--test", str(empty), "--out", str(out_dir), "--exact"])
    assert code == 1
    assert not (out_dir / "predictions.csv").exists()
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "DatasetError"


def test_missing_training_file_is_reported(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path / "out")]) == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "ConfigError"
    assert "--train" in error["message"]


def test_unwritable_output_path_is_reported_as_json(tmp_path, capsys):
    blocker = tmp_path / "occupied"
    blocker.write_text("", encoding="utf-8")
    assert main(["generate-toy", "--out", str(blocker)]) == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] in {"NotADirectoryError", "FileExistsError"}
    assert error["message"]


def test_reference_solve_with_sweep_and_baseline(tmp_path, toy_dir, capsys):
    out_dir = tmp_path / "ref"
    summary = _run(
        capsys,
        "reference-solve",
        "--train", str(toy_dir / "train.json"),
        "--out", str(out_dir),
        "--lambda", "10",
        "--C", "10",
        "--lambda-sweep", "0.1,1,10",
        "--baseline",
    )
    assert summary["bridge"] == pytest.approx(1.0, rel=1e-6)
    reference = json.loads((out_dir / "reference.json").read_text(encoding="utf-8"))
    assert sum(reference["alpha_star"]) == pytest.approx(1.0)
    assert reference["hamiltonian_objective"] == pytest.approx(reference["d_tilde_star"])
    assert "baseline" in reference
    sweep = read_csv_rows(out_dir / "reference_sweep.csv")
    assert [float(row["lambda"]) for row in sweep] == [0.1, 1.0, 10.0]
    assert all(float(row["bridge"]) == pytest.approx(1.0, rel=1e-6) for row in sweep)


def test_scaling_bench_without_timing(tmp_path, capsys):
    out_dir = tmp_path / "bench"
    summary = _run(capsys, "scaling-bench", "--out", str(out_dir), "--sizes", "4,8", "--repeats", "0")
    rows = read_csv_rows(out_dir / "scaling.csv")
    assert [int(row["M"]) for row in rows] == [4, 8]
    assert int(rows[1]["depth"]) > int(rows[0]["depth"])
    assert [int(row["multiplexer_entanglers"]) for row in rows] == [3, 7]
    assert not (out_dir / "scaling_timing.csv").exists()
    assert summary["sizes"] == [4, 8]


def test_scaling_bench_rejects_non_power_of_two(tmp_path):
    assert main(["scaling-bench", "--out", str(tmp_path / "bench"), "--sizes", "4,6", "--repeats", "0"]) == 1
