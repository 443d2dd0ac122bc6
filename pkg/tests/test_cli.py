import json
import subprocess
import sys

import pytest
import yaml

from edgedetect.cli import main

FAST = ["--set", "model.hidden_size=8", "--set", "model.dense_size=8",
        "--set", "train.epochs=2", "--set", "model.threshold=0.5"]


@pytest.fixture(scope="module")
def csvs(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["synth", "--n-packets", "1000", "--seed", "1", "--output", str(d / "train.csv")]) == 0
    assert main(["synth", "--n-packets", "300", "--seed", "2", "--output", str(d / "test.csv")]) == 0
    return d / "train.csv", d / "test.csv"


def _pipeline(out, train_csv, test_csv, capsys, extra=()):
    data = ["--set", f"data.train_path={train_csv}", "--set", f"data.test_path={test_csv}"]
    assert main(["preprocess", "--out", str(out)] + data + list(extra)) == 0
    summary = json.loads(capsys.readouterr().out)
    assert main(["train", "--out", str(out)] + FAST + list(extra)) == 0
    capsys.readouterr()
    return summary


@pytest.fixture(scope="module")
def trained(csvs, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    data = ["--set", f"data.train_path={csvs[0]}", "--set", f"data.test_path={csvs[1]}"]
    assert main(["preprocess", "--out", str(out)] + data) == 0
    assert main(["train", "--out", str(out)] + FAST) == 0
    return out


def test_preprocess_window_counts(csvs, tmp_path, capsys):
    summary = _pipeline(tmp_path, *csvs, capsys)
    assert summary["train"]["windows"] == 981
    assert summary["test"]["windows"] == 281
    assert summary["feature_width"] == 25
    for name in ("feature_spec.json", "train_windows.edw", "test_windows.edw", "model.eddm",
                 "history.json"):
        assert (tmp_path / name).exists()


def test_runs_are_byte_identical(csvs, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    _pipeline(a, *csvs, capsys)
    _pipeline(b, *csvs, capsys)
    for name in ("feature_spec.json", "train_windows.edw", "model.eddm"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert main(["eval", "--out", str(a)]) == 0
    assert main(["eval", "--out", str(b)]) == 0
    ma = json.loads((a / "metrics.json").read_text())
    mb = json.loads((b / "metrics.json").read_text())
    ma.pop("test_wall_time_s")
    mb.pop("test_wall_time_s")
    assert ma == mb


def test_eval_reports_and_compares(trained, capsys, tmp_path):
    other = tmp_path / "rnn.eddm"
    assert main(["train", "--out", str(trained), "--model", str(other),
                 "--set", "model.cell_kind=FastRNN"] + FAST) == 0
    capsys.readouterr()
    assert main(["eval", "--out", str(trained), "--compare", str(other)]) == 0
    captured = capsys.readouterr()
    report = json.loads(captured.out)
    assert set(report) >= {"cell", "accuracy", "loss", "precision", "recall", "f1", "auc",
                           "kappa", "confusion", "test_wall_time_s"}
    assert "F1SCORE" in captured.err
    assert "FastRNN" in captured.err and "FastGRNN" in captured.err


def test_missing_input_fails(tmp_path, capsys):
    code = main(["preprocess", "--out", str(tmp_path), "--set",
                 f"data.train_path={tmp_path / 'absent.csv'}"])
    assert code != 0
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "feature_spec.json").exists()


def test_unknown_override_fails(capsys):
    assert main(["config", "--set", "model.depth=3"]) != 0
    assert "unknown config key" in capsys.readouterr().err


def test_digest_mismatch_refused(trained, csvs, tmp_path, capsys):
    # a spec fitted on different data must not be paired with the trained model
    other = tmp_path / "other"
    assert main(["preprocess", "--out", str(other), "--set", f"data.train_path={csvs[1]}"]) == 0
    (tmp_path / "other" / "model.eddm").write_bytes((trained / "model.eddm").read_bytes())
    capsys.readouterr()
    assert main(["eval", "--out", str(other)]) == 1
    assert "digest mismatch" in capsys.readouterr().err


def test_corrupted_model_refused(trained, tmp_path, capsys):
    blob = bytearray((trained / "model.eddm").read_bytes())
    blob[-1] ^= 0xFF
    bad = tmp_path / "bad.eddm"
    bad.write_bytes(bytes(blob))
    assert main(["eval", "--out", str(trained), "--model", str(bad)]) == 1
    assert "CRC32" in capsys.readouterr().err


def test_detect_from_stdin(trained, csvs):
    text = csvs[1].read_text()
    proc = subprocess.run([sys.executable, "-m", "edgedetect", "detect", "--out", str(trained),
                           "--input", "-"], input=text, capture_output=True, text=True, check=True)
    lines = [json.loads(x) for x in proc.stdout.splitlines()]
    assert len(lines) == 281
    assert lines[0]["index"] == 19
    assert {x["verdict"] for x in lines} <= {"attack", "normal"}


def test_detect_file_matches_stdin(trained, csvs, tmp_path):
    out = tmp_path / "verdicts.ndjson"
    assert main(["detect", "--out", str(trained), "--input", str(csvs[1]), "--output", str(out)]) == 0
    proc = subprocess.run([sys.executable, "-m", "edgedetect", "detect", "--out", str(trained)],
                          input=csvs[1].read_text(), capture_output=True, text=True, check=True)
    assert out.read_text() == proc.stdout


def test_bench(trained, capsys):
    assert main(["bench", "--out", str(trained), "--repeat", "3"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["timing"]["windows"] == 3 * 281
    assert (trained / "bench_verdicts.ndjson").exists()
    assert (trained / "bench_summary.json").exists()


def test_config_defaults(capsys, tmp_path):
    assert main(["config", "--defaults"]) == 0
    tree = yaml.safe_load(capsys.readouterr().out)
    assert tree["model"]["threshold"] == 0.8
    assert tree["features"]["window_length"] == 20
    path = tmp_path / "run.yaml"
    path.write_text("seed: 9\nmodel:\n  cell_kind: FastRNN\n")
    assert main(["config", "--config", str(path), "--set", "train.epochs=3"]) == 0
    tree = yaml.safe_load(capsys.readouterr().out)
    assert tree["seed"] == 9 and tree["model"]["cell_kind"] == "FastRNN"
    assert tree["train"]["epochs"] == 3


def test_global_flags_after_subcommand(capsys):
    assert main(["config", "--seed", "5"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["seed"] == 5
    assert main(["--seed", "6", "config"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["seed"] == 6


def test_module_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "edgedetect", "eval", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert proc.stderr.startswith("edgedetect eval: error:")
