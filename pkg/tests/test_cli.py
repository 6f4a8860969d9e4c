from __future__ import annotations

import json
import subprocess
import sys

from nwdaf_testbed import harness
from nwdaf_testbed.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main


def test_run_then_report_then_train_eval(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--scenario", "cyclic", "--out", str(out), "--duration", "43200", "--seed", "3"]) == EXIT_OK
    assert "collected=" in capsys.readouterr().out
    log = out / harness.LOG_NAME
    assert main(["report", "--log", str(log), "--out", str(tmp_path / "rep")]) == EXIT_OK
    assert (tmp_path / "rep" / "handover_matrix.csv").exists()
    target = tmp_path / "eval.json"
    assert main(["train-eval", "--log", str(log), "--models", "dt,knn", "--split-seed", "1",
                 "--out", str(target)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "DECISION_TREE" in printed and "majority baseline" in printed
    assert {m["kind"] for m in json.loads(target.read_text())["models"]} == {"DECISION_TREE", "KNN"}


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("duration_s: -5\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["report", "--log", str(tmp_path / "nope.ndjson"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["train-eval", "--log", str(tmp_path / "nope.ndjson")]) == EXIT_CONFIG
    assert main(["train-eval", "--log", str(bad), "--models", "svm"]) == EXIT_CONFIG


def test_corrupt_log_is_a_runtime_error(tmp_path, capsys):
    log = tmp_path / "events.ndjson"
    log.write_text("garbage\n" * 3)
    assert main(["report", "--log", str(log), "--out", str(tmp_path / "rep")]) == EXIT_RUNTIME
    assert "corrupt" in capsys.readouterr().err


def test_small_dataset_is_a_runtime_error(tmp_path):
    out = tmp_path / "short"
    assert main(["run", "--scenario", "cyclic", "--out", str(out), "--duration", "600"]) == EXIT_OK
    assert main(["train-eval", "--log", str(out / harness.LOG_NAME)]) == EXIT_RUNTIME


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nwdaf_testbed", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "train-eval" in proc.stdout


def test_empty_log_gives_empty_reports(tmp_path):
    log = tmp_path / "events.ndjson"
    log.write_text("")
    assert main(["report", "--log", str(log), "--out", str(tmp_path / "rep")]) == EXIT_OK
    report = json.loads((tmp_path / "rep" / "analytics.json").read_text())
    assert report["active_ue_series"] == {} and report["handover_matrix"] == []
