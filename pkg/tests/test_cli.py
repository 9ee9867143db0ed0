import json
import subprocess
import sys

import pytest
import yaml

from parscope.cli import run
from parscope.simulator import generate_workload

from tracekit import Trace, pair_spec


@pytest.fixture
def workload(tmp_path):
    spec = tmp_path / "w.yaml"
    spec.write_text(generate_workload(5).dump())
    log, truth = tmp_path / "w.log", tmp_path / "truth.json"
    assert run(["simulate", str(spec), "-o", str(log), "--truth", str(truth)]) == 0
    return tmp_path, log, truth


def test_validate_accepts_simulated_log(workload, capsys):
    _, log, _ = workload
    assert run(["validate", str(log), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ok"] and out["violations"] == []


def test_report_json_equals_truth(workload):
    tmp, log, truth = workload
    out = tmp / "r.json"
    assert run(["report", str(log), "--json", "-o", str(out)]) == 0
    assert out.read_text() == truth.read_text()


def test_canonicalized_log_gives_same_report(workload):
    tmp, log, _ = workload
    canon = tmp / "c.log"
    assert run(["canonicalize", str(log), "-o", str(canon)]) == 0
    a, b = tmp / "a.json", tmp / "b.json"
    run(["report", str(log), "--json", "-o", str(a)])
    run(["report", str(canon), "--json", "-o", str(b)])
    assert a.read_text() == b.read_text()


def test_workers_do_not_change_output(workload):
    tmp, log, _ = workload
    a, b = tmp / "a.json", tmp / "b.json"
    run(["report", str(log), "--json", "--instances", "-o", str(a)])
    run(["report", str(log), "--json", "--instances", "--workers", "4", "-o", str(b)])
    assert a.read_text() == b.read_text()


def test_metric_flags_reach_truth_and_report(tmp_path):
    spec = tmp_path / "p.yaml"
    spec.write_text(yaml.safe_dump(pair_spec(2, works=(400, 600))))
    log, truth, out = tmp_path / "p.log", tmp_path / "t.json", tmp_path / "r.json"
    flags = ["--csc", "7", "--conj-csc", "m.m:1=3", "--no-spark-runnable"]
    assert run(["simulate", str(spec), "-o", str(log), "--truth", str(truth)] + flags) == 0
    assert run(["report", str(log), "--json", "-o", str(out)] + flags) == 0
    assert out.read_text() == truth.read_text()
    assert json.loads(out.read_text())["program"]["nanosecs_per_call"] is not None


def test_text_report_and_figures(workload, capsys):
    tmp, log, _ = workload
    figs = tmp / "figs"
    assert run(["report", str(log), "--figures", str(figs)]) == 0
    text = capsys.readouterr().out
    assert text.startswith("engines ") and "conjunction " in text
    assert (figs / "cpus_over_time.svg").read_text().startswith("<?xml")


def test_dump_lists_every_event(workload, capsys):
    _, log, _ = workload
    assert run(["dump", str(log), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["events"][0]["name"] == "STARTUP"
    assert doc["events"][-1]["name"] == "SHUTDOWN"
    assert run(["dump", str(log), "--model"]) == 0
    assert capsys.readouterr().out.strip()


def test_timeline_of_empty_trace(tmp_path):
    log = tmp_path / "e.log"
    log.write_bytes(Trace(3).log(1000))
    out = tmp_path / "t.svg"
    assert run(["timeline", str(log), "-o", str(out)]) == 0
    svg = out.read_text()
    for e in range(3):
        assert f"engine {e}" in svg


def test_timeline_is_deterministic(workload):
    tmp, log, _ = workload
    a, b = tmp / "a.svg", tmp / "b.svg"
    run(["timeline", str(log), "-o", str(a)])
    run(["timeline", str(log), "-o", str(b), "--from", "0"])
    assert a.read_bytes() == b.read_bytes()


def test_usage_errors_exit_1(workload, capsys):
    _, log, _ = workload
    assert run(["report"]) == 1
    assert run(["report", str(log), "--json", "--text"]) == 1
    assert run(["report", str(log), "--conj-csc", "nope", "--json"]) == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["exit_code"] == 1
    assert run(["timeline", str(log), "-o", "x.svg", "--from", "9", "--to", "3"]) == 1


def test_bad_log_exits_2_with_json_error(tmp_path, capsys):
    bad = tmp_path / "bad.log"
    bad.write_bytes(b"NOTALOG!" + bytes(16))
    assert run(["report", str(bad), "--json"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err == {"error": "BadMagic", "message": err["message"], "exit_code": 2}


def test_bad_spec_exits_2(tmp_path, capsys):
    spec = tmp_path / "s.yaml"
    spec.write_text(yaml.safe_dump({"n_engines": 1, "main": [{"conj": "missing"}]}))
    assert run(["simulate", str(spec), "-o", str(tmp_path / "o.log")]) == 2
    assert "missing" in capsys.readouterr().err


def test_missing_file_exits_3(tmp_path):
    assert run(["validate", str(tmp_path / "absent.log")]) == 3
    assert run(["simulate", str(tmp_path / "absent.yaml"), "-o", "x"]) == 3


def test_validate_flags_malformed_log(tmp_path, capsys):
    from parscope.eventlog import EventKind as K

    log = tmp_path / "m.log"
    log.write_bytes(Trace(1).add(2, 0, K.CREATE_SPARK_THREAD, 4).log(10))
    assert run(["validate", str(log)]) == 2
    assert "OrphanSparkThread" in capsys.readouterr().out


def test_console_script_entry_point(workload):
    _, log, truth = workload
    proc = subprocess.run([sys.executable, "-m", "parscope.cli", "report", str(log), "--json"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout == truth.read_text()
