import csv
import json
import shutil
import subprocess
import sys

import pytest

from dcbp import cli
from dcbp.io import model_to_dict
from dcbp.model import model_a
from helpers import MODELS


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out.strip(), out.err


def rows(path):
    with open(path) as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_expect_writes_csv_and_manifest(tmp_path, capsys):
    out = tmp_path / "e.csv"
    code, line, _ = run(["expect", "--model", MODELS / "model_a.json", "--t-max", 2, "--dt", 0.5, "--out", out, "--gnuplot"], capsys)
    assert (code, line) == (0, "OK")
    r = rows(out)
    assert r[0] == ["t", "type", "mean"]
    body = r[1:]
    assert len(body) == 10 and sum(1 for x in body if x[1] == "2") == 5
    t1 = [float(x[2]) for x in body if x[1] == "2" and float(x[0]) == 1.0][0]
    assert t1 == pytest.approx(0.712197, abs=1e-6)
    man = json.loads((tmp_path / "e.csv.manifest.json").read_text())
    assert man["command"] == "expect" and str(out) in man["outputs"]
    assert "time" not in json.dumps(man).lower()
    assert (tmp_path / "e.gp").exists()


def test_extinction_table(tmp_path, capsys):
    out = tmp_path / "q.csv"
    code, line, _ = run(["extinction", "--model", MODELS / "model_a.json", "--out", out], capsys)
    assert code == 0
    q = {(r[0], r[1]): float(r[2]) for r in rows(out)[1:]}
    assert q[("1", "1")] == pytest.approx(2 / 3, abs=1e-10)
    assert q[("1", "2")] == pytest.approx(0.303515, abs=1e-6)
    assert q[("2", "1")] == 1.0


def test_extinction_non_convergence_exit_4(tmp_path, capsys):
    code, line, err = run(["extinction", "--model", MODELS / "model_a.json", "--max-iter", 2, "--out", tmp_path / "q.csv"], capsys)
    assert code == 4 and line.startswith("FAIL: no convergence")
    assert "residual" in err


def test_simulate_per_run_and_aggregate(tmp_path, capsys):
    d = tmp_path / "sim"
    code, _, _ = run(["simulate", "--model", MODELS / "tcvdbp_2x2.json", "--horizon", 2, "--reps", 3, "--seed", 4, "--events", "--out-dir", d], capsys)
    assert code == 0
    assert sorted(p.name for p in d.iterdir()) == ["events_0.csv", "events_1.csv", "events_2.csv", "manifest.json", "rep_0.csv", "rep_1.csv", "rep_2.csv"]
    head = rows(d / "rep_0.csv")[0]
    assert head == ["t", "pop_1", "pop_2", "pop_3", "pop_4", "shares_1", "shares_2", "totalProgeny"]
    a = tmp_path / "agg"
    code, _, _ = run(["simulate", "--model", MODELS / "model_a.json", "--horizon", 1, "--reps", 50, "--aggregate", "--grid", "0.5,1", "--out-dir", a], capsys)
    assert code == 0 and len(rows(a / "means.csv")) == 5


def test_shares_curve_file(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = run(["shares", "--model", MODELS / "tcvdbp_2x2.json", "--t-max", 4, "--dt", 1, "--out", out], capsys)
    assert code == 0
    text = out.read_text()
    assert "g+h+o=" in text
    r = rows(out)
    assert r[1] == ["0.0", "0.0"] or float(r[1][1]) == pytest.approx(0.0, abs=1e-12)
    assert len(r) == 6


def test_shares_rejects_wrong_variant(tmp_path, capsys):
    code, line, _ = run(["shares", "--model", MODELS / "model_a.json", "--t-max", 1, "--dt", 1, "--out", tmp_path / "s.csv"], capsys)
    assert code == 2 and line.startswith("FAIL")


def test_matexp_to_stderr_and_degenerate_exit_3(tmp_path, capsys):
    code, line, err = run(["matexp", "--model", MODELS / "model_a.json", "--t", 1], capsys)
    assert (code, line) == (0, "OK")
    assert "0.712197" in err and "max-abs difference" in err
    code, line, _ = run(["matexp", "--model", MODELS / "degenerate.json", "--t", 1, "--method", "closed"], capsys)
    assert code == 3 and line.startswith("FAIL: degenerate spectrum")
    code, _, _ = run(["matexp", "--model", MODELS / "degenerate.json", "--t", 1, "--method", "reference"], capsys)
    assert code == 0


def test_malformed_json_exit_2_no_output(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "e.csv"
    code, line, _ = run(["expect", "--model", bad, "--t-max", 1, "--dt", 1, "--out", out], capsys)
    assert code == 2 and line.startswith("FAIL: model error")
    assert not out.exists() and not (tmp_path / "e.csv.manifest.json").exists()


def test_invalid_model_lists_violations(tmp_path, capsys):
    doc = model_to_dict(model_a())
    doc["rates"] = [-1.0, 1.0]
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    code, line, err = run(["extinction", "--model", p, "--out", tmp_path / "q.csv"], capsys)
    assert code == 2 and "violation:" in err


def test_bad_arguments_exit_2(tmp_path, capsys):
    assert run(["expect", "--model", MODELS / "model_a.json", "--t-max", 1, "--dt", 0, "--out", tmp_path / "x"], capsys)[0] == 2
    assert run(["expect", "--model", MODELS / "model_a.json", "--start", 3, "--t-max", 1, "--dt", 1, "--out", tmp_path / "x"], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2


def test_verify_writes_reports_and_exit_5_on_failure(tmp_path, capsys, monkeypatch):
    d = tmp_path / "v"
    code, line, err = run(["verify", "--model", MODELS / "model_a.json", "--suite", "expect", "--reps", 200, "--seed", 1, "--out", d], capsys)
    assert (code, line) == (0, "OK")
    assert {p.name for p in d.iterdir()} == {"expect_type1.csv", "expect_type2.csv", "summary.txt", "manifest.json"}
    assert json.loads((d / "manifest.json").read_text())["seed"] == 1

    def broken(*a, **k):
        reps = real(*a, **k)
        for r in reps:
            r.predicted = r.predicted + 100.0
        return reps

    real = cli.mc_expectation
    monkeypatch.setattr(cli, "mc_expectation", broken)
    code, line, _ = run(["verify", "--model", MODELS / "model_a.json", "--suite", "expect", "--reps", 50, "--out", tmp_path / "w"], capsys)
    assert code == 5 and line.startswith("FAIL")


def test_replay_reproduces_outputs(tmp_path, capsys):
    d = tmp_path / "sim"
    run(["simulate", "--model", MODELS / "model_a.json", "--horizon", 2, "--reps", 2, "--seed", 9, "--out-dir", d], capsys)
    code, line, _ = run(["replay", d / "manifest.json"], capsys)
    assert (code, line) == (0, "OK")
    (d / "rep_0.csv").write_text("tampered\n")
    man = json.loads((d / "manifest.json").read_text())
    man["outputs"][str(d / "rep_0.csv")] = "0" * 64
    (d / "manifest.json").write_text(json.dumps(man))
    code, line, _ = run(["replay", d / "manifest.json"], capsys)
    assert code == 5


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("dcbp")
    cmd = [exe] if exe else [sys.executable, "-m", "dcbp.cli"]
    p = subprocess.run(cmd + ["matexp", "--model", str(MODELS / "model_a.json"), "--t", "1"], capture_output=True, text=True)
    assert p.returncode == 0 and p.stdout.strip() == "OK"
