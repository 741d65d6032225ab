"""Command-line interface tests: exit codes, outputs, determinism."""

from __future__ import annotations

import json

import pytest

from adess.cli import SWEEP_HEADER, main


def run(capsys, *argv) -> tuple:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def grab(out: str, key: str) -> float:
    for line in out.splitlines():
        if line.startswith(f"{key} = "):
            return float(line.split(" = ", 1)[1])
    raise AssertionError(f"{key!r} not in output:\n{out}")


# -- scalar commands -----------------------------------------------------------

def test_min_xi(capsys):
    code, out, _ = run(capsys, "min-xi", "--v", "11", "--alpha", "1",
                       "--sigma", "1", "--delta", "0.999999")
    assert code == 0
    assert grab(out, "xi_star") == pytest.approx(1.0, abs=1e-4)
    assert grab(out, "profit_at_xi_star") <= 0.0


def test_profit(capsys):
    code, out, _ = run(capsys, "profit", "--v", "0", "--xi", "1",
                       "--alpha", "2")
    assert code == 0
    assert grab(out, "revenue") == pytest.approx(4.0)
    assert grab(out, "cost") == pytest.approx(15.0)
    assert grab(out, "profit") == pytest.approx(-11.0)


def test_safe_v(capsys):
    code, out, _ = run(capsys, "safe-v", "--xi", "1", "--alpha", "2")
    assert code == 0
    assert grab(out, "v_max") == pytest.approx(11.0)


def test_scalar_outputs_are_deterministic(capsys):
    _, a, _ = run(capsys, "min-xi", "--v", "25", "--alpha", "3",
                  "--delta", "0.999")
    _, b, _ = run(capsys, "min-xi", "--v", "25", "--alpha", "3",
                  "--delta", "0.999")
    assert a == b


def test_compare_protocols(capsys, tmp_path):
    code, out, _ = run(capsys, "compare-protocols", "--horizon", "10",
                       "--alpha", "3", "--delta", "0.99",
                       "--out", str(tmp_path))
    assert code == 0
    assert grab(out, "adess_pv") > 0 and grab(out, "nakamoto_pv") > 0
    lines = (tmp_path / "malicious_cost.csv").read_text().splitlines()
    assert lines[0] == "t,adess_cost,nakamoto_cost" and len(lines) == 11


def test_security_bound_strictly_decreasing(capsys, tmp_path):
    code, out, _ = run(capsys, "security-bound", "--k", "1..12",
                       "--rho", "0.8", "--lambda", "0.1",
                       "--delta-prop", "0.0", "--out", str(tmp_path))
    assert code == 0
    rows = (tmp_path / "security_bound.csv").read_text().splitlines()
    assert rows[0] == "k,bound" and len(rows) == 13
    vals = [float(r.split(",")[1]) for r in rows[1:]]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# -- config-driven commands ----------------------------------------------------

def scenario_json(tmp_path) -> str:
    cfg = {
        "protocol": "adess",
        "adess": {"alpha": 2, "xi": 1.0},
        "attack": {"alpha": 2, "xi": 1.0, "v": 11.0},
        "horizon": 40.0,
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_simulate_writes_report_and_series(capsys, tmp_path):
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "simulate", "--config", scenario_json(tmp_path),
                       "--out", str(out_dir))
    assert code == 0
    assert "attack_succeeded = True" in out
    assert grab(out, "realized_cost") == pytest.approx(15.0)
    report = (out_dir / "report.txt").read_text()
    assert "[run]" in report and "[tree]" in report
    series = (out_dir / "series.csv").read_text()
    assert series.splitlines()[0] == "time,node,head,height"


def test_simulate_rerun_is_byte_identical(capsys, tmp_path):
    cfg = scenario_json(tmp_path)
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    run(capsys, "simulate", "--config", cfg, "--out", str(a_dir))
    run(capsys, "simulate", "--config", cfg, "--out", str(b_dir))
    assert (a_dir / "report.txt").read_bytes() \
        == (b_dir / "report.txt").read_bytes()
    assert (a_dir / "series.csv").read_bytes() \
        == (b_dir / "series.csv").read_bytes()


def test_sweep_profile(capsys, tmp_path):
    cfg = {"kind": "profit",
           "attack": {"alpha": 2, "xi": 1.0, "v": 5.0},
           "grid": {"param": "v", "values": [0, 2, 4, 6, 8]}}
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(cfg))
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "sweep", "--config", str(path),
                       "--out", str(out_dir))
    assert code == 0 and "rows = 5" in out
    rows = (out_dir / "sweep.csv").read_text().splitlines()
    assert rows[0] == SWEEP_HEADER and len(rows) == 6
    meta = json.loads((out_dir / "sweep.meta.json").read_text())
    assert meta["rows"] == 5 and meta["kind"] == "profit"
    # byte-identical on rerun
    again = tmp_path / "again"
    run(capsys, "sweep", "--config", str(path), "--out", str(again))
    assert (again / "sweep.csv").read_bytes() \
        == (out_dir / "sweep.csv").read_bytes()


def test_sweep_hashrate_kind(capsys, tmp_path):
    cfg = {"kind": "hashrate", "attack": {"xi": 1.0},
           "grid": {"n_max": 4}}
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "sweep", "--config", str(path),
                       "--out", str(tmp_path / "out"))
    assert code == 0
    rows = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert rows[0] == "n,hashrate"
    assert [float(r.split(",")[1]) for r in rows[1:]] == [2.0, 4.0, 8.0, 16.0]


def test_check_props_suite(capsys):
    code, out, _ = run(capsys, "check-props", "--suite", "corollary1")
    assert code == 0
    assert "corollary1: 400/400 pass" in out


# -- failure modes -------------------------------------------------------------

def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["min-xi"])  # --v is required
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_domain_error_exits_one(capsys):
    code, _, err = run(capsys, "security-bound", "--k", "1..3",
                       "--rho", "0.5", "--lambda", "0.1",
                       "--delta-prop", "0.0", "--variant", "literal")
    assert code == 1 and "error:" in err


def test_bad_config_exits_one(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--config",
                       str(tmp_path / "missing.json"))
    assert code == 1 and "error:" in err
    bad = tmp_path / "bad.json"
    bad.write_text('{"protocol": "pow"}')
    code, _, err = run(capsys, "simulate", "--config", str(bad))
    assert code == 1
    code, _, err = run(capsys, "check-props", "--suite", "nope")
    assert code == 1


def test_bad_log_level_exits_one(capsys, monkeypatch):
    monkeypatch.setenv("ADESS_LOG", "chatty")
    code, _, err = run(capsys, "safe-v", "--xi", "1")
    assert code == 1 and "ADESS_LOG" in err


def test_log_level_accepted(capsys, monkeypatch):
    monkeypatch.setenv("ADESS_LOG", "info")
    code, out, _ = run(capsys, "safe-v", "--xi", "1", "--alpha", "2")
    assert code == 0 and grab(out, "v_max") == pytest.approx(11.0)
