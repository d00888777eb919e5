import json

import numpy as np
import pytest

from mecsched import cli, oracles
from mecsched.config import config_from_dict
from mecsched.metrics import theorem1_power_bound


def _run_json(tmp_path, extra, name="m.json"):
    out = tmp_path / name
    rc = cli.main(["run", "--slots", "300", "--out", str(out)] + extra)
    assert rc == cli.EXIT_OK
    return json.loads(out.read_text())


def test_run_writes_metrics_document(tmp_path):
    doc = _run_json(tmp_path, ["--set", "control_v=1e8", "--set", "rng_seed=4"])
    assert doc["schema"] == "mecsched-metrics-v1"
    assert len(doc["config_sha256"]) == 64
    assert doc["overrides"] == {"control_v": 1e8, "rng_seed": 4}
    assert doc["mode"] == "baseline_alg1"
    assert doc["n_slots"] == 300
    m = doc["metrics"]
    for key in ("avg_weighted_power_w", "avg_sum_queue_bits", "exec_delay_ms",
                "final_queue_over_t", "gs_nonconverged_slots"):
        assert key in m
    assert m["avg_weighted_power_w"] > 0
    assert doc["c_bits2"] > 0


def test_run_bound_proxy_sources(tmp_path):
    doc = _run_json(tmp_path, ["--set", "control_v=1e8"])
    b = doc["bounds"]
    assert b["p_opt_proxy_source"] == "self"
    assert b["p_opt_proxy_w"] == doc["metrics"]["avg_weighted_power_w"]
    assert b["queue_bound_bits"] is None

    doc = _run_json(tmp_path, ["--set", "control_v=1e8",
                               "--p-opt-estimate", "0.3",
                               "--psi-eps", "12.0", "--slater-eps", "200.0"],
                    name="m2.json")
    b = doc["bounds"]
    assert b["p_opt_proxy_source"] == "flag"
    cfg = config_from_dict({"control_v": 1e8})
    assert b["power_bound_w"] == theorem1_power_bound(0.3, cfg)
    assert b["queue_bound_bits"] > 0


def test_run_modes_report_equal_power(tmp_path):
    """The delay-improved variant reroutes scheduling, not spending."""
    a = _run_json(tmp_path, ["--mode", "baseline_alg1"], name="a.json")
    b = _run_json(tmp_path, ["--mode", "delay_improved_alg3"], name="b.json")
    assert a["metrics"]["avg_weighted_power_w"] == b["metrics"]["avg_weighted_power_w"]
    # server buffers drain no later under the improved schedule
    assert b["metrics"]["avg_sum_queue_bits"] <= a["metrics"]["avg_sum_queue_bits"]


def test_run_trace_file(tmp_path):
    trace = tmp_path / "trace.csv"
    rc = cli.main(["run", "--slots", "40", "--trace", str(trace),
                   "--out", str(tmp_path / "m.json")])
    assert rc == cli.EXIT_OK
    lines = trace.read_text().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == 2 + 40 * 5  # schema comment + header + per-device rows


def test_bad_override_is_config_error(tmp_path, capsys):
    rc = cli.main(["run", "--slots", "5", "--set", "control_v",
                   "--out", str(tmp_path / "x.json")])
    assert rc == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_unknown_config_key_is_config_error(tmp_path, capsys):
    rc = cli.main(["run", "--slots", "5", "--set", "no_such_knob=1",
                   "--out", str(tmp_path / "x.json")])
    assert rc == cli.EXIT_CONFIG


def test_missing_config_file_is_config_error(tmp_path):
    rc = cli.main(["run", "--slots", "5", "--config",
                   str(tmp_path / "absent.json"),
                   "--out", str(tmp_path / "x.json")])
    assert rc == cli.EXIT_CONFIG


def test_unwritable_output_is_runtime_error(tmp_path, capsys):
    rc = cli.main(["run", "--slots", "5", "--out", str(tmp_path)])
    assert rc == cli.EXIT_RUNTIME
    assert "runtime failure" in capsys.readouterr().err


def test_sweep_rows_follow_task_order(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = cli.main(["sweep", "--v-values", "1e8,1e7", "--seeds", "2,1",
                   "--server-weights", "0", "--slots", "80",
                   "--out", str(out)])
    assert rc == cli.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "# schema: mecsched-sweep-v1"
    header = lines[1].split(",")
    assert header[:4] == ["V", "mode", "w_server", "seed"]
    rows = [ln.split(",") for ln in lines[2:]]
    assert len(rows) == 4
    # V-major then seed, in the order given on the command line
    assert [(r[0], r[3]) for r in rows] == [
        ("100000000.0", "2"), ("100000000.0", "1"),
        ("10000000.0", "2"), ("10000000.0", "1")]
    for r in rows:
        assert float(r[5]) > 0  # avg_weighted_power_w


def test_sweep_rerun_is_byte_identical(tmp_path):
    args = ["sweep", "--v-values", "1e8", "--seeds", "1,2",
            "--server-weights", "0,0.02", "--slots", "60"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a)]) == cli.EXIT_OK
    assert cli.main(args + ["--out", str(b)]) == cli.EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_sweep_parallel_output_matches_serial(tmp_path):
    args = ["sweep", "--v-values", "1e7,1e8", "--seeds", "1",
            "--server-weights", "0.02", "--slots", "50"]
    ser, par = tmp_path / "s.csv", tmp_path / "p.csv"
    assert cli.main(args + ["--out", str(ser), "--workers", "1"]) == cli.EXIT_OK
    assert cli.main(args + ["--out", str(par), "--workers", "2"]) == cli.EXIT_OK
    assert ser.read_bytes() == par.read_bytes()


def test_sweep_rejects_unknown_mode(tmp_path, capsys):
    rc = cli.main(["sweep", "--modes", "fastest_alg9", "--slots", "10",
                   "--out", str(tmp_path / "x.csv")])
    assert rc == cli.EXIT_CONFIG


def test_verify_writes_jsonl_report(tmp_path, capsys):
    report = tmp_path / "report.jsonl"
    rc = cli.main(["verify", "--suite", "sp1", "--cases", "6",
                   "--report", str(report)])
    assert rc == cli.EXIT_OK
    assert "0 failures" in capsys.readouterr().out
    lines = report.read_text().splitlines()
    assert len(lines) == 6
    rec = json.loads(lines[0])
    assert rec["passed"] is True
    assert rec["case_id"].startswith("sp1-")


def test_verify_flags_broken_solver(tmp_path, capsys):
    oracles.PERTURB_CLOSED_FORM = lambda x: x * 1.01
    try:
        rc = cli.main(["verify", "--suite", "sp3", "--cases", "10"])
    finally:
        oracles.PERTURB_CLOSED_FORM = None
    assert rc == cli.EXIT_ORACLE
    assert "failures" in capsys.readouterr().out
