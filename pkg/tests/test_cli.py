import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from netcalc.cli import ConfigError, load_config, main, parse_quantity

ROOT = Path(__file__).resolve().parents[1]
DET = {
    "traffic": "deterministic",
    "capacity": "100 Mbps",
    "through": {"rate": "1.5 Mbps", "burst": "300 Kb"},
    "cross": {"rate": "88.5 Mbps", "burst": "300 Kb"},
    "H": [1, 3],
    "delta": ["-inf", "0", "+10 ms", "+inf"],
    "slot": "1 ms",
}
STAT = {
    "traffic": "statistical",
    "capacity": "100 Mbps",
    "mmoo": {"p_on_to_off": 0.9, "p_off_to_on": 0.1, "peak": "1.5 Mbps"},
    "through": {"flows": 10},
    "cross": {"flows": 590},
    "H": 2,
    "delta": ["0"],
    "epsilon": 1e-6,
    "backlog_thresholds": ["200 Kb", "800 Kb"],
    "simulate": {"reps": 2, "horizon": 200},
    "seed": 3,
}


def _write(tmp_path, cfg, name="cfg.json"):
    f = tmp_path / name
    f.write_text(json.dumps(cfg))
    return f


def _rows(f):
    with open(f) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("text,kind,value", [
    ("100 Mbps", "rate", 100e6), ("1.5 Mbps", "rate", 1.5e6), ("300 Kb", "bits", 300e3),
    ("10 ms", "time", 0.01), ("-10 ms", "time", -0.01), ("250us", "time", 250e-6),
    ("+inf", "time", math.inf), ("-inf", "time", -math.inf), ("0", "time", 0.0), (0, "time", 0.0),
    ("2e3 bps", "rate", 2e3),
])
def test_parse_quantity(text, kind, value):
    assert parse_quantity(text, kind, "x") == value


@pytest.mark.parametrize("text,kind", [("100", "rate"), ("100 MB", "rate"), ("5 ms", "bits"), (7, "time")])
def test_parse_quantity_rejects(text, kind):
    with pytest.raises(ConfigError):
        parse_quantity(text, kind, "x")


def test_load_config_ranges_and_overrides():
    sc = load_config(json.dumps(STAT), epsilon=1e-3, seed=9)
    assert sc.H == [2] and sc.epsilon == 1e-3 and sc.seed == 9 and sc.stochastic
    assert load_config(json.dumps(DET)).H == [1, 2, 3]
    for bad in ({**DET, "H": 0}, {**DET, "traffic": "x"}, {**STAT, "epsilon": 2.0}, {**DET, "capacity": 5}):
        with pytest.raises(ConfigError):
            load_config(json.dumps(bad))
    with pytest.raises(ConfigError):
        load_config("{not json")


@pytest.mark.parametrize("cmd,fname", [("bounds", "bounds.csv"), ("delay-sweep", "delay_sweep.csv"),
                                       ("output-burst", "output_burst.csv"), ("lower-bound", "lower_bound.csv"),
                                       ("simulate", "simulate.csv")])
def test_deterministic_subcommands(tmp_path, cmd, fname):
    cfg = _write(tmp_path, DET)
    assert main([cmd, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / fname)
    assert rows


def test_delay_sweep_values(tmp_path):
    cfg = _write(tmp_path, {**DET, "H": 10, "delta": ["0"]})
    assert main(["delay-sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    (row,) = _rows(tmp_path / "delay_sweep.csv")
    assert float(row["closed_form"]) == pytest.approx(0.0560869565, rel=1e-9)
    assert row["gamma_bps"] == "0" and row["alpha_per_bit"] == ""
    assert row["old_baseline_note"] == "stated-form approximation"


@pytest.mark.parametrize("cmd", ["bounds", "backlog-tail", "output-burst", "simulate"])
def test_statistical_subcommands(tmp_path, cmd):
    cfg = _write(tmp_path, STAT)
    assert main([cmd, "--config", str(cfg), "--out", str(tmp_path)]) == 0


def test_backlog_tail_decreases(tmp_path):
    cfg = _write(tmp_path, STAT)
    assert main(["backlog-tail", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "backlog_tail.csv")
    eps = [float(r["violation_bound"]) for r in rows]
    assert eps[0] > eps[1]


def test_outputs_are_deterministic(tmp_path):
    cfg = _write(tmp_path, STAT)
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "simulate.csv").read_bytes() == (tmp_path / "b" / "simulate.csv").read_bytes()


def test_exit_codes(tmp_path):
    bad_unit = _write(tmp_path, {**DET, "capacity": "100 MBps"}, "bad.json")
    assert main(["bounds", "--config", str(bad_unit)]) == 2
    assert main(["bounds", "--config", str(tmp_path / "missing.json")]) == 2
    unstable = _write(tmp_path, {**DET, "cross": {"rate": "99 Mbps", "burst": "1 Kb"}}, "u.json")
    assert main(["bounds", "--config", str(unstable), "--out", str(tmp_path)]) == 3
    assert main(["lower-bound", "--config", str(_write(tmp_path, STAT, "s.json")), "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["nope", "--config", str(bad_unit)])


def test_console_script_shipped_configs(tmp_path):
    out = subprocess.run([sys.executable, "-m", "netcalc.cli", "lower-bound", "--config",
                          str(ROOT / "configs" / "det90.json"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert len(_rows(tmp_path / "lower_bound.csv")) == 30 * 5
