import json
import subprocess
import sys

import pytest

from geomerr.cli import build_parser, main, make_spec

FAST = ["--order", "8", "--dt", "2e-3", "--tfinal", "0.2"]


def test_parser_flags():
    args = build_parser().parse_args(["sweep-2d", "--delta", "0.01,0.02", "--gamma", "0", "--isolate",
                                      "location", "--seed", "3", "--family", "omega1"])
    spec = make_spec(args)
    assert spec.delta_values == [0.01, 0.02] and spec.gamma == 0 and spec.isolate == "location"
    assert spec.seed == 3
    with pytest.raises(SystemExit):
        build_parser().parse_args(["sweep-2d", "--gamma", "2"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["sweep-2d", "--delta", "a,b"])


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 10, "delta_values": [0.03], "t_final": 0.5}))
    spec = make_spec(build_parser().parse_args(["sweep-2d", "--config", str(cfg), "--order", "12"]))
    assert spec.N == 12 and spec.delta_values == [0.03] and spec.t_final == 0.5


def test_bad_config_reports_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"not_a_field": 1}))
    assert main(["sweep-2d", "--config", str(cfg)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_sweep_2d_smoke(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep-2d", "--family", "omega1,omega2", "--delta", "0.01,0.02", "--out", str(out), *FAST]) == 0
    assert (out / "sweep_2d_omega1_both.csv").exists()
    assert "slope_ratio_omega1_omega2" in (out / "summary.txt").read_text()


def test_sweep_1d_smoke(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep-1d", "--delta", "0.1", "--out", str(out), *FAST]) == 0
    assert (out / "sweep_1d.csv").exists() and (out / "sweep_1d_history.svg").exists()


def test_budget_and_bounds_smoke(tmp_path):
    out = tmp_path / "b"
    assert main(["budget", "--out", str(out), "--order", "8", "--dt", "1e-3", "--tfinal", "0.6"]) == 0
    assert (out / "budget.csv").read_text().startswith("t,energy,D,BG")
    out = tmp_path / "c"
    assert main(["bounds", "--family", "omega3", "--order", "8", "--out", str(out)]) == 0
    assert "rbound_location_omega3" in (out / "summary.txt").read_text()


def test_circle_smoke(tmp_path):
    out = tmp_path / "c"
    assert main(["circle", "--order", "8", "--dt", "2e-3", "--tfinal", "0.1", "--out", str(out)]) == 0
    assert (out / "circle.csv").exists() and (out / "circle_curve_errors.svg").exists()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "geomerr", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("sweep-1d", "sweep-2d", "circle", "budget", "bounds"):
        assert cmd in r.stdout
