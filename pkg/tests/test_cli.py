import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from headrc import io as hio
from headrc.cli import COMMANDS, main
from headrc.config import COMMAND_KEYS, KEYS
from headrc.geometry import HeadGeometry
from headrc.tissue import synthetic_tissues

from cliutil import write_config
from oracles import mp_ssh, mp_table_conductivity


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def fitted_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fitted")
    cfg = write_config(d)
    assert main(["fit", "--config", str(cfg)]) == 0
    return d


def test_solve_ssh_matches_oracle(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["solve-ssh", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out" / "ssh_spectrum.csv")
    assert len(rows) == 75
    g = HeadGeometry.standard()
    tables = [t.dispersion.rows() for t in synthetic_tissues()]
    for r in rows[::6]:
        f = float(r["frequency_hz"])
        sc = [complex(mp_table_conductivity(t, f)) for t in tables]
        sc.append(complex(mp_table_conductivity([(1.0, 0.0, 1.0)], f)))
        ref = mp_ssh(g.r1, g.r2, g.r3, sc, 0.935, 1.5e-8)
        v = complex(float(r["re_v"]), float(r["im_v"]))
        assert abs(v - ref) <= 1e-8 * abs(ref)
        assert float(r["abs_v"]) == abs(v)


def test_zero_moment_gives_zero_columns(tmp_path, fitted_dir):
    cfg = write_config(tmp_path, source={"p_r_am": 0.0},
                       params_file=str(fitted_dir / "out" / "params.json"))
    assert main(["solve-ssh", "--config", str(cfg)]) == 0
    assert main(["solve-circuit", "--config", str(cfg)]) == 0
    for name in ("ssh_spectrum.csv", "circuit_spectrum.csv"):
        assert all(float(r["abs_v"]) == 0 for r in read_csv(tmp_path / "out" / name))


def test_static_tissues_flat_spectrum(tmp_path, fitted_dir):
    statics = {n: {"sigma_s_per_m": s, "eps_rel": 1} for n, s in
               (("brain", 0.33), ("skull", 0.0042), ("scalp", 0.43))}
    cfg = write_config(tmp_path, tissues=statics,
                       params_file=str(fitted_dir / "out" / "params.json"))
    assert main(["solve-ssh", "--config", str(cfg)]) == 0
    assert main(["solve-circuit", "--config", str(cfg)]) == 0
    for name in ("ssh_spectrum.csv", "circuit_spectrum.csv"):
        v = np.array([float(r["abs_v"]) for r in read_csv(tmp_path / "out" / name)])
        assert np.ptp(v) / v.mean() < 5e-3


def test_fit_rerun_identical(tmp_path, fitted_dir):
    cfg = write_config(tmp_path)
    assert main(["fit", "--config", str(cfg)]) == 0
    for name in ("params.json", "fit_report.json"):
        assert (tmp_path / "out" / name).read_bytes() == (fitted_dir / "out" / name).read_bytes()


def test_fit_report_residuals(fitted_dir):
    rep = json.loads((fitted_dir / "out" / "fit_report.json").read_text())
    assert rep["converged"]
    for p in rep["points"]:
        assert p["residual"] <= p["start_residual"]
        assert p["residual"] <= 0.15
        if p["model_residual"] is not None:
            assert p["model_residual"] <= 0.15


def test_fit_three_thicknesses_exact(tmp_path):
    cfg = write_config(tmp_path, fit={"t_skull_grid_m": [0.005, 0.006, 0.007]})
    assert main(["fit", "--config", str(cfg)]) == 0
    rep = json.loads((tmp_path / "out" / "fit_report.json").read_text())
    for layer in ("brain", "skull", "scalp"):
        assert rep["regression_residuals"][f"gamma_{layer}"] < 1e-9


def test_all_commands_run(tmp_path, fitted_dir):
    cfg = write_config(tmp_path, params_file=str(fitted_dir / "out" / "params.json"))
    for cmd in ("solve-circuit", "validate", "ablation", "export-netlist"):
        assert main([cmd, "--config", str(cfg)]) == 0, cmd
    out = tmp_path / "out"
    for name in ("circuit_spectrum.csv", "sweep.csv", "sweep_summary.json", "ablation.csv",
                 "netlist.cir"):
        assert (out / name).stat().st_size > 0


def test_netlist_frequency_override(tmp_path, fitted_dir):
    cfg = write_config(tmp_path, params_file=str(fitted_dir / "out" / "params.json"))
    assert main(["export-netlist", "--config", str(cfg), "--frequency", "2500"]) == 0
    assert "* frequency_hz: 2500\n" in (tmp_path / "out" / "netlist.cir").read_text()


def _error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def test_missing_config_exit_1(tmp_path, capsys):
    assert main(["solve-ssh", "--config", str(tmp_path / "none.json")]) == 1
    assert _error(capsys)["error"] == "ConfigError"


def test_invalid_json_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{\n  \"geometry\": \n}")
    assert main(["solve-ssh", "--config", str(p)]) == 1
    assert ":3:" in _error(capsys)["message"]


@pytest.mark.parametrize("over", [
    {"geometry": {"r_brain_m": -1}},
    {"geometry": {"t_skull_m": "thick"}},
    {"frequency_grid": {"n_points": 1}},
    {"source": {"eta": 1.2}},
    {"tissues": {"brain": {"table_csv": "missing.csv"}}},
    {"tissues": {"brain": {"sigma_s_per_m": 0.3, "eps_rel": 0.5}}},
])
def test_bad_values_exit_1_without_output(tmp_path, over):
    cfg = write_config(tmp_path, **over)
    assert main(["solve-ssh", "--config", str(cfg)]) == 1
    assert not (tmp_path / "out").exists()


def test_table_error_reports_line(tmp_path, capsys):
    (tmp_path / "brain.csv").write_text(
        "frequency_hz,sigma_s_per_m,eps_rel\n10,0.1,100\n20,x,100\n")
    cfg = write_config(tmp_path, tissues={"brain": {"table_csv": "brain.csv"}})
    assert main(["solve-ssh", "--config", str(cfg)]) == 1
    err = _error(capsys)
    assert err["error"] == "TableParseError" and "brain.csv:3:" in err["message"]
    assert not (tmp_path / "out").exists()


def test_fit_needs_static_tissues(tmp_path):
    cfg = write_config(tmp_path, fit={"static_tissues": None})
    assert main(["fit", "--config", str(cfg)]) == 1


def test_missing_params_exit_1(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["solve-circuit", "--config", str(cfg)]) == 1


def test_parameter_domain_exit_2(tmp_path, fitted_dir, capsys):
    cfg = write_config(tmp_path, source={"eta": 0.05},
                       params_file=str(fitted_dir / "out" / "params.json"))
    assert main(["solve-circuit", "--config", str(cfg)]) == 2
    assert _error(capsys)["error"] == "ParameterDomainError"


def test_clamped_table_exit_3(tmp_path):
    (tmp_path / "brain.csv").write_text(
        "frequency_hz,sigma_s_per_m,eps_rel\n100,0.1,1000\n1000,0.12,500\n")
    cfg = write_config(tmp_path, tissues={"brain": {"table_csv": "brain.csv"}})
    assert main(["solve-ssh", "--config", str(cfg)]) == 3
    assert (tmp_path / "out" / "ssh_spectrum.csv").exists()


def test_invalid_cells_exit_3(tmp_path, fitted_dir, capsys):
    cfg = write_config(tmp_path, params_file=str(fitted_dir / "out" / "params.json"),
                       sweep={"eta_list": [0.05, 0.5], "t_skull_list_m": [0.0059]},
                       frequency_grid={"n_points": 5})
    assert main(["validate", "--config", str(cfg)]) == 3
    err = capsys.readouterr().err
    assert '"status": "invalid_cell"' in err
    summary = json.loads((tmp_path / "out" / "sweep_summary.json").read_text())
    assert summary["n_invalid"] == 1


def test_usage_error_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["solve-ssh"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "--config", "x"])
    assert info.value.code == 1


@pytest.mark.parametrize("command", list(COMMANDS))
def test_help_lists_config_keys(command, capsys):
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    for pattern in COMMAND_KEYS[command]:
        keys = [k for k in KEYS if k.startswith(pattern[:-1])] if pattern.endswith(".*") \
            else [pattern]
        assert keys
        for k in keys:
            assert k in text, (command, k)


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, frequency_grid={"n_points": 3})
    proc = subprocess.run([sys.executable, "-m", "headrc", "solve-ssh", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(read_csv(tmp_path / "out" / "ssh_spectrum.csv")) == 3


def test_atomic_write_leaves_nothing_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "x.csv"

    def boom(*a, **k):
        raise OSError("disk full")
    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        hio.atomic_write_text(target, "data")
    assert list(tmp_path.iterdir()) == []
