"""Command-line entry point: ``headrc <command> --config run.json``.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 success with warnings (non-convergence, clamped tables, truncated series,
invalid sweep cells).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
import warnings

import numpy as np

from . import __version__
from .circuit import branch_impedances, circuit_spectrum, export_netlist
from .config import RunConfig, keys_help, load_config
from .errors import (ConfigError, HeadRCError, NonConvergenceWarning, SeriesTruncationWarning,
                     TableParseError, TableRangeWarning)
from .fitting import fit_model, report_dict
from .io import atomic_write_text, fmt
from .params import FittedParams
from .ssh import ssh_peak_potential
from .validation import run_ablation, run_mrfe_sweep

log = logging.getLogger("headrc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_WARN = 0, 1, 2, 3

_WARNING_TYPES = (TableRangeWarning, SeriesTruncationWarning, NonConvergenceWarning)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message, EXIT_CONFIG)
        sys.exit(EXIT_CONFIG)


def _emit_error(kind, message, code):
    print(json.dumps({"status": "error", "error": kind, "message": message, "exit_code": code}),
          file=sys.stderr)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load_params(cfg: RunConfig) -> FittedParams:
    try:
        text = cfg.params_file.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"params file not found: {cfg.params_file}") from None
    return FittedParams.from_json(text)


# ------------------------------------------------------------------ commands

def cmd_solve_ssh(cfg: RunConfig, args) -> int:
    tissues = cfg.require_tissues()
    src = cfg.source()
    rows = []
    for f in cfg.grid.frequencies():
        sol = ssh_peak_potential(cfg.geometry, tissues, src, float(f), cfg.ssh_tol, cfg.ssh_l_cap)
        v = sol.v_scalp
        rows.append([fmt(f), fmt(v.real), fmt(v.imag), fmt(abs(v)), sol.l_max_used])
    path = cfg.output_dir / "ssh_spectrum.csv"
    atomic_write_text(path, _csv(["frequency_hz", "re_v", "im_v", "abs_v", "l_max_used"], rows))
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_solve_circuit(cfg: RunConfig, args) -> int:
    tissues = cfg.require_tissues()
    params = _load_params(cfg)
    freqs = cfg.grid.frequencies()
    v = circuit_spectrum(cfg.geometry, tissues, params, cfg.source(), freqs)
    rows = [[fmt(f), fmt(x.real), fmt(x.imag), fmt(abs(x))] for f, x in zip(freqs, v)]
    path = cfg.output_dir / "circuit_spectrum.csv"
    atomic_write_text(path, _csv(["frequency_hz", "re_v", "im_v", "abs_v"], rows))
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_fit(cfg: RunConfig, args) -> int:
    fit_cfg = cfg.fit_config()
    report = fit_model(fit_cfg, jobs=args.jobs)
    params_text = report.params.to_json()
    report_text = json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n"
    atomic_write_text(cfg.params_file, params_text)
    atomic_write_text(cfg.output_dir / "fit_report.json", report_text)
    log.info("fit objective %.3g -> %.3g", report.initial_objective, report.final_objective)
    if not report.converged:
        warnings.warn("at least one pointwise fit hit its iteration budget", NonConvergenceWarning)
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> int:
    params = _load_params(cfg)
    res = run_mrfe_sweep(params, cfg.geometry, cfg.require_tissues(), cfg.grid,
                         cfg.sweep_etas, cfg.sweep_t_skulls, cfg.source_p_r, cfg.source_d,
                         cfg.ssh_tol, cfg.ssh_l_cap, jobs=args.jobs)
    csv_text, json_text = res.to_csv(), res.to_json()
    atomic_write_text(cfg.output_dir / "sweep.csv", csv_text)
    atomic_write_text(cfg.output_dir / "sweep_summary.json", json_text)
    for (i, j), msg in sorted(res.errors.items()):
        print(json.dumps({"status": "invalid_cell", "eta": float(res.etas[i]),
                          "t_skull_m": float(res.t_skulls[j]), "error": msg}), file=sys.stderr)
    for w in res.metadata.get("warnings", []):
        print(json.dumps({"status": "warning", "message": w}), file=sys.stderr)
    return EXIT_WARN if res.errors or res.metadata.get("warnings") else EXIT_OK


def cmd_ablation(cfg: RunConfig, args) -> int:
    params = _load_params(cfg)
    res = run_ablation(params, cfg.geometry, cfg.require_tissues(), cfg.grid, cfg.ablation_eta,
                       cfg.source_p_r, cfg.source_d, cfg.ablation_anchor_hz)
    atomic_write_text(cfg.output_dir / "ablation.csv", res.to_csv())
    return EXIT_OK


def cmd_export_netlist(cfg: RunConfig, args) -> int:
    params = _load_params(cfg)
    f = cfg.netlist_frequency if args.frequency is None else args.frequency
    net = branch_impedances(cfg.geometry, cfg.require_tissues(), params, cfg.source(), f)
    path = export_netlist(net, f, cfg.output_dir / "netlist.cir")
    log.info("wrote %s", path)
    return EXIT_OK


COMMANDS = {
    "solve-ssh": (cmd_solve_ssh, "spherical-harmonics reference spectrum -> ssh_spectrum.csv"),
    "solve-circuit": (cmd_solve_circuit, "surrogate circuit spectrum -> circuit_spectrum.csv"),
    "fit": (cmd_fit, "fit gamma(psi), alpha(eta), scale -> params JSON + fit_report.json"),
    "validate": (cmd_validate, "MRFE sweep -> sweep.csv + sweep_summary.json"),
    "ablation": (cmd_ablation, "three-configuration dispersion ablation -> ablation.csv"),
    "export-netlist": (cmd_export_netlist, "SPICE netlist at one frequency -> netlist.cir"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="headrc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"headrc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=keys_help(name),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--params", help="fitted params JSON (overrides params_file)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--frequency-spacing", choices=("linear", "log"),
                       help="override frequency_grid.spacing")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for sweeps and fits (outputs do not depend on it)")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
        if name == "export-netlist":
            p.add_argument("--frequency", type=float, help="override netlist.frequency_hz [Hz]")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(asctime)s %(levelname)s %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    func = COMMANDS[args.command][0]
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            cfg = load_config(args.config, args.out, args.params, args.frequency_spacing)
            code = func(cfg, args)
        except (ConfigError, TableParseError) as exc:
            _emit_error(type(exc).__name__, str(exc), EXIT_CONFIG)
            return EXIT_CONFIG
        except (HeadRCError, np.linalg.LinAlgError) as exc:
            _emit_error(type(exc).__name__, str(exc), EXIT_NUMERIC)
            return EXIT_NUMERIC
    ours = [w for w in caught if issubclass(w.category, _WARNING_TYPES)]
    for msg in sorted({str(w.message) for w in ours}):
        print(json.dumps({"status": "warning", "message": msg}), file=sys.stderr)
    log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
    if ours and code == EXIT_OK:
        return EXIT_WARN
    return code

