"""JSON run configuration.

Every physical quantity carries its SI unit in the key name.  Relative file
paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, HeadRCError, TableParseError
from .fitting import FitConfig, OptimizerConfig, FIT_ETAS, default_skull_grid, skull_sweep
from .geometry import DipoleSource, HeadGeometry, R_BRAIN_STD, T_SCALP_STD, T_SKULL_STD
from .params import DEFAULT_GAMMA_ABSCISSAE
from .ssh import DEFAULT_L_CAP, DEFAULT_TOL
from .tissue import LAYER_NAMES, Static, TissueSpec, read_table_csv, synthetic_tissue
from .validation import ABLATION_ETA, SWEEP_ETAS, FrequencyGrid, default_sweep_skull_list

# key -> description; shown in ``--help``
KEYS = {
    "geometry.r_brain_m": "brain radius r1 [m] (default 0.0791)",
    "geometry.t_skull_m": "skull thickness [m] (default 0.0059)",
    "geometry.t_scalp_m": "scalp thickness [m] (default 0.007)",
    "tissues.<layer>": "brain/skull/scalp: {\"table_csv\": path} | {\"builtin\": \"synthetic\"} "
                       "| {\"sigma_s_per_m\": x, \"eps_rel\": y}",
    "source.p_r_am": "radial dipole moment [A m] (default 1.5e-8)",
    "source.d_m": "effective dipole length [m] (default 1e-3)",
    "source.r_dip_m": "dipole radius [m]; alternatively source.eta (default eta 0.935)",
    "frequency_grid.f_min_hz": "lowest frequency [Hz] (default 10)",
    "frequency_grid.f_max_hz": "highest frequency [Hz] (default 50000)",
    "frequency_grid.n_points": "number of frequencies (default 75)",
    "frequency_grid.spacing": "linear | log (default linear; --frequency-spacing overrides)",
    "ssh.tol": "series truncation tolerance (default 1e-10)",
    "ssh.l_cap": "maximum series index (default 500)",
    "fit.static_tissues.<layer>": "REQUIRED for fit: {\"sigma_s_per_m\": x, \"eps_rel\": y}",
    "fit.t_skull_grid_m": "skull thicknesses of the geometry stage (default 4.6-8.2 mm, 10 pts)",
    "fit.eccentricity_grid": "eta values of the eccentricity stage, max 0.965",
    "fit.objective_frequency_hz": "frequency at which static sigma is read (default 1000)",
    "fit.gamma_degree": "1 or 2 (default 2)",
    "fit.alpha_degree": "1, 2 or 3 (default 3)",
    "fit.gamma_eta": "eccentricity used for the geometry stage (default 0.465)",
    "fit.gamma_abscissae": "ratio per gamma, from psi12/psi13/psi23 (default psi12,psi23,psi23)",
    "fit.optimizer": "{max_iters, xatol, fatol, initial_step, restarts, penalty}",
    "sweep.eta_list": "validation eccentricities (default 0.233 0.465 0.814 0.935 0.966)",
    "sweep.t_skull_list_m": "validation skull thicknesses [m] (default 4.6-8.2 mm + 5.9 mm)",
    "ablation.eta": "dipole eccentricity for the ablation (default 0.935)",
    "ablation.anchor_hz": "frequency of the static sigma in the ohmic case (default f_min)",
    "netlist.frequency_hz": "frequency at which R and C are frozen (default 1000)",
    "output_dir": "output directory (default ./out; --out overrides)",
    "params_file": "fitted params JSON (default <output_dir>/params.json; --params overrides)",
}

COMMAND_KEYS = {
    "solve-ssh": ["geometry.*", "tissues.<layer>", "source.*", "frequency_grid.*", "ssh.*",
                  "output_dir"],
    "solve-circuit": ["geometry.*", "tissues.<layer>", "source.*", "frequency_grid.*",
                      "output_dir", "params_file"],
    "fit": ["geometry.*", "fit.*", "ssh.*", "source.p_r_am", "source.d_m", "output_dir",
            "params_file"],
    "validate": ["geometry.*", "tissues.<layer>", "source.p_r_am", "source.d_m",
                 "frequency_grid.*", "ssh.*", "sweep.*", "output_dir", "params_file"],
    "ablation": ["geometry.*", "tissues.<layer>", "source.p_r_am", "source.d_m",
                 "frequency_grid.*", "ablation.*", "output_dir", "params_file"],
    "export-netlist": ["geometry.*", "tissues.<layer>", "source.*", "netlist.frequency_hz",
                       "output_dir", "params_file"],
}


def keys_help(command: str) -> str:
    lines = ["config keys read:"]
    for pattern in COMMAND_KEYS[command]:
        if pattern.endswith(".*"):
            prefix = pattern[:-1]
            matches = [k for k in KEYS if k.startswith(prefix)]
        else:
            matches = [pattern]
        for k in matches:
            lines.append(f"  {k:30s} {KEYS[k]}")
    return "\n".join(lines)


def _num(block, key, default=None, where=""):
    if key not in block:
        if default is None:
            raise ConfigError(f"missing required key {where}{key}")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}{key} must be a finite number, got {v!r}")
    return float(v)


def _block(doc, key):
    b = doc.get(key, {})
    if not isinstance(b, dict):
        raise ConfigError(f"{key} must be an object")
    return b


def _static(spec, where):
    return Static(_num(spec, "sigma_s_per_m", where=where), _num(spec, "eps_rel", 1.0, where))


def _tissue(name, spec, base: Path, where):
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    if "table_csv" in spec:
        path = base / spec["table_csv"]
        if not path.is_file():
            raise ConfigError(f"{where}.table_csv: file not found: {path}")
        return TissueSpec(name, read_table_csv(path)), path
    if spec.get("builtin") == "synthetic":
        return synthetic_tissue(name), None
    if "sigma_s_per_m" in spec:
        return TissueSpec(name, _static(spec, where + ".")), None
    raise ConfigError(f"{where}: need table_csv, builtin or sigma_s_per_m")


@dataclass
class RunConfig:
    geometry: HeadGeometry
    tissues: tuple | None
    source_p_r: float
    source_d: float
    source_eta: float | None
    source_r_dip: float | None
    grid: FrequencyGrid
    ssh_tol: float
    ssh_l_cap: int
    fit_block: dict
    sweep_etas: tuple
    sweep_t_skulls: tuple
    ablation_eta: float
    ablation_anchor_hz: float | None
    netlist_frequency: float
    output_dir: Path
    params_file: Path
    base_dir: Path
    table_files: dict = field(default_factory=dict)

    def source(self) -> DipoleSource:
        if self.source_r_dip is not None:
            src = DipoleSource(self.source_p_r, self.source_d, self.source_r_dip)
        else:
            src = DipoleSource.at_eccentricity(self.geometry, self.source_eta, self.source_p_r,
                                               self.source_d)
        src.eta(self.geometry)  # inside the brain
        return src

    def require_tissues(self):
        if self.tissues is None:
            raise ConfigError("config has no 'tissues' block")
        return self.tissues

    def fit_config(self) -> FitConfig:
        fb = self.fit_block
        where = "fit."
        statics = fb.get("static_tissues")
        if not isinstance(statics, dict) or set(statics) != set(LAYER_NAMES):
            raise ConfigError("fit.static_tissues must give brain, skull and scalp "
                              "(static sigma_s_per_m / eps_rel)")
        st = tuple(TissueSpec(n, _static(statics[n], f"{where}static_tissues.{n}."))
                   for n in LAYER_NAMES)
        opt_doc = fb.get("optimizer", {})
        defaults = OptimizerConfig()
        opt = OptimizerConfig(
            max_iters=int(_num(opt_doc, "max_iters", defaults.max_iters, "fit.optimizer.")),
            xatol=_num(opt_doc, "xatol", defaults.xatol, "fit.optimizer."),
            fatol=_num(opt_doc, "fatol", defaults.fatol, "fit.optimizer."),
            initial_step=_num(opt_doc, "initial_step", defaults.initial_step, "fit.optimizer."),
            restarts=int(_num(opt_doc, "restarts", defaults.restarts, "fit.optimizer.")),
            penalty=_num(opt_doc, "penalty", defaults.penalty, "fit.optimizer."),
        )
        ts = _floats(fb.get("t_skull_grid_m", default_skull_grid()), "fit.t_skull_grid_m")
        try:
            return FitConfig(
                geometry_grid=skull_sweep(self.geometry, ts),
                static_tissues=st,
                eccentricity_grid=_floats(fb.get("eccentricity_grid", FIT_ETAS),
                                          "fit.eccentricity_grid"),
                objective_frequency=_num(fb, "objective_frequency_hz", 1000.0, where),
                gamma_degree=int(_num(fb, "gamma_degree", 2, where)),
                alpha_degree=int(_num(fb, "alpha_degree", 3, where)),
                gamma_eta=_num(fb, "gamma_eta", 0.465, where),
                gamma_abscissae=tuple(fb.get("gamma_abscissae", DEFAULT_GAMMA_ABSCISSAE)),
                reference_geometry=self.geometry,
                p_r=self.source_p_r, d=self.source_d,
                ssh_tol=self.ssh_tol, ssh_l_cap=self.ssh_l_cap, optimizer=opt)
        except HeadRCError as exc:
            raise ConfigError(f"fit: {exc}") from exc


def _floats(seq, where):
    if not isinstance(seq, (list, tuple)) or not seq:
        raise ConfigError(f"{where} must be a non-empty list of numbers")
    out = []
    for v in seq:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{where} contains a non-numeric entry {v!r}")
        out.append(float(v))
    return tuple(out)


def load_config(path, out_override=None, params_override=None, spacing_override=None) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base = path.resolve().parent
    try:
        return _parse(doc, base, out_override, params_override, spacing_override)
    except HeadRCError as exc:
        if isinstance(exc, (ConfigError, TableParseError)):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


def _parse(doc, base, out_override, params_override, spacing_override):
    g = _block(doc, "geometry")
    geom = HeadGeometry.from_thicknesses(
        _num(g, "r_brain_m", R_BRAIN_STD, "geometry."),
        _num(g, "t_skull_m", T_SKULL_STD, "geometry."),
        _num(g, "t_scalp_m", T_SCALP_STD, "geometry."))

    tissues, table_files = None, {}
    if "tissues" in doc:
        tb = _block(doc, "tissues")
        missing = set(LAYER_NAMES) - set(tb)
        if missing:
            raise ConfigError(f"tissues: missing layers {sorted(missing)}")
        ts = []
        for name in LAYER_NAMES:
            t, p = _tissue(name, tb[name], base, f"tissues.{name}")
            ts.append(t)
            if p is not None:
                table_files[name] = p
        tissues = tuple(ts)

    s = _block(doc, "source")
    r_dip = _num(s, "r_dip_m", where="source.") if "r_dip_m" in s else None
    eta = None if r_dip is not None else _num(s, "eta", ABLATION_ETA, "source.")

    fg = _block(doc, "frequency_grid")
    grid = FrequencyGrid(
        _num(fg, "f_min_hz", 10.0, "frequency_grid."),
        _num(fg, "f_max_hz", 50e3, "frequency_grid."),
        int(_num(fg, "n_points", 75, "frequency_grid.")),
        spacing_override or fg.get("spacing", "linear"))

    sb = _block(doc, "ssh")
    sw = _block(doc, "sweep")
    ab = _block(doc, "ablation")
    nb = _block(doc, "netlist")
    anchor = ab.get("anchor_hz")
    out_dir = Path(out_override) if out_override else base / doc.get("output_dir", "out")
    if params_override:
        params_file = Path(params_override)
    elif "params_file" in doc:
        params_file = base / doc["params_file"]
    else:
        params_file = out_dir / "params.json"
    cfg = RunConfig(
        geometry=geom, tissues=tissues,
        source_p_r=_num(s, "p_r_am", 15e-9, "source."), source_d=_num(s, "d_m", 1e-3, "source."),
        source_eta=eta, source_r_dip=r_dip, grid=grid,
        ssh_tol=_num(sb, "tol", DEFAULT_TOL, "ssh."),
        ssh_l_cap=int(_num(sb, "l_cap", DEFAULT_L_CAP, "ssh.")),
        fit_block=_block(doc, "fit"),
        sweep_etas=_floats(sw.get("eta_list", SWEEP_ETAS), "sweep.eta_list"),
        sweep_t_skulls=_floats(sw.get("t_skull_list_m", default_sweep_skull_list()),
                               "sweep.t_skull_list_m"),
        ablation_eta=_num(ab, "eta", ABLATION_ETA, "ablation."),
        ablation_anchor_hz=None if anchor is None else _num(ab, "anchor_hz", where="ablation."),
        netlist_frequency=_num(nb, "frequency_hz", 1000.0, "netlist."),
        output_dir=out_dir, params_file=params_file, base_dir=base, table_files=table_files)
    cfg.source()
    if not cfg.ssh_tol > 0 or cfg.ssh_l_cap < 1:
        raise ConfigError("ssh.tol must be > 0 and ssh.l_cap >= 1")
    if not 0 <= cfg.ablation_eta < 1:
        raise ConfigError("ablation.eta must lie in [0, 1)")
    return cfg
