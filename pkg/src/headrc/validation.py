"""MRFE sweeps against the SSH reference and the dispersion ablation."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .circuit import circuit_spectrum
from .errors import DomainError, HeadRCError
from .geometry import DipoleSource, HeadGeometry
from .io import fmt
from .params import FittedParams
from .ssh import DEFAULT_L_CAP, DEFAULT_TOL, ssh_spectrum

SWEEP_ETAS = (0.233, 0.465, 0.814, 0.935, 0.966)
ABLATION_ETA = 0.935


def default_sweep_skull_list():
    """4.6-8.2 mm in 0.4 mm steps plus the standard 5.9 mm."""
    ts = set(np.round(np.linspace(4.6e-3, 8.2e-3, 10), 12)) | {5.9e-3}
    return tuple(sorted(float(t) for t in ts))


@dataclass(frozen=True)
class FrequencyGrid:
    f_min: float = 10.0
    f_max: float = 50e3
    n_points: int = 75
    spacing: str = "linear"

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise DomainError("need 0 < f_min < f_max")
        if self.n_points < 2:
            raise DomainError("need at least two frequency points")
        if self.spacing not in ("linear", "log"):
            raise DomainError("spacing must be 'linear' or 'log'")

    def frequencies(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.f_min, self.f_max, self.n_points)
        return np.linspace(self.f_min, self.f_max, self.n_points)


class AblationCase(enum.Enum):
    OHMIC_STATIC = "ohmic_static"
    DISPERSIVE_R_ONLY = "dispersive_r_only"
    DISPERSIVE_RC = "dispersive_rc"


def mrfe(circuit, reference) -> float:
    """Mean relative frequency error of magnitudes, ``mean |(|c| - |r|) / |r|``."""
    c = np.abs(np.asarray(circuit))
    r = np.abs(np.asarray(reference))
    if c.shape != r.shape or c.ndim != 1 or c.size == 0:
        raise DomainError("mrfe needs two equal-length, non-empty series")
    if np.any(r == 0):
        raise DomainError("reference series contains a zero")
    return float(np.mean(np.abs((c - r) / r)))


# ------------------------------------------------------------------ sweep

@dataclass
class SweepResult:
    etas: np.ndarray
    t_skulls: np.ndarray
    frequencies: np.ndarray
    v_circuit: np.ndarray       # |V|, shape (n_eta, n_t, n_f); NaN in invalid cells
    v_ssh: np.ndarray
    mrfe: np.ndarray            # shape (n_eta, n_t); NaN in invalid cells
    errors: dict = field(default_factory=dict)   # (i, j) -> message
    metadata: dict = field(default_factory=dict)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.mrfe)

    def summary(self) -> dict:
        ok = self.valid
        vals = self.mrfe[ok]
        cells = []
        for i, eta in enumerate(self.etas):
            for j, t in enumerate(self.t_skulls):
                cells.append({"eta": float(eta), "t_skull_m": float(t),
                              "mrfe": float(self.mrfe[i, j]) if ok[i, j] else None,
                              "error": self.errors.get((i, j))})
        return {
            "cells": cells,
            "n_cells": int(ok.size),
            "n_invalid": int((~ok).sum()),
            "mrfe_mean": float(vals.mean()) if vals.size else None,
            "mrfe_max": float(vals.max()) if vals.size else None,
            "eta_trend_spearman": [
                {"t_skull_m": float(t), "rho": rho}
                for t, rho in zip(self.t_skulls, self.eta_trend())],
            "frequency_grid": {"f_min_hz": float(self.frequencies[0]),
                               "f_max_hz": float(self.frequencies[-1]),
                               "n_points": int(self.frequencies.size)},
            "metadata": self.metadata,
        }

    def eta_trend(self):
        """Spearman rank correlation of MRFE with eta, one value per skull thickness."""
        out = []
        for j in range(self.t_skulls.size):
            col = self.mrfe[:, j]
            ok = np.isfinite(col)
            if ok.sum() < 3:
                out.append(None)
                continue
            rho = stats.spearmanr(self.etas[ok], col[ok]).statistic
            out.append(None if not np.isfinite(rho) else float(rho))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta", "t_skull_m", "frequency_hz", "v_circuit_abs", "v_ssh_abs", "rel_err"])
        for i, eta in enumerate(self.etas):
            for j, t in enumerate(self.t_skulls):
                for k, f in enumerate(self.frequencies):
                    vc, vs = self.v_circuit[i, j, k], self.v_ssh[i, j, k]
                    rel = abs((vc - vs) / vs) if np.isfinite(vc) and np.isfinite(vs) else math.nan
                    w.writerow([fmt(eta), fmt(t), fmt(f), fmt(vc), fmt(vs), fmt(rel)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_files(cls, csv_text: str, json_text: str) -> "SweepResult":
        rows = list(csv.DictReader(io.StringIO(csv_text)))
        etas = sorted({float(r["eta"]) for r in rows})
        ts = sorted({float(r["t_skull_m"]) for r in rows})
        fs = sorted({float(r["frequency_hz"]) for r in rows})
        shape = (len(etas), len(ts), len(fs))
        vc, vs = np.full(shape, math.nan), np.full(shape, math.nan)
        ie = {e: i for i, e in enumerate(etas)}
        it = {t: i for i, t in enumerate(ts)}
        ik = {f: i for i, f in enumerate(fs)}
        for r in rows:
            idx = ie[float(r["eta"])], it[float(r["t_skull_m"])], ik[float(r["frequency_hz"])]
            vc[idx], vs[idx] = float(r["v_circuit_abs"]), float(r["v_ssh_abs"])
        summary = json.loads(json_text)
        m = np.full(shape[:2], math.nan)
        errors = {}
        for cell in summary["cells"]:
            i, j = ie[cell["eta"]], it[cell["t_skull_m"]]
            if cell["mrfe"] is not None:
                m[i, j] = cell["mrfe"]
            if cell["error"] is not None:
                errors[(i, j)] = cell["error"]
        return cls(np.array(etas), np.array(ts), np.array(fs), vc, vs, m, errors,
                   summary.get("metadata", {}))


def _sweep_cell(args):
    (params, geom, tissues, freqs, eta, p_r, d, ssh_tol, l_cap) = args
    src = DipoleSource(p_r, d, eta * geom.r1)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            vc = np.abs(circuit_spectrum(geom, tissues, params, src, freqs))
            vs = np.abs(ssh_spectrum(geom, tissues, src, freqs, ssh_tol, l_cap)[0])
        warned = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
        return vc, vs, mrfe(vc, vs), None, warned
    except HeadRCError as exc:
        return None, None, math.nan, f"{type(exc).__name__}: {exc}", []


def _map_cells(tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [_sweep_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_cell, tasks))


def _digest_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def run_mrfe_sweep(params: FittedParams, geom_base: HeadGeometry, tissues, grid: FrequencyGrid,
                   eta_list=SWEEP_ETAS, t_skull_list=None, p_r=15e-9, d=1e-3,
                   ssh_tol=DEFAULT_TOL, l_cap=DEFAULT_L_CAP, jobs=1) -> SweepResult:
    """Circuit vs SSH ``|V|`` and MRFE over an eccentricity x skull-thickness grid.

    Brain and scalp radii of ``geom_base`` are held fixed.  Cells whose
    evaluation fails (e.g. the parameter-domain guard) are kept as NaN with the
    error message recorded.
    """
    if t_skull_list is None:
        t_skull_list = default_sweep_skull_list()
    tissues = tuple(tissues)[:3]
    freqs = grid.frequencies()
    etas = np.asarray(eta_list, dtype=float)
    ts = np.asarray(t_skull_list, dtype=float)
    tasks, cells = [], []
    for i, eta in enumerate(etas):
        for j, t in enumerate(ts):
            geom = geom_base.with_skull_thickness(float(t))
            tasks.append((params, geom, tissues, freqs, float(eta), p_r, d, ssh_tol, l_cap))
            cells.append((i, j))
    results = _map_cells(tasks, jobs)

    shape = (etas.size, ts.size, freqs.size)
    vc_all, vs_all = np.full(shape, math.nan), np.full(shape, math.nan)
    m = np.full(shape[:2], math.nan)
    errors, warned = {}, set()
    for (i, j), (vc, vs, cell_mrfe, err, w) in zip(cells, results):
        if err is not None:
            errors[(i, j)] = err
            continue
        vc_all[i, j], vs_all[i, j], m[i, j] = vc, vs, cell_mrfe
        warned.update(w)
    metadata = {
        "params_sha256": _digest_text(params.to_json()),
        "tissue_sha256": {t.name: t.digest() for t in tissues},
        "geometry_base_m": {"r1": geom_base.r1, "r3": geom_base.r3},
        "source": {"p_r_am": p_r, "d_m": d},
        "frequency_spacing": grid.spacing,
        "warnings": sorted(warned),
    }
    return SweepResult(etas, ts, freqs, vc_all, vs_all, m, errors, metadata)


# ------------------------------------------------------------------ ablation

@dataclass
class AblationResult:
    frequencies: np.ndarray
    spectra: dict              # AblationCase -> |V|
    eta: float
    anchor_hz: float

    def deviation(self, case: AblationCase, reference=AblationCase.DISPERSIVE_RC):
        """Relative deviation ``(|V_case| - |V_ref|) / |V_ref|``."""
        ref = self.spectra[reference]
        return (self.spectra[case] - ref) / ref

    def deviations(self) -> dict:
        C = AblationCase
        return {
            "ohmic_vs_rc": self.deviation(C.OHMIC_STATIC),
            "r_only_vs_rc": self.deviation(C.DISPERSIVE_R_ONLY),
            "ohmic_vs_r_only": self.deviation(C.OHMIC_STATIC, C.DISPERSIVE_R_ONLY),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frequency_hz", "v_ohmic", "v_disp_r", "v_disp_rc"])
        C = AblationCase
        for k, f in enumerate(self.frequencies):
            w.writerow([fmt(f), fmt(self.spectra[C.OHMIC_STATIC][k]),
                        fmt(self.spectra[C.DISPERSIVE_R_ONLY][k]),
                        fmt(self.spectra[C.DISPERSIVE_RC][k])])
        return buf.getvalue()


def run_ablation(params, geom: HeadGeometry, tissues, grid: FrequencyGrid,
                 eta=ABLATION_ETA, p_r=15e-9, d=1e-3, anchor_hz=None) -> AblationResult:
    """|V_scalp| for the three circuit configurations.

    ``ohmic_static`` freezes sigma at ``anchor_hz`` (default: lowest grid
    frequency) without capacitors, ``dispersive_r_only`` uses sigma(f) without
    capacitors and ``dispersive_rc`` is the full dispersive RC network.
    """
    freqs = grid.frequencies()
    anchor = float(freqs[0] if anchor_hz is None else anchor_hz)
    src = DipoleSource(p_r, d, eta * geom.r1)
    C = AblationCase
    spectra = {
        C.OHMIC_STATIC: circuit_spectrum(geom, tissues, params, src, freqs,
                                         displacement=False, sigma_anchor_hz=anchor),
        C.DISPERSIVE_R_ONLY: circuit_spectrum(geom, tissues, params, src, freqs,
                                              displacement=False),
        C.DISPERSIVE_RC: circuit_spectrum(geom, tissues, params, src, freqs),
    }
    return AblationResult(freqs, {c: np.abs(v) for c, v in spectra.items()}, float(eta), anchor)
