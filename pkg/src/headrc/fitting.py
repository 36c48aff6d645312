"""Identify gamma_i(psi), alpha(eta) and the impedance scale against the SSH reference.

All fitting runs with static, non-dispersive tissue conductivities: the circuit
is purely resistive and the reference series is real, so only geometry and
eccentricity dependence are learned.

Protocol
--------
1. One-point calibration: ``k0`` makes the circuit (gamma = 1, alpha = 0) match
   the centred dipole in the reference geometry.
2. Eccentricity stage (reference geometry, ``gamma = 1``): the scale is fixed
   to ``k_ecc``, the midpoint of the per-eta matching scales at the ends of the
   eccentricity grid, and alpha is fitted pointwise.  Because ``|V|`` of the
   ladder is proportional to ``1 + alpha`` this centres the fitted alphas in
   ``(-1, 1)``.
3. Geometry stage (skull sweep at ``gamma_eta``): alpha is taken from the
   eccentricity polynomial, the scale stays ``k_ecc`` and the three gammas are
   fitted pointwise.  The problem is under-determined, so the objective carries
   a small penalty on ``log(gamma)`` that selects the solution closest to the
   start.
4. Least-squares polynomials through the pointwise optima.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import __version__
from .circuit import static_potential
from .errors import DegenerateDesignError, DomainError, HeadRCError
from .geometry import HeadGeometry
from .params import DEFAULT_GAMMA_ABSCISSAE, CircuitPoint, FittedParams, abscissa_value
from .ssh import DEFAULT_L_CAP, DEFAULT_TOL, ssh_potential
from .tissue import LAYER_NAMES

FIT_ETAS = (0.233, 0.465, 0.814, 0.935, 0.965)
ETA_FIT_MAX = 0.965
PARAM_NAMES = ("gamma_brain", "gamma_skull", "gamma_scalp", "alpha", "scale")
ALPHA_BOUND = 0.99


def default_skull_grid(n=10):
    return tuple(float(t) for t in np.linspace(4.6e-3, 8.2e-3, n))


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 4000
    xatol: float = 1e-10
    fatol: float = 1e-22
    initial_step: float = 0.1
    restarts: int = 3
    penalty: float = 1e-8


@dataclass(frozen=True)
class FitConfig:
    geometry_grid: tuple
    static_tissues: tuple
    eccentricity_grid: tuple = FIT_ETAS
    objective_frequency: float = 1000.0
    gamma_degree: int = 2
    alpha_degree: int = 3
    gamma_eta: float = 0.465
    gamma_abscissae: tuple = DEFAULT_GAMMA_ABSCISSAE
    reference_geometry: HeadGeometry = field(default_factory=HeadGeometry.standard)
    p_r: float = 15e-9
    d: float = 1e-3
    ssh_tol: float = DEFAULT_TOL
    ssh_l_cap: int = DEFAULT_L_CAP
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if not self.geometry_grid:
            raise DomainError("geometry_grid must not be empty")
        etas = tuple(self.eccentricity_grid)
        if not etas or min(etas) < 0 or max(etas) > ETA_FIT_MAX:
            raise DomainError(f"eccentricity grid must lie in [0, {ETA_FIT_MAX}]")
        if len(self.static_tissues) != 3 or not all(t.is_static for t in self.static_tissues):
            raise DomainError("fitting needs three Static tissues (brain, skull, scalp)")
        if self.gamma_degree not in (1, 2):
            raise DomainError("gamma polynomials are first or second order")
        if self.alpha_degree not in (1, 2, 3):
            raise DomainError("alpha polynomial degree must be 1, 2 or 3")
        if not 0 <= self.gamma_eta < 1:
            raise DomainError("gamma_eta must lie in [0, 1)")

    @property
    def sigma(self):
        """Static conductivities (brain, skull, scalp) at the objective frequency."""
        return np.array([t.properties(self.objective_frequency)[0] for t in self.static_tissues])

    @property
    def current(self) -> float:
        return self.p_r / self.d


@dataclass(frozen=True)
class PointFit:
    geometry: HeadGeometry
    eta: float
    stage: str
    gamma: tuple
    alpha: float
    scale: float
    residual: float
    start_residual: float
    iterations: int
    converged: bool

    def as_point(self, reference_r_scalp) -> CircuitPoint:
        return CircuitPoint(self.gamma, self.alpha, self.scale, reference_r_scalp)


@dataclass
class FitReport:
    points: list
    params: FittedParams
    initial_objective: float
    final_objective: float
    iterations: int
    regression_residuals: dict
    model_residuals: list
    converged: bool


# ------------------------------------------------------------------ objective

def reference_magnitude(config: FitConfig, geom: HeadGeometry, eta: float) -> float:
    """Real, static |V_SSH| (air conductivity 0)."""
    sc = list(config.sigma) + [0.0]
    sol = ssh_potential(geom, sc, eta, config.p_r, config.ssh_tol, config.ssh_l_cap)
    return abs(sol.v_scalp)


def circuit_magnitude(config: FitConfig, geom: HeadGeometry, gamma, alpha, scale) -> float:
    point = CircuitPoint(tuple(gamma), alpha, scale, config.reference_geometry.r3)
    return static_potential(geom, point, config.sigma, config.current)


def relative_error(config, geom, eta, gamma, alpha, scale, target=None) -> float:
    if target is None:
        target = reference_magnitude(config, geom, eta)
    return abs(circuit_magnitude(config, geom, gamma, alpha, scale) - target) / target


def calibrate_scale(config: FitConfig, geom=None, eta=0.0, gamma=(1.0, 1.0, 1.0), alpha=0.0):
    """Scale that makes circuit and reference magnitudes agree exactly at one point."""
    geom = config.reference_geometry if geom is None else geom
    return (reference_magnitude(config, geom, eta)
            / circuit_magnitude(config, geom, gamma, alpha, 1.0))


def default_start(config: FitConfig):
    return {"gamma_brain": 1.0, "gamma_skull": 1.0, "gamma_scalp": 1.0, "alpha": 0.0,
            "scale": calibrate_scale(config)}


def _encode(name, value):
    if name == "alpha":
        return math.atanh(value / ALPHA_BOUND)
    return math.log(value)


def _decode(name, u):
    if name == "alpha":
        return ALPHA_BOUND * math.tanh(u)
    return math.exp(u)


def fit_pointwise(config: FitConfig, geom: HeadGeometry, eta: float, start=None,
                  free=PARAM_NAMES, stage="point") -> PointFit:
    """Locally minimise the static relative error ``| |V_c| - |V_ssh| | / |V_ssh|``.

    Nelder-Mead runs over the ``free`` parameters (log-space for gammas and
    scale, tanh-squashed alpha in (-0.99, 0.99)); the rest stay at ``start``.
    The returned residual is never worse than the start's.
    """
    start = dict(default_start(config) if start is None else start)
    free = tuple(free)
    unknown = set(free) - set(PARAM_NAMES)
    if unknown:
        raise DomainError(f"unknown parameters {sorted(unknown)}")
    target = reference_magnitude(config, geom, eta)
    opt = config.optimizer

    def unpack(u):
        vals = dict(start)
        for name, ui in zip(free, u):
            vals[name] = _decode(name, ui)
        return vals

    def resid(vals):
        g = (vals["gamma_brain"], vals["gamma_skull"], vals["gamma_scalp"])
        return relative_error(config, geom, eta, g, vals["alpha"], vals["scale"], target)

    u0 = np.array([_encode(n, start[n]) for n in free])

    def objective(u):
        return resid(unpack(u)) ** 2 + opt.penalty * float(np.sum((u - u0) ** 2))

    start_res = resid(start)
    best_u, best_f = u0, objective(u0)
    iterations = 0
    converged = True
    if free and start_res > 0:
        for _ in range(max(1, opt.restarts)):
            simplex = np.vstack([best_u] + [best_u + opt.initial_step * e
                                            for e in np.eye(len(free))])
            res = minimize(objective, best_u, method="Nelder-Mead",
                           options={"initial_simplex": simplex, "xatol": opt.xatol,
                                    "fatol": opt.fatol,
                                    "maxiter": max(1, opt.max_iters - iterations)})
            iterations += int(res.nit)
            converged = bool(res.success)
            improved = res.fun < best_f
            if improved:
                best_u, best_f = np.asarray(res.x), float(res.fun)
            if not improved or iterations >= opt.max_iters:
                break
    vals = unpack(best_u)
    res = resid(vals)
    if res > start_res:  # penalty traded residual for proximity; keep the start
        vals, res = dict(start), start_res
    return PointFit(geom, float(eta), stage,
                    (vals["gamma_brain"], vals["gamma_skull"], vals["gamma_scalp"]),
                    vals["alpha"], vals["scale"], res, start_res, iterations, converged)


# ------------------------------------------------------------------ regression

def polyfit_checked(x, y, degree, what="polynomial"):
    """Least-squares polynomial (ascending coefficients) and its max abs residual."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_distinct = np.unique(x).size
    if n_distinct < degree + 1:
        raise DegenerateDesignError(
            f"{what}: degree {degree} needs {degree + 1} distinct abscissae, got {n_distinct}")
    # centred/scaled abscissa keeps the Vandermonde system well conditioned
    x0, h = 0.5 * (x.max() + x.min()), 0.5 * (x.max() - x.min())
    t = (x - x0) / h
    V = np.vander(t, degree + 1, increasing=True)
    c_t, _, rank, _ = np.linalg.lstsq(V, y, rcond=None)
    if rank < degree + 1:
        raise DegenerateDesignError(f"{what}: rank-deficient design")
    # expand p(t) with t = (x - x0)/h into powers of x
    poly_t = np.polynomial.Polynomial(c_t)
    coeffs = poly_t(np.polynomial.Polynomial([-x0 / h, 1.0 / h])).coef
    coeffs = np.pad(coeffs, (0, degree + 1 - coeffs.size))
    resid = float(np.max(np.abs(np.polynomial.polynomial.polyval(x, coeffs) - y)))
    return tuple(float(c) for c in coeffs), resid


def fit_polynomials(config: FitConfig, pointwise, provenance=None):
    """Regress pointwise optima into :class:`FittedParams`.

    Gamma points (``stage == "gamma"``) feed ``gamma_i(psi)``; alpha points
    (``stage == "alpha"``) feed ``alpha(eta)``; the scale is the geometric mean
    of all pointwise scales.  Returns ``(params, regression_residuals)``.
    """
    gpts = [p for p in pointwise if p.stage == "gamma"]
    apts = [p for p in pointwise if p.stage == "alpha"]
    gamma_coeffs, gamma_domains, resids = [], [], {}
    for i, name in enumerate(config.gamma_abscissae):
        x = [abscissa_value(name, p.geometry) for p in gpts]
        y = [p.gamma[i] for p in gpts]
        coeffs, r = polyfit_checked(x, y, config.gamma_degree, f"gamma_{LAYER_NAMES[i]}")
        gamma_coeffs.append(coeffs)
        gamma_domains.append((float(min(x)), float(max(x))))
        resids[f"gamma_{LAYER_NAMES[i]}"] = r
    ax = [p.eta for p in apts]
    alpha_coeffs, r = polyfit_checked(ax, [p.alpha for p in apts], config.alpha_degree, "alpha")
    resids["alpha"] = r
    scales = np.array([p.scale for p in pointwise])
    scale = float(np.exp(np.mean(np.log(scales))))
    params = FittedParams(
        gamma_coeffs=tuple(gamma_coeffs), gamma_domains=tuple(gamma_domains),
        alpha_coeffs=alpha_coeffs, alpha_domain=(float(min(ax)), float(max(ax))),
        global_scale=scale, reference_r_scalp=config.reference_geometry.r3,
        gamma_abscissae=tuple(config.gamma_abscissae),
        provenance=provenance if provenance is not None else fit_provenance(config))
    return params, resids


def fit_provenance(config: FitConfig) -> dict:
    ref = config.reference_geometry
    return {
        "tool": f"headrc {__version__}",
        "objective_frequency_hz": config.objective_frequency,
        "static_sigma_s_per_m": {n: float(s) for n, s in zip(LAYER_NAMES, config.sigma)},
        "reference_geometry_m": {"r1": ref.r1, "r2": ref.r2, "r3": ref.r3},
        "t_skull_grid_m": [g.t_skull for g in config.geometry_grid],
        "eccentricity_grid": list(config.eccentricity_grid),
        "gamma_eta": config.gamma_eta,
        "gamma_degree": config.gamma_degree,
        "alpha_degree": config.alpha_degree,
    }


# ------------------------------------------------------------------ pipeline

def _run(args):
    config, geom, eta, start, free, stage = args
    return fit_pointwise(config, geom, eta, start, free, stage)


def _map(tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [_run(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run, tasks))


def fit_model(config: FitConfig, jobs: int = 1) -> FitReport:
    """Full two-stage fit (pointwise optima, then polynomial regression)."""
    ref = config.reference_geometry
    etas = sorted(set(float(e) for e in config.eccentricity_grid))
    k0 = calibrate_scale(config)

    # matching scale at each eta with gamma = 1, alpha = 0 (|V| is linear in the scale)
    k_eta = {e: k0 * reference_magnitude(config, ref, e)
             / circuit_magnitude(config, ref, (1.0, 1.0, 1.0), 0.0, k0) for e in etas}
    k_ecc = 0.5 * (k_eta[etas[0]] + k_eta[etas[-1]])

    base = {"gamma_brain": 1.0, "gamma_skull": 1.0, "gamma_scalp": 1.0, "alpha": 0.0,
            "scale": k_ecc}
    alpha_pts = _map([(config, ref, e, base, ("alpha",), "alpha") for e in etas], jobs)
    alpha_coeffs, _ = polyfit_checked([p.eta for p in alpha_pts], [p.alpha for p in alpha_pts],
                                      config.alpha_degree, "alpha")
    alpha_mid = float(np.polynomial.polynomial.polyval(config.gamma_eta, alpha_coeffs))
    if not abs(alpha_mid) < ALPHA_BOUND:
        raise DomainError(f"alpha({config.gamma_eta}) = {alpha_mid} outside the fitted range")

    gstart = dict(base, alpha=alpha_mid)
    gamma_pts = _map([(config, g, config.gamma_eta, gstart, PARAM_NAMES[:3], "gamma")
                      for g in config.geometry_grid], jobs)

    points = alpha_pts + gamma_pts
    params, resids = fit_polynomials(config, points)

    model_res = []
    for p in points:
        try:
            pt = params.point(p.geometry, p.eta)
            model_res.append(relative_error(config, p.geometry, p.eta, pt.gamma, pt.alpha,
                                            pt.scale))
        except HeadRCError:
            model_res.append(None)

    converged = all(p.converged for p in points)
    return FitReport(
        points=points, params=params,
        initial_objective=float(np.mean([p.start_residual for p in points])),
        final_objective=float(np.mean([p.residual for p in points])),
        iterations=sum(p.iterations for p in points),
        regression_residuals=resids, model_residuals=model_res, converged=converged)


def skull_sweep(reference: HeadGeometry, t_list):
    return tuple(reference.with_skull_thickness(t) for t in t_list)


def default_fit_config(static_tissues, **kw) -> FitConfig:
    """Default grid: skull 4.6-8.2 mm around the standard head, eta per the validation list."""
    ref = kw.pop("reference_geometry", HeadGeometry.standard())
    grid = kw.pop("geometry_grid", skull_sweep(ref, default_skull_grid()))
    return FitConfig(geometry_grid=tuple(grid), static_tissues=tuple(static_tissues),
                     reference_geometry=ref, **kw)


def report_dict(report: FitReport) -> dict:
    """JSON-ready view of a :class:`FitReport`."""
    return {
        "converged": report.converged,
        "initial_objective": report.initial_objective,
        "final_objective": report.final_objective,
        "iterations": report.iterations,
        "regression_residuals": report.regression_residuals,
        "points": [
            {"stage": p.stage, "eta": p.eta, "t_skull_m": p.geometry.t_skull,
             "r1_m": p.geometry.r1, "r2_m": p.geometry.r2, "r3_m": p.geometry.r3,
             "gamma": list(p.gamma), "alpha": p.alpha, "scale": p.scale,
             "start_residual": p.start_residual, "residual": p.residual,
             "model_residual": m, "iterations": p.iterations, "converged": p.converged}
            for p, m in zip(report.points, report.model_residuals)
        ],
    }

