"""Lumped RC ladder surrogate of the three-shell head.

Wiring (G is the reference node and the dipole return)::

    N0 --Z_brain_up--- N1 --Z_skull_r--- N2 --Z_scalp_r--- N3   (air: open)
    |                  |                 |                 |
    Z_brain_down       Z_brain_t         Z_skull_t         Z_scalp_t
    |                  |                 |                 |
    G                  G                 G                 G

The dipole current ``I = p_r / d`` enters N0 and returns at G.  Every branch is
a parallel RC pair.  Radial branches of layer ``i`` use ``R = k s Gamma_i /
sigma_i`` and ``C = eps_i / (k s Gamma_i)``, tangential branches are the radial
ones divided by ``gamma_i`` and the brain radial branch is split into
``(1 - alpha)`` and ``(1 + alpha)`` halves.  ``s = (r_ref / r3)^2`` rescales
impedances with head size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, HeadRCError, SingularNetworkError
from .geometry import DipoleSource, HeadGeometry
from .params import CircuitPoint, FittedParams
from .tissue import EPS0, TissueSpec

NODES = ("N0", "N1", "N2", "N3", "G")
GROUND = "G"

# role -> (from node, to node, layer index, kind)
WIRING = {
    "radial_brain_up": ("N0", "N1", 0, "up"),
    "radial_brain_down": ("N0", "G", 0, "down"),
    "radial_skull": ("N1", "N2", 1, "radial"),
    "radial_scalp": ("N2", "N3", 2, "radial"),
    "tangential_brain": ("N1", "G", 0, "tangential"),
    "tangential_skull": ("N2", "G", 1, "tangential"),
    "tangential_scalp": ("N3", "G", 2, "tangential"),
}
ROLES = tuple(WIRING)

_LAYERS = ("brain", "skull", "scalp")


def geometric_factor(layer: str, geom: HeadGeometry) -> float:
    """Baseline radial factor ``t / r_mid^2`` (1/m) of a layer.

    The brain is treated as a slab of thickness ``r1`` centred at ``r1 / 2``.
    """
    if layer == "brain":
        t, r_mid = geom.r1, geom.r1 / 2
    elif layer == "skull":
        t, r_mid = geom.t_skull, (geom.r1 + geom.r2) / 2
    elif layer == "scalp":
        t, r_mid = geom.t_scalp, (geom.r2 + geom.r3) / 2
    else:
        raise DomainError(f"unknown layer {layer!r}")
    return t / r_mid ** 2


@dataclass(frozen=True)
class BranchImpedance:
    """Parallel RC pair frozen at angular frequency ``omega``."""

    r: float
    c: float
    omega: float

    def __post_init__(self):
        if not (self.r > 0) or math.isnan(self.r):
            raise DomainError(f"resistance must be > 0 or inf, got {self.r}")
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise DomainError(f"capacitance must be finite and >= 0, got {self.c}")

    @property
    def admittance(self) -> complex:
        return complex(1.0 / self.r, self.omega * self.c)

    @property
    def z(self) -> complex:
        y = self.admittance
        return complex(math.inf, 0) if y == 0 else 1.0 / y


@dataclass(frozen=True)
class Branch:
    role: str
    n_from: str
    n_to: str
    impedance: BranchImpedance


@dataclass(frozen=True)
class CircuitNetwork:
    branches: tuple
    current: complex
    frequency: float
    nodes: tuple = NODES
    inject: str = "N0"
    ret: str = GROUND
    # descriptive metadata for netlist headers
    geometry: HeadGeometry | None = field(default=None, compare=False)
    source: DipoleSource | None = field(default=None, compare=False)
    tissue_notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        roles = sorted(b.role for b in self.branches)
        if roles != sorted(ROLES):
            raise DomainError(f"network needs exactly the roles {ROLES}")

    def branch(self, role: str) -> Branch:
        for b in self.branches:
            if b.role == role:
                return b
        raise KeyError(role)


def layer_properties(tissues, freqs, displacement=True, sigma_anchor_hz=None):
    """Per-layer ``(sigma, eps_abs)`` arrays of shape ``(3, nf)``.

    ``displacement=False`` zeroes permittivity (no capacitors); a
    ``sigma_anchor_hz`` freezes conductivity at that frequency.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    tissues = list(tissues)[:3]
    if len(tissues) != 3:
        raise DomainError("circuit needs brain, skull and scalp tissues")
    sigma = np.empty((3, freqs.size))
    eps = np.empty((3, freqs.size))
    for i, t in enumerate(tissues):
        s, e = t.properties(freqs)
        if sigma_anchor_hz is not None:
            s = np.full(freqs.size, t.properties(float(sigma_anchor_hz))[0])
        sigma[i] = s
        eps[i] = EPS0 * e if displacement else 0.0
    return sigma, eps


def branch_values(geom: HeadGeometry, point: CircuitPoint, sigma, eps):
    """Resistances and capacitances ``(7, nf)`` in :data:`ROLES` order."""
    sigma = np.atleast_2d(sigma)
    eps = np.atleast_2d(eps)
    s = (point.reference_r_scalp / geom.r3) ** 2
    ks = point.scale * s
    big_gamma = np.array([geometric_factor(name, geom) for name in _LAYERS])[:, None]
    with np.errstate(divide="ignore"):
        r_rad = ks * big_gamma / sigma  # sigma = 0 -> open branch (inf)
    c_rad = eps / (ks * big_gamma)
    a = point.alpha
    g = np.asarray(point.gamma, dtype=float)[:, None]
    r = np.empty((7, sigma.shape[1]))
    c = np.empty_like(r)
    for k, (role, (_, _, layer, kind)) in enumerate(WIRING.items()):
        if kind == "up":
            r[k], c[k] = r_rad[0] * (1 - a), c_rad[0] / (1 - a)
        elif kind == "down":
            r[k], c[k] = r_rad[0] * (1 + a), c_rad[0] / (1 + a)
        elif kind == "radial":
            r[k], c[k] = r_rad[layer], c_rad[layer]
        else:
            r[k], c[k] = r_rad[layer] / g[layer], c_rad[layer] * g[layer]
    return r, c


def branch_impedances(geom: HeadGeometry, tissues, params, src: DipoleSource, f: float,
                      displacement=True, sigma_anchor_hz=None) -> CircuitNetwork:
    """Build the network at frequency ``f``.

    ``params`` is a :class:`FittedParams` (evaluated at this geometry and the
    source eccentricity, with the validity guard) or an explicit
    :class:`CircuitPoint`.
    """
    if f < 0:
        raise DomainError("frequency must be >= 0")
    point = params.point(geom, src.eta(geom)) if isinstance(params, FittedParams) else params
    tissues = list(tissues)[:3]
    sigma, eps = layer_properties(tissues, [f], displacement, sigma_anchor_hz)
    r, c = branch_values(geom, point, sigma, eps)
    omega = 2 * math.pi * f
    branches = tuple(
        Branch(role, WIRING[role][0], WIRING[role][1],
               BranchImpedance(float(r[k, 0]), float(c[k, 0]), omega))
        for k, role in enumerate(ROLES))
    notes = tuple(_tissue_note(t) for t in tissues)
    return CircuitNetwork(branches, complex(src.current), float(f), geometry=geom,
                          source=src, tissue_notes=notes)


def _tissue_note(t: TissueSpec) -> str:
    d = t.dispersion
    if t.is_static:
        return f"{t.name}: static sigma={d.sigma!r} S/m eps_rel={d.eps_rel!r}"
    return (f"{t.name}: table {len(d.frequency)} rows "
            f"[{d.f_min!r}, {d.f_max!r}] Hz sha256={t.digest()[:16]}")


_INDEX = {n: i for i, n in enumerate(NODES[:4])}


def _admittance_matrices(y):
    """Stack nodal admittance matrices from branch admittances ``(7, nf)``."""
    nf = y.shape[1]
    Y = np.zeros((nf, 4, 4), dtype=complex)
    for k, role in enumerate(ROLES):
        a, b = WIRING[role][0], WIRING[role][1]
        ia, ib = _INDEX.get(a), _INDEX.get(b)
        for i in (ia, ib):
            if i is not None:
                Y[:, i, i] += y[k]
        if ia is not None and ib is not None:
            Y[:, ia, ib] -= y[k]
            Y[:, ib, ia] -= y[k]
    return Y


def _solve(Y, current):
    rhs = np.zeros((Y.shape[0], 4, 1), dtype=complex)
    rhs[:, 0, 0] = current
    cond = np.linalg.cond(Y)
    if not np.all(np.isfinite(cond)) or np.any(cond > 1e14):
        raise SingularNetworkError("nodal admittance matrix is singular")
    try:
        return np.linalg.solve(Y, rhs)[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise SingularNetworkError("nodal admittance matrix is singular") from exc


def admittances(net: CircuitNetwork) -> np.ndarray:
    return np.array([net.branch(role).impedance.admittance for role in ROLES])


def solve_network(net: CircuitNetwork, f: float | None = None):
    """Solve the nodal system; returns ``(voltages, v_scalp_max)``.

    ``voltages`` maps every node label (including ``G`` = 0) to its complex
    potential.  ``f`` defaults to the frequency the network was built at.
    """
    if f is not None and not math.isclose(f, net.frequency, rel_tol=0, abs_tol=0):
        raise DomainError(f"network was built at {net.frequency} Hz, not {f} Hz")
    y = admittances(net)[:, None]
    v = _solve(_admittance_matrices(y), net.current)[0]
    voltages = {n: complex(v[i]) for n, i in _INDEX.items()}
    voltages[GROUND] = 0j
    return voltages, voltages["N3"]


def branch_currents(net: CircuitNetwork, voltages) -> dict:
    """Current through each branch, from ``n_from`` to ``n_to``."""
    return {b.role: (voltages[b.n_from] - voltages[b.n_to]) * b.impedance.admittance
            for b in net.branches}


def kcl_residuals(net: CircuitNetwork, voltages) -> dict:
    """Net current leaving each node (branches minus source injection)."""
    res = {n: 0j for n in net.nodes}
    for role, i in branch_currents(net, voltages).items():
        b = net.branch(role)
        res[b.n_from] += i
        res[b.n_to] -= i
    res[net.inject] -= net.current
    res[net.ret] += net.current
    return res


def circuit_spectrum(geom: HeadGeometry, tissues, params, src: DipoleSource, freqs,
                     displacement=True, sigma_anchor_hz=None) -> np.ndarray:
    """Complex ``V(N3)`` over ``freqs`` from one batched nodal solve."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(freqs < 0):
        raise DomainError("frequency must be >= 0")
    point = params.point(geom, src.eta(geom)) if isinstance(params, FittedParams) else params
    sigma, eps = layer_properties(tissues, freqs, displacement, sigma_anchor_hz)
    return _spectrum_from_properties(geom, point, sigma, eps, freqs, src.current)


def _spectrum_from_properties(geom, point, sigma, eps, freqs, current):
    r, c = branch_values(geom, point, sigma, eps)
    omega = 2 * np.pi * np.asarray(freqs, dtype=float)
    y = 1.0 / r + 1j * omega[None, :] * c
    v = _solve(_admittance_matrices(y), current)
    return v[:, 3]


def static_potential(geom: HeadGeometry, point: CircuitPoint, sigma3, current) -> float:
    """``|V(N3)|`` of the purely resistive network for layer conductivities ``sigma3``."""
    sigma = np.asarray(sigma3, dtype=float).reshape(3, 1)
    return abs(complex(_spectrum_from_properties(geom, point, sigma, np.zeros_like(sigma),
                                                 [0.0], current)[0]))


# ---------------------------------------------------------------- netlist export

def _spice_name(role: str) -> str:
    return role.replace("radial_", "").replace("tangential_", "t_")


def netlist_text(net: CircuitNetwork) -> str:
    """SPICE deck for ``net``; deterministic for identical inputs."""
    lines = ["* headrc lumped RC three-shell head surrogate",
             f"* tool: headrc {__version__}",
             f"* frequency_hz: {net.frequency:.17g}"]
    if net.geometry is not None:
        g = net.geometry
        lines.append(f"* geometry: r1_m={g.r1:.17g} r2_m={g.r2:.17g} r3_m={g.r3:.17g}")
    if net.source is not None:
        s = net.source
        lines.append(f"* source: p_r_am={s.p_r:.17g} d_m={s.d:.17g} r_dip_m={s.r_dip:.17g}")
    lines += [f"* tissue {note}" for note in net.tissue_notes]
    omitted = []
    cards = []
    for b in net.branches:
        n1, n2 = (_spice_node(b.n_from), _spice_node(b.n_to))
        name = _spice_name(b.role)
        r, c = b.impedance.r, b.impedance.c
        if math.isinf(r):
            omitted.append(f"R{name} (open, sigma = 0)")
        else:
            cards.append(f"R{name} {n1} {n2} {r:.17g}")
        if c == 0:
            omitted.append(f"C{name} (C = 0)")
        elif not math.isfinite(c):
            raise HeadRCError(f"capacitance of {b.role} is not finite")
        else:
            cards.append(f"C{name} {n1} {n2} {c:.17g}")
    if net.current.imag != 0:
        raise HeadRCError("netlist export expects a real source amplitude")
    lines += [f"* omitted: {o}" for o in omitted]
    lines += cards
    lines.append(f"Idip {_spice_node(net.ret)} {_spice_node(net.inject)} AC "
                 f"{net.current.real:.17g}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def _spice_node(n: str) -> str:
    return "0" if n == GROUND else n


def export_netlist(net: CircuitNetwork, f: float, path) -> Path:
    """Write :func:`netlist_text` to ``path`` atomically."""
    from .io import atomic_write_text

    if f != net.frequency:
        raise DomainError(f"network was built at {net.frequency} Hz, not {f} Hz")
    path = Path(path)
    atomic_write_text(path, netlist_text(net))
    return path
