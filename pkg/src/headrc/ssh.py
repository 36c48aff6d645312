"""Scalar spherical-harmonics series for a radial dipole in a three-shell sphere.

The on-axis scalp potential is

    V = p_r / (4 pi r3^2) * sum_{l>=1} A4(l, w)

with layers indexed 1 brain, 2 skull, 3 scalp, 4 air.  Every ``A4`` term is
homogeneous of degree -1 in the four complex conductivities.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SeriesTruncationWarning, SingularConfigurationError
from .geometry import DipoleSource, HeadGeometry
from .tissue import AIR, complex_conductivity

DEFAULT_TOL = 1e-10
DEFAULT_L_CAP = 500

_SINGULAR_RTOL = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class SshSolution:
    v_scalp: complex
    l_max_used: int
    tail_estimate: float
    converged: bool = True


def _check_conductivities(sigma_c):
    sc = np.asarray(sigma_c, dtype=complex)
    if sc.shape != (4,):
        raise DomainError("need exactly four layer conductivities (brain, skull, scalp, air)")
    if not np.all(np.isfinite(sc)):
        raise DomainError("layer conductivities must be finite")
    if np.all(sc == 0):
        raise SingularConfigurationError("all four layer conductivities are zero")
    return sc


def _terms(l_max, geom: HeadGeometry, sc, eta):
    """A4(l) for l = 1..l_max, plus the denominator cancellation scale."""
    s1, s2, s3, s4 = sc
    l = np.arange(1, l_max + 1, dtype=float)
    p12, p13, p23 = geom.psi(1, 2), geom.psi(1, 3), geom.psi(2, 3)

    # (eta*psi13)^(l-1) and psi^(2l+1) by running products; 0^0 = 1.
    step = np.full(l_max, eta * p13)
    step[0] = 1.0
    radial = np.cumprod(step)
    pw12 = p12 * np.cumprod(np.full(l_max, p12 * p12))
    pw13 = p13 * np.cumprod(np.full(l_max, p13 * p13))
    pw23 = p23 * np.cumprod(np.full(l_max, p23 * p23))

    def diff(a, b):
        return a - b

    def tilde(a, b):
        return (l + 1) * a + l * b

    x1 = tilde(s2, s1) * diff(s3, s2) * diff(s4, s3)
    x2 = diff(s2, s1) * tilde(s2, s3) * diff(s4, s3)
    x3 = diff(s2, s1) * diff(s3, s2) * tilde(s4, s3)
    xt = tilde(s2, s1) * tilde(s3, s2) * tilde(s4, s3)

    ll1 = l * (l + 1)
    a, b, c = ll1 * pw23 * x1, ll1 * pw13 * x2, ll1 * pw12 * x3
    den = a + b + c + xt
    scale = np.abs(a) + np.abs(b) + np.abs(c) + np.abs(xt)
    num = l * (2 * l + 1) ** 3 * s2 * s3 * radial
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = num / den
    return terms, den, scale


def _raise_if_singular(den, scale, upto):
    bad = (scale[:upto] == 0) | (np.abs(den[:upto]) < _SINGULAR_RTOL * scale[:upto])
    if np.any(bad):
        l_bad = int(np.argmax(bad)) + 1
        raise SingularConfigurationError(
            f"denominator of series term l={l_bad} vanishes for these conductivities")


def ssh_term(l: int, geom: HeadGeometry, sigma_c, eta: float) -> complex:
    """Single series coefficient ``A4(l)`` (units of 1/conductivity)."""
    if l < 1:
        raise DomainError("series index starts at l = 1")
    if not 0 <= eta < 1:
        raise DomainError("eta must lie in [0, 1)")
    sc = _check_conductivities(sigma_c)
    terms, den, scale = _terms(int(l), geom, sc, eta)
    _raise_if_singular(den[-1:], scale[-1:], 1)
    return complex(terms[-1])


def ssh_series(geom: HeadGeometry, sigma_c, eta: float, tol=DEFAULT_TOL, l_cap=DEFAULT_L_CAP):
    """Truncated sum of ``A4(l)``.

    Returns ``(total, l_max_used, tail_estimate, converged)``.  The sum stops at
    the first ``L >= 2`` with ``|A4(L)| + |A4(L-1)| < tol * |sum_{l<=L}|``.
    """
    if tol <= 0:
        raise DomainError("tol must be > 0")
    if l_cap < 1:
        raise DomainError("l_cap must be >= 1")
    if not 0 <= eta < 1:
        raise DomainError("eta must lie in [0, 1)")
    sc = _check_conductivities(sigma_c)
    terms, den, scale = _terms(int(l_cap), geom, sc, eta)

    partial = np.cumsum(terms)
    mags = np.abs(terms)
    if l_cap >= 2:
        pair = mags[1:] + mags[:-1]                 # pair[k] covers l = k+1, k+2
        total_mag = np.abs(partial[1:])
        ok = (pair == 0) | (pair < tol * total_mag)
        ok &= np.isfinite(pair)
        if np.any(ok):
            L = int(np.argmax(ok)) + 2
            _raise_if_singular(den, scale, L)
            tail = 0.0 if pair[L - 2] == 0 else float(pair[L - 2] / total_mag[L - 2])
            return complex(partial[L - 1]), L, tail, True
    _raise_if_singular(den, scale, l_cap)
    total = complex(partial[-1])
    last = mags[-1] + (mags[-2] if l_cap >= 2 else 0.0)
    tail = math.inf if total == 0 else float(last / abs(total))
    return total, int(l_cap), tail, False


def ssh_potential(geom: HeadGeometry, sigma_c, eta: float, p_r: float,
                  tol=DEFAULT_TOL, l_cap=DEFAULT_L_CAP) -> SshSolution:
    """Peak scalp potential for explicit complex layer conductivities (brain..air)."""
    total, L, tail, converged = ssh_series(geom, sigma_c, eta, tol, l_cap)
    if not converged:
        warnings.warn(f"series not converged at l_cap={l_cap} (tail {tail:.3g} > tol {tol:.3g})",
                      SeriesTruncationWarning, stacklevel=2)
    v = p_r / (4.0 * math.pi * geom.r3 ** 2) * total
    return SshSolution(complex(v), L, tail, converged)


def layer_conductivities(tissues, f):
    """Complex conductivities (brain, skull, scalp, air) at ``f``; air is appended if absent."""
    tissues = list(tissues)
    if len(tissues) == 3:
        tissues.append(AIR)
    if len(tissues) != 4:
        raise DomainError("need three tissue layers (air optional)")
    return np.array([complex_conductivity(t, f) for t in tissues])


def ssh_peak_potential(geom: HeadGeometry, tissues, src: DipoleSource, f: float,
                       tol=DEFAULT_TOL, l_cap=DEFAULT_L_CAP) -> SshSolution:
    """Peak (on-axis) scalp potential of a radial dipole at frequency ``f``."""
    if f < 0:
        raise DomainError("frequency must be >= 0")
    sc = layer_conductivities(tissues, f)
    return ssh_potential(geom, sc, src.eta(geom), src.p_r, tol, l_cap)


def ssh_spectrum(geom: HeadGeometry, tissues, src: DipoleSource, freqs,
                 tol=DEFAULT_TOL, l_cap=DEFAULT_L_CAP):
    """Evaluate :func:`ssh_peak_potential` over ``freqs``.

    Returns ``(v, l_used)`` arrays.
    """
    freqs = np.asarray(freqs, dtype=float)
    tissues = list(tissues)
    v = np.empty(freqs.shape, dtype=complex)
    l_used = np.empty(freqs.shape, dtype=int)
    for i, f in enumerate(freqs):
        sol = ssh_peak_potential(geom, tissues, src, float(f), tol, l_cap)
        v[i], l_used[i] = sol.v_scalp, sol.l_max_used
    return v, l_used
