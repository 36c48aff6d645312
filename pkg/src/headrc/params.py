"""Fitted surrogate parameters: gamma_i(psi), alpha(eta) and the impedance scale."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParameterDomainError
from .geometry import HeadGeometry

ABSCISSAE = ("psi12", "psi13", "psi23")
DEFAULT_GAMMA_ABSCISSAE = ("psi12", "psi23", "psi23")

# Evaluation is allowed this fraction of the fitted span outside [lo, hi].
DOMAIN_SLACK = 0.01

FORMAT_VERSION = 1


@dataclass(frozen=True)
class CircuitPoint:
    """Circuit parameters at one geometry/eccentricity."""

    gamma: tuple
    alpha: float
    scale: float
    reference_r_scalp: float

    def __post_init__(self):
        if len(self.gamma) != 3:
            raise ParameterDomainError("need one gamma per layer")
        if not all(g > 0 and np.isfinite(g) for g in self.gamma):
            raise ParameterDomainError(f"gamma must be positive, got {self.gamma}")
        if not abs(self.alpha) < 1:
            raise ParameterDomainError(f"|alpha| must be < 1, got {self.alpha}")
        if not (self.scale > 0 and self.reference_r_scalp > 0):
            raise ParameterDomainError("scale and reference radius must be positive")


def abscissa_value(name: str, geom: HeadGeometry) -> float:
    if name not in ABSCISSAE:
        raise ConfigError(f"unknown abscissa {name!r}, expected one of {ABSCISSAE}")
    return geom.psi(int(name[3]), int(name[4]))


def _polyval(coeffs, x):
    return float(np.polynomial.polynomial.polyval(x, coeffs))


def _guard(x, domain, what):
    lo, hi = domain
    slack = DOMAIN_SLACK * (hi - lo)
    if not (lo - slack <= x <= hi + slack):
        raise ParameterDomainError(
            f"{what}={x:.6g} outside fitted domain [{lo:.6g}, {hi:.6g}]")


@dataclass(frozen=True)
class FittedParams:
    """Polynomial maps (coefficients in ascending degree order)."""

    gamma_coeffs: tuple
    gamma_domains: tuple
    alpha_coeffs: tuple
    alpha_domain: tuple
    global_scale: float
    reference_r_scalp: float
    gamma_abscissae: tuple = DEFAULT_GAMMA_ABSCISSAE
    provenance: dict = field(default_factory=dict, compare=False, hash=False)

    def gamma(self, geom: HeadGeometry):
        out = []
        for i, (coeffs, dom, name) in enumerate(
                zip(self.gamma_coeffs, self.gamma_domains, self.gamma_abscissae), start=1):
            x = abscissa_value(name, geom)
            _guard(x, dom, f"{name} (gamma_{i})")
            g = _polyval(coeffs, x)
            if not g > 0:
                raise ParameterDomainError(f"gamma_{i}({name}={x:.6g}) = {g:.6g} is not positive")
            out.append(g)
        return tuple(out)

    def alpha(self, eta: float) -> float:
        _guard(eta, self.alpha_domain, "eta")
        a = _polyval(self.alpha_coeffs, eta)
        if not abs(a) < 1:
            raise ParameterDomainError(f"alpha({eta:.6g}) = {a:.6g} violates |alpha| < 1")
        return a

    def point(self, geom: HeadGeometry, eta: float) -> CircuitPoint:
        return CircuitPoint(self.gamma(geom), self.alpha(eta), self.global_scale,
                            self.reference_r_scalp)

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "gamma": [
                {"layer": layer, "abscissa": name, "coefficients": list(c), "domain": list(d)}
                for layer, name, c, d in zip(("brain", "skull", "scalp"), self.gamma_abscissae,
                                             self.gamma_coeffs, self.gamma_domains)
            ],
            "alpha": {"abscissa": "eta", "coefficients": list(self.alpha_coeffs),
                      "domain": list(self.alpha_domain)},
            "global_scale": self.global_scale,
            "reference_r_scalp_m": self.reference_r_scalp,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc):
        try:
            gam = doc["gamma"]
            if len(gam) != 3:
                raise ConfigError("params: expected three gamma entries")
            return cls(
                gamma_coeffs=tuple(tuple(float(c) for c in g["coefficients"]) for g in gam),
                gamma_domains=tuple(tuple(float(v) for v in g["domain"]) for g in gam),
                gamma_abscissae=tuple(str(g["abscissa"]) for g in gam),
                alpha_coeffs=tuple(float(c) for c in doc["alpha"]["coefficients"]),
                alpha_domain=tuple(float(v) for v in doc["alpha"]["domain"]),
                global_scale=float(doc["global_scale"]),
                reference_r_scalp=float(doc["reference_r_scalp_m"]),
                provenance=doc.get("provenance", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed params document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"params file is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)
