"""Three-shell head geometry and radial dipole source."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# Standard head: brain radius 7.91 cm, skull 5.9 mm, scalp 7 mm.
R_BRAIN_STD = 0.0791
T_SKULL_STD = 0.0059
T_SCALP_STD = 0.0070


@dataclass(frozen=True)
class HeadGeometry:
    """Concentric shells: brain radius ``r1``, outer skull ``r2``, outer scalp ``r3`` (m)."""

    r1: float
    r2: float
    r3: float

    def __post_init__(self):
        if not all(math.isfinite(r) for r in (self.r1, self.r2, self.r3)):
            raise DomainError("radii must be finite")
        if not 0 < self.r1 < self.r2 < self.r3:
            raise DomainError(f"need 0 < r1 < r2 < r3, got {self.r1}, {self.r2}, {self.r3}")

    @classmethod
    def from_thicknesses(cls, r_brain, t_skull, t_scalp):
        return cls(r_brain, r_brain + t_skull, r_brain + t_skull + t_scalp)

    @classmethod
    def standard(cls):
        return cls.from_thicknesses(R_BRAIN_STD, T_SKULL_STD, T_SCALP_STD)

    @property
    def t_skull(self) -> float:
        return self.r2 - self.r1

    @property
    def t_scalp(self) -> float:
        return self.r3 - self.r2

    def radius(self, i: int) -> float:
        return (self.r1, self.r2, self.r3)[i - 1]

    def psi(self, i: int, j: int) -> float:
        """Radius ratio r_i / r_j (1-based shell indices)."""
        return self.radius(i) / self.radius(j)

    def with_skull_thickness(self, t_skull):
        """Same brain and scalp radii, different skull thickness."""
        return HeadGeometry(self.r1, self.r1 + t_skull, self.r3)


@dataclass(frozen=True)
class DipoleSource:
    """Radial current dipole of moment ``p_r`` (A m) at radius ``r_dip`` (m).

    ``d`` is the effective dipole length used to turn the moment into a
    current source, ``I = p_r / d``.
    """

    p_r: float
    d: float
    r_dip: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.p_r, self.d, self.r_dip)):
            raise DomainError("dipole fields must be finite")
        if self.d <= 0:
            raise DomainError("effective dipole length must be > 0")
        if self.r_dip < 0:
            raise DomainError("dipole radius must be >= 0")

    @classmethod
    def at_eccentricity(cls, geom: HeadGeometry, eta: float, p_r=15e-9, d=1e-3):
        return cls(p_r, d, eta * geom.r1)

    @property
    def current(self) -> float:
        return self.p_r / self.d

    def eta(self, geom: HeadGeometry) -> float:
        e = self.r_dip / geom.r1
        if not 0 <= e < 1:
            raise DomainError(f"dipole must lie inside the brain, eta={e}")
        return e
