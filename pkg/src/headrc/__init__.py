"""Dispersive lumped-RC surrogate of a three-shell spherical head.

The package pairs a compact RC ladder (``headrc.circuit``) with the
scalar spherical-harmonics reference solution it is fitted to and validated
against (``headrc.ssh``).
"""

__version__ = "0.1.0"

from .geometry import DipoleSource, HeadGeometry  # noqa: E402
from .params import CircuitPoint, FittedParams  # noqa: E402
from .tissue import AIR, Static, Table, TissueSpec, complex_conductivity  # noqa: E402

__all__ = [
    "AIR", "CircuitPoint", "DipoleSource", "FittedParams", "HeadGeometry", "Static",
    "Table", "TissueSpec", "complex_conductivity", "__version__",
]
