"""Frequency-dependent tissue conductivity and permittivity.

A tissue is either ``Static`` (constant sigma and relative permittivity) or a
``Table`` of measured values that is interpolated piecewise-linearly in
``log10(f)`` and clamped at its endpoints.
"""

from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DomainError, TableParseError, TableRangeWarning

EPS0 = 8.8541878128e-12  # F/m

TABLE_HEADER = ("frequency_hz", "sigma_s_per_m", "eps_rel")

LAYER_NAMES = ("brain", "skull", "scalp")


@dataclass(frozen=True)
class Static:
    sigma: float
    eps_rel: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and math.isfinite(self.eps_rel)):
            raise DomainError("static tissue values must be finite")
        if self.sigma < 0:
            raise DomainError(f"conductivity must be >= 0, got {self.sigma}")
        if self.eps_rel < 1:
            raise DomainError(f"relative permittivity must be >= 1, got {self.eps_rel}")

    def evaluate(self, f):
        f = np.asarray(f, dtype=float)
        return (np.full(f.shape, self.sigma), np.full(f.shape, self.eps_rel),
                np.zeros(f.shape, dtype=bool))


@dataclass(frozen=True)
class Table:
    """Tabulated dispersion, rows sorted by strictly increasing frequency."""

    frequency: tuple
    sigma: tuple
    eps_rel: tuple

    def __post_init__(self):
        n = len(self.frequency)
        if n < 1 or len(self.sigma) != n or len(self.eps_rel) != n:
            raise DomainError("table needs >= 1 row and equal-length columns")
        arr = np.array([self.frequency, self.sigma, self.eps_rel], dtype=float)
        if not np.all(np.isfinite(arr)):
            raise DomainError("table values must be finite")
        if np.any(np.diff(arr[0]) <= 0):
            raise DomainError("table frequencies must be strictly increasing")
        if arr[0, 0] <= 0:
            raise DomainError("table frequencies must be positive")
        if np.any(arr[1] < 0):
            raise DomainError("table conductivities must be >= 0")
        if np.any(arr[2] < 1):
            raise DomainError("table relative permittivities must be >= 1")

    @classmethod
    def from_rows(cls, rows):
        rows = [tuple(float(v) for v in r) for r in rows]
        return cls(tuple(r[0] for r in rows), tuple(r[1] for r in rows),
                   tuple(r[2] for r in rows))

    @property
    def f_min(self) -> float:
        return self.frequency[0]

    @property
    def f_max(self) -> float:
        return self.frequency[-1]

    def evaluate(self, f):
        f = np.asarray(f, dtype=float)
        freqs = np.asarray(self.frequency)
        clamped = (f < freqs[0]) | (f > freqs[-1])
        if freqs.size == 1:
            return (np.full(f.shape, self.sigma[0]), np.full(f.shape, self.eps_rel[0]),
                    clamped)
        logf = np.log10(np.maximum(f, freqs[0]))
        logx = np.log10(freqs)
        sigma = np.interp(logf, logx, self.sigma)
        eps = np.interp(logf, logx, self.eps_rel)
        return sigma, eps, clamped

    def rows(self):
        return list(zip(self.frequency, self.sigma, self.eps_rel))


Dispersion = Union[Static, Table]


@dataclass(frozen=True)
class TissueSpec:
    name: str
    dispersion: Dispersion

    def __post_init__(self):
        if self.name == "air" and self.dispersion != Static(0.0, 1.0):
            raise DomainError("air must be Static(sigma=0, eps_rel=1)")

    @property
    def is_static(self) -> bool:
        return isinstance(self.dispersion, Static)

    def properties(self, f, warn=True):
        """Return ``(sigma, eps_rel)`` at frequency ``f`` (scalar or array)."""
        f_arr = np.asarray(f, dtype=float)
        if np.any(f_arr < 0) or np.any(np.isnan(f_arr)):
            raise DomainError("frequency must be >= 0")
        sigma, eps, clamped = self.dispersion.evaluate(f_arr)
        if warn and np.any(clamped):
            warnings.warn(
                f"tissue {self.name!r}: frequency outside table range "
                f"[{self.dispersion.f_min:g}, {self.dispersion.f_max:g}] Hz, clamped",
                TableRangeWarning, stacklevel=3)
        if f_arr.ndim == 0:
            return float(sigma), float(eps)
        return sigma, eps

    def digest(self) -> str:
        """Stable SHA-256 of the tissue's numerical content."""
        d = self.dispersion
        if isinstance(d, Static):
            text = f"static,{d.sigma!r},{d.eps_rel!r}"
        else:
            text = "table;" + ";".join(f"{a!r},{b!r},{c!r}" for a, b, c in d.rows())
        return hashlib.sha256(f"{self.name}|{text}".encode()).hexdigest()


AIR = TissueSpec("air", Static(0.0, 1.0))


def complex_conductivity(tissue: TissueSpec, f):
    """Complex conductivity ``sigma(f) + j*2*pi*f*eps0*eps_rel(f)`` in S/m.

    Accepts a scalar or array frequency.  Table lookups outside the tabulated
    band are clamped to the nearest row and reported with a
    :class:`~headrc.errors.TableRangeWarning`.
    """
    sigma, eps = tissue.properties(f)
    omega = 2.0 * np.pi * np.asarray(f, dtype=float)
    value = sigma + 1j * omega * EPS0 * eps
    if np.ndim(value) == 0:
        return complex(value)
    return value


def read_table_csv(path) -> Table:
    """Parse a ``frequency_hz,sigma_s_per_m,eps_rel`` CSV file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TableParseError(path, 0, f"cannot read file: {exc.strerror}") from exc
    return parse_table_text(text, path)


def parse_table_text(text: str, source="<table>") -> Table:
    reader = csv.reader(text.splitlines())
    rows = []
    header_seen = False
    for lineno, fields in enumerate(reader, start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        fields = [f.strip() for f in fields]
        if not header_seen:
            if tuple(fields) != TABLE_HEADER:
                raise TableParseError(source, lineno,
                                      f"expected header {','.join(TABLE_HEADER)!r}")
            header_seen = True
            continue
        if len(fields) != 3:
            raise TableParseError(source, lineno, f"expected 3 fields, got {len(fields)}")
        try:
            row = tuple(float(v) for v in fields)
        except ValueError:
            raise TableParseError(source, lineno, f"non-numeric value in {fields!r}") from None
        if not all(math.isfinite(v) for v in row):
            raise TableParseError(source, lineno, "non-finite value")
        if row[0] <= 0:
            raise TableParseError(source, lineno, "frequency must be positive")
        if rows and row[0] <= rows[-1][0]:
            raise TableParseError(source, lineno, "frequencies must be strictly increasing")
        if row[1] < 0:
            raise TableParseError(source, lineno, "conductivity must be >= 0")
        if row[2] < 1:
            raise TableParseError(source, lineno, "relative permittivity must be >= 1")
        rows.append(row)
    if not header_seen:
        raise TableParseError(source, 1, "empty table")
    if not rows:
        raise TableParseError(source, 2, "table has no data rows")
    return Table.from_rows(rows)


def write_table_csv(table: Table) -> str:
    lines = [",".join(TABLE_HEADER)]
    lines += [f"{f:.17g},{s:.17g},{e:.17g}" for f, s, e in table.rows()]
    return "\n".join(lines) + "\n"


def synthetic_tissue(layer: str) -> TissueSpec:
    """Bundled demo dispersion for ``brain``, ``skull`` or ``scalp``.

    These tables are SYNTHETIC: smooth power laws with decreasing relative
    permittivity and mildly increasing conductivity over 10 Hz - 50 kHz.  They
    are not measured tissue data.
    """
    if layer not in LAYER_NAMES:
        raise DomainError(f"no bundled table for layer {layer!r}")
    text = resources.files("headrc.data").joinpath(f"synthetic_{layer}.csv").read_text("utf-8")
    return TissueSpec(layer, parse_table_text(text, f"synthetic_{layer}.csv"))


def synthetic_tissues():
    return tuple(synthetic_tissue(name) for name in LAYER_NAMES)
