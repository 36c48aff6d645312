import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from headrc.errors import DomainError, TableParseError, TableRangeWarning
from headrc.tissue import (AIR, EPS0, Static, Table, TissueSpec, complex_conductivity,
                           parse_table_text, read_table_csv, synthetic_tissue, write_table_csv)

TWO_ROW = Table.from_rows([(10, 0.1, 1e6), (50e3, 0.2, 1e4)])


def test_static_at_dc_is_real():
    assert complex_conductivity(TissueSpec("brain", Static(0.33, 1.0)), 0.0) == 0.33 + 0j


def test_air_at_50khz_is_vacuum_displacement():
    v = complex_conductivity(AIR, 50e3)
    assert v.real == 0.0
    # direct arithmetic, independent of the implementation's expression order
    assert v.imag == pytest.approx(2 * math.pi * 5e4 * 8.8541878128e-12, rel=1e-15)
    assert v.imag == pytest.approx(2.7812e-6, rel=1e-3)


def test_table_endpoint_exact():
    v = complex_conductivity(TissueSpec("brain", TWO_ROW), 10.0)
    assert v == pytest.approx(0.1 + 1j * 2 * math.pi * 10 * EPS0 * 1e6, rel=1e-15)


def test_log_linear_midpoint():
    # geometric mean of the end frequencies sits halfway in log10 f
    s, e = TissueSpec("brain", TWO_ROW).properties(math.sqrt(10 * 50e3))
    assert s == pytest.approx(0.15, rel=1e-12)
    assert e == pytest.approx(0.5 * (1e6 + 1e4), rel=1e-12)


@given(sigma=st.floats(0, 10), eps=st.floats(1, 1e7),
       f=st.lists(st.floats(1e-3, 1e6), min_size=3, max_size=8))
def test_static_real_constant_imag_linear(sigma, eps, f):
    t = TissueSpec("brain", Static(sigma, eps))
    v = complex_conductivity(t, np.array(f))
    assert np.all(v.real == sigma)
    slope = 2 * math.pi * EPS0 * eps
    np.testing.assert_allclose(v.imag, slope * np.array(f), rtol=1e-12)


@st.composite
def tables(draw):
    n = draw(st.integers(1, 8))
    logf = sorted(draw(st.lists(st.floats(0, 6), min_size=n, max_size=n, unique=True)))
    f = [10 ** x for x in logf]
    if any(b <= a for a, b in zip(f, f[1:])):
        f = [10.0 ** k for k in range(n)]
    s = draw(st.lists(st.floats(0, 5), min_size=n, max_size=n))
    e = draw(st.lists(st.floats(1, 1e7), min_size=n, max_size=n))
    return Table(tuple(f), tuple(s), tuple(e))


@given(tables())
def test_interpolation_hits_rows(table):
    t = TissueSpec("skull", table)
    for f, s, e in table.rows():
        gs, ge = t.properties(f)
        assert gs == pytest.approx(s, rel=1e-12, abs=0)
        assert ge == pytest.approx(e, rel=1e-12)


def test_pure_function(tissues):
    f = np.linspace(10, 5e4, 75)
    a = complex_conductivity(tissues[1], f)
    b = complex_conductivity(tissues[1], f)
    assert a.tobytes() == b.tobytes()


def test_clamped_outside_table_with_warning():
    t = TissueSpec("scalp", TWO_ROW)
    with pytest.warns(TableRangeWarning):
        lo = t.properties(1.0)
    with pytest.warns(TableRangeWarning):
        hi = t.properties(1e6)
    assert lo == (0.1, 1e6)
    assert hi == (0.2, 1e4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        t.properties(1000.0)


def test_negative_frequency_rejected():
    with pytest.raises(DomainError):
        complex_conductivity(AIR, -1.0)


@pytest.mark.parametrize("bad", [(-0.1, 1.0), (0.1, 0.5), (math.nan, 1.0), (0.1, math.inf)])
def test_static_domain(bad):
    with pytest.raises(DomainError):
        Static(*bad)


def test_air_is_fixed():
    assert AIR.dispersion == Static(0.0, 1.0)
    with pytest.raises(DomainError):
        TissueSpec("air", Static(0.1, 1.0))


@pytest.mark.parametrize("rows", [
    [(10, 0.1, 2), (10, 0.2, 2)],
    [(10, -0.1, 2)],
    [(10, 0.1, 0.5)],
    [(0, 0.1, 2)],
    [],
])
def test_table_invariants(rows):
    with pytest.raises(DomainError):
        Table.from_rows(rows)


@pytest.mark.parametrize("text,line", [
    ("freq,sigma,eps\n10,0.1,2\n", 1),
    ("frequency_hz,sigma_s_per_m,eps_rel\n10,0.1,2\n20,abc,2\n", 3),
    ("frequency_hz,sigma_s_per_m,eps_rel\n10,0.1,2\n5,0.1,2\n", 3),
    ("frequency_hz,sigma_s_per_m,eps_rel\n10,0.1\n", 2),
    ("frequency_hz,sigma_s_per_m,eps_rel\n10,0.1,0.2\n", 2),
    ("frequency_hz,sigma_s_per_m,eps_rel\n10,nan,2\n", 2),
    ("frequency_hz,sigma_s_per_m,eps_rel\n", 2),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(TableParseError) as info:
        parse_table_text(text, "t.csv")
    assert info.value.line == line
    assert str(info.value).startswith(f"t.csv:{line}:")


def test_csv_round_trip(tmp_path):
    table = synthetic_tissue("skull").dispersion
    p = tmp_path / "skull.csv"
    p.write_text(write_table_csv(table))
    assert read_table_csv(p) == table


def test_missing_file_is_parse_error(tmp_path):
    with pytest.raises(TableParseError):
        read_table_csv(tmp_path / "nope.csv")


@pytest.mark.parametrize("layer", ["brain", "skull", "scalp"])
def test_synthetic_tables_are_monotone(layer):
    d = synthetic_tissue(layer).dispersion
    assert d.f_min == 10 and d.f_max == 50e3
    assert np.all(np.diff(d.sigma) > 0)
    assert np.all(np.diff(d.eps_rel) < 0)


def test_digest_is_content_based():
    a = TissueSpec("brain", Static(0.33, 1.0))
    assert a.digest() == TissueSpec("brain", Static(0.33, 1.0)).digest()
    assert a.digest() != TissueSpec("brain", Static(0.33, 2.0)).digest()
