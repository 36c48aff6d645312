import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from headrc.fitting import default_fit_config, fit_model  # noqa: E402
from headrc.geometry import HeadGeometry  # noqa: E402
from headrc.tissue import Static, TissueSpec, synthetic_tissues  # noqa: E402

# sigma of the bundled synthetic tables at 1 kHz, used as the static fit tissues
FIT_SIGMA = {"brain": 0.125893, "skull": 0.00516669, "scalp": 0.240453}

_ACCEPTANCE = []


def record_acceptance(number, ok, detail):
    _ACCEPTANCE.append((number, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def geom():
    return HeadGeometry.standard()


@pytest.fixture(scope="session")
def tissues():
    return synthetic_tissues()


@pytest.fixture(scope="session")
def static_tissues():
    return tuple(TissueSpec(n, Static(s, 1.0)) for n, s in FIT_SIGMA.items())


@pytest.fixture(scope="session")
def fit_config(static_tissues):
    return default_fit_config(static_tissues)


@pytest.fixture(scope="session")
def fit_report(fit_config):
    return fit_model(fit_config)


@pytest.fixture(scope="session")
def params(fit_report):
    return fit_report.params
