import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iktflow import AnalyticFlow, FluidParams

settings.register_profile("iktflow", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("iktflow")


@pytest.fixture
def params():
    return FluidParams.from_nu(0.01, rho0=1.0, P0=1.5)


@pytest.fixture
def tg2d(params):
    return AnalyticFlow("taylor_green_2d", params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def random_points(rng, n, lo=0.0, hi=2 * np.pi, flat=True):
    r = lo + (hi - lo) * rng.random((n, 3))
    if flat:
        r[:, 2] = 0.0
    return r


# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def record_verdict(number: int, title: str, ok: bool, detail: str) -> str:
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
