import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ddjump import DensityFamily, load_network

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def example1():
    return load_network("example1")


@pytest.fixture(scope="session")
def tk():
    return load_network("togashi-kaneko")


@pytest.fixture(scope="session")
def bistable():
    return load_network("bistable")


@pytest.fixture(scope="session")
def e1_32(example1):
    return DensityFamily(example1, 32)


@pytest.fixture(scope="session")
def tk_32(tk):
    return DensityFamily(tk, 32)


def exact_x(t, x0):
    """Fluid solution of x' = 2 - 3x."""
    return 2 / 3 + (x0 - 2 / 3) * np.exp(-3 * t)


_CRITERIA = []


@pytest.fixture
def criterion(capsys):
    """Record one PASS/FAIL line per acceptance criterion; echoed live and in the terminal summary."""
    def report(number: int, title: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})"
        _CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
