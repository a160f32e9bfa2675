import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from peakonlab import build_grid

settings.register_profile(
    "default",
    deadline=None,
    max_examples=30,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid():
    """Default desk-scale grid."""
    return build_grid(40.0, 2000, 3.0)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(40.0, 250, 3.0)


@pytest.fixture(scope="session")
def uniform_grid():
    return build_grid(10.0, 500, 1.0)


def gaussian(g, center=0.0, width=1.0):
    return g.sample(lambda x: np.exp(-(((x - center) / width) ** 2)))


def bump(g, center, width):
    z = (g.nodes - center) / width
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return g.sample(lambda x: out)


# one summary line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
