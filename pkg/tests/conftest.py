import math

import pytest

from moser_trudinger import functional, spectral
from moser_trudinger.mesh import build_masked_grid, build_radial_grid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def disk128():
    return build_masked_grid("disk:1", 1 / 128)


@pytest.fixture(scope="session")
def eig128(disk128):
    return spectral.first_eigenpair(disk128)


@pytest.fixture(scope="session")
def candidates128(disk128, eig128):
    """Maximizers on the h = 1/128 disk keyed by alpha / lambda1."""
    start = functional.normalize_h1(eig128.v)
    return {f: functional.maximize(disk128, f * eig128.lambda1, start) for f in (0.0, 0.5)}


@pytest.fixture(scope="session")
def disk32():
    return build_masked_grid("disk:1", 1 / 32)


@pytest.fixture(scope="session")
def eig32(disk32):
    return spectral.first_eigenpair(disk32)


@pytest.fixture(scope="session")
def radial_disk():
    return build_radial_grid(1.0, 1025)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
