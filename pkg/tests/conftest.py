import numpy as np
import pytest

from porousconv import build_grid

ACCEPTANCE = []


@pytest.fixture
def unit_grid():
    return build_grid(1.0, 1.0, 16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
