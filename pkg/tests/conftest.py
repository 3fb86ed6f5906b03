import numpy as np
import pytest

from shearmix.fourier import Grid
from shearmix.profiles import degenerate2, sinusoidal, zero_profile

# filled by test_acceptance; echoed as a table at the end of the session
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def sin_profile():
    return sinusoidal()


@pytest.fixture
def deg2_profile():
    return degenerate2()


@pytest.fixture
def zero():
    return zero_profile()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid128():
    return Grid(128)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
