import numpy as np
import pytest

from fracsphere.fields import PowerSpectrum

# lines recorded by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture
def spec20():
    return PowerSpectrum.parametric(3.0, 1.0, lmax=20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
