import numpy as np
import pytest

from gasresponse import InteractionPotential, MomentumDistribution


@pytest.fixture(scope="session")
def fermi_hot():
    return MomentumDistribution.fermi_dirac(100.0, 1.0, 2)


@pytest.fixture(scope="session")
def boltzmann_unit():
    return MomentumDistribution.boltzmann(1.0, 0.0, 2)


@pytest.fixture(scope="session")
def gaussian_pot():
    return InteractionPotential.gaussian(1.0, 1.0, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the terminal summary repeats them all."""

    def record(label, ok, detail=""):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
