import numpy as np
import pytest

from lacusum import GrossErrorModel, NominalFamily, OutlierSpec

from _acceptance_report import LINES as ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fam():
    """Standard design family used throughout: theta0=0, theta1=1, sigma=1."""
    return NominalFamily(theta0=0.0, theta1=1.0, sigma=1.0)


@pytest.fixture(scope="session")
def model01(fam):
    """10% contamination by a wide centered Gaussian."""
    return GrossErrorModel(0.1, fam, OutlierSpec.gaussian_outlier(0.0, 3.0))


@pytest.fixture(scope="session")
def model0(fam):
    """Contamination-free model."""
    return GrossErrorModel(0.0, fam, OutlierSpec.gaussian_outlier(0.0, 3.0))


@pytest.fixture
def rng():
    return np.random.default_rng(42)
