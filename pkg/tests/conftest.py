import numpy as np
import pytest

from kirchhoff_qp.diophantine import FrequencyData
from kirchhoff_qp.kirchhoff import ProblemData, forcing_preset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def fd_sqrt2():
    return FrequencyData.preset("sqrt2")


@pytest.fixture(scope="session")
def baseline(fd_sqrt2):
    """nu = d = 1, omega_bar = sqrt 2, g = cos(phi) cos(x), eps = 1e-3."""
    return ProblemData(fd_sqrt2, 1e-3, forcing_preset("cos_phi_cos_x", 1, 1))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance runs")
