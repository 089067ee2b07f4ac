"""Test configuration and fixtures"""

import numpy as np
import pytest

from locc_bounds.services.ensembles import ensemble_service


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run table-scale reproductions")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: table-scale reproduction, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """Seeded generator"""
    return np.random.default_rng(1234)


@pytest.fixture
def trine():
    """Double trine ensemble"""
    return ensemble_service.double_trine()


@pytest.fixture
def ququart():
    """Ququart-ququart ensemble"""
    return ensemble_service.ququart_ensemble()


@pytest.fixture
def bell_family():
    """Builder for the Bell-basis family at δ=π/4, ξ=π/2"""
    def build(tau: float):
        return ensemble_service.bell_basis_family(np.pi / 4, tau, np.pi / 2)
    return build


@pytest.fixture
def random_hermitian(rng):
    """Builder for random Hermitian arrays"""
    def build(n: int) -> np.ndarray:
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return (x + x.conj().T) / 2
    return build
