"""
Shared pytest configuration.

Long training runs are marked `slow` and skipped unless --run-slow is given:
    pytest tests/ --run-slow
"""

import numpy as np
import pytest

from wavepinn.schemas import NetworkConfig
from wavepinn.services.fourier_net import init_network


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run slow training tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training test (needs --run-slow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_net(input_dim=3, widths=(8, 6), scales=(1.0, 2.0), first_layer="fourier", seed=0):
    """Small FFM network for fast tests."""
    config = NetworkConfig(
        input_dim=input_dim,
        hidden_widths=list(widths),
        scales=list(scales),
        first_layer=first_layer,
        init_seed=seed,
    )
    return init_network(config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_net():
    return make_net()
