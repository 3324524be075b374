"""Shared fixtures for the compiler, solver and model tests."""

from fractions import Fraction
from pathlib import Path

import pytest

from app.data.dataset import QuantizedDataset, read_dataset
from app.topology.network import NetworkSpec

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run the long annealing acceptance runs",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running annealing acceptance run")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_net():
    """One input, one sign neuron, one output: 19 original bits for one sample."""
    return NetworkSpec(layers=2, hidden=1, inputs=1)


@pytest.fixture
def tiny_dataset():
    return QuantizedDataset(inputs=((1,),), labels=((Fraction(1, 2),),), input_bits=0)


@pytest.fixture
def mnist_net():
    return NetworkSpec(layers=2, hidden=1, inputs=4)


@pytest.fixture
def six_nine_train():
    return read_dataset(FIXTURES / "six_nine_patches.txt")


@pytest.fixture
def fixtures_dir():
    return FIXTURES
