import pytest

from rff.core import EngineConfig
from rff.game24 import Game24Adapter
from rff.mathdag import MathDagAdapter


@pytest.fixture(scope="session")
def g24():
    return Game24Adapter()


@pytest.fixture(scope="session")
def dag():
    return MathDagAdapter()


@pytest.fixture
def wide():
    """The acceptance configuration: L = 20, n = 13."""
    return EngineConfig(max_steps=20, width=13)
