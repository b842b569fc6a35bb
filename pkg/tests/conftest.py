import pytest

from hdrot.config import SimulationConfig
from hdrot.levelcat import default_catalog


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def cfg():
    return SimulationConfig()
