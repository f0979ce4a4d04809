import numpy as np
import pytest

from vlcpos import ScenarioConfig, build_scenario


@pytest.fixture(scope="session")
def scenario():
    """Default scene: 5x4x3 m room, 4 corner VAPs x 4 LEDs."""
    return build_scenario(ScenarioConfig())


@pytest.fixture()
def rng():
    return np.random.default_rng(20240901)
