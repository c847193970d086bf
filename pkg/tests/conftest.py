import json
from pathlib import Path

import numpy as np
import pytest

from stefan_control.geometry import GeometryConfig, Transform
from stefan_control.grid import RefGrid

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def geometry():
    return GeometryConfig()


@pytest.fixture(scope="session")
def transform(geometry):
    return Transform(geometry)


@pytest.fixture(scope="session")
def small_grid(geometry):
    return RefGrid.from_geometry(geometry, 40, 40, 80)


@pytest.fixture(scope="session")
def grid(geometry):
    return RefGrid.from_geometry(geometry)


@pytest.fixture(scope="session")
def fitted():
    return json.loads((FIXTURES / "fitted_constants.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def zero_init(grid):
    return np.zeros(grid.n_left + 2), np.zeros(grid.n_right + 2)
