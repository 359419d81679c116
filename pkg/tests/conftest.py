import numpy as np
import pytest

from mantlevis.grid import ShellGrid
from mantlevis.preprocess import add_derived
from mantlevis.synthetic import SyntheticScenario, default_times, generate_synthetic


@pytest.fixture(scope="session")
def small_grid():
    return ShellGrid(n_r=16, n_lat=16, n_lon=32)


@pytest.fixture(scope="session")
def plume_series(small_grid):
    scenario = SyntheticScenario(kind="plume", seed=7)
    series = generate_synthetic(scenario, small_grid, default_times(n_steps=6))
    return [add_derived(v) for v in series]


@pytest.fixture(scope="session")
def rotation_series(small_grid):
    scenario = SyntheticScenario(kind="rigid_rotation", seed=7)
    series = generate_synthetic(scenario, small_grid, default_times(n_steps=6))
    return [add_derived(v) for v in series]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
