import numpy as np
import pytest

from pathheat.grids import GridPath, TimeGrid


@pytest.fixture(scope="session")
def grid100() -> TimeGrid:
    return TimeGrid(1.0, 100)


@pytest.fixture(scope="session")
def grid64() -> TimeGrid:
    return TimeGrid(1.0, 64)


@pytest.fixture(scope="session")
def sine_path(grid100) -> GridPath:
    return GridPath.from_function(grid100, lambda t: np.sin(2 * np.pi * t))


def make_brownian(grid: TimeGrid, seed: int, dimension: int = 1,
                  start: float = 0.0) -> GridPath:
    rng = np.random.default_rng(seed)
    dw = rng.standard_normal((grid.steps, dimension)) * np.sqrt(grid.dt)
    vals = np.vstack([np.full((1, dimension), start), start + np.cumsum(dw, axis=0)])
    return GridPath(grid, vals)
