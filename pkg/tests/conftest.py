import numpy as np
import pytest

from oscbench import CellSet, Cube, Grid, GridFunction


@pytest.fixture
def grid1d():
    # [-4, 4], h = 2^-6, 512 cells
    return Grid(1, 2, 6)


@pytest.fixture
def grid2d():
    # [-2, 2]^2, h = 2^-4, 64x64 cells
    return Grid(2, 1, 4)


def random_function(grid, rng, dyadic=False):
    if dyadic:
        vals = rng.integers(-64, 65, size=grid.shape) / 16.0
    else:
        vals = rng.normal(size=grid.shape)
    return GridFunction(grid, vals)


def random_cube(grid, rng, min_cells=4):
    K = grid.cells_per_axis
    side = int(rng.integers(min_cells, K // 2))
    lo = tuple(int(rng.integers(0, K - side)) for _ in range(grid.n))
    return Cube(grid, lo, side)


def random_cellset(grid, rng, fill=0.5):
    return CellSet(grid, rng.random(grid.shape) < fill)
