import numpy as np
import pytest

from romres.grids import (Grid1D, ResistivityField, assemble_operator,
                          build_difference_1d, source_vector)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_system(rng):
    """Assembled 1D system with a random positive resistivity, N = 40."""
    grid = Grid1D(40)
    r = 1.0 + 0.5 * rng.random(40)
    field = ResistivityField(r, grid)
    op = assemble_operator(field, build_difference_1d(grid))
    b = source_vector(grid).b
    return grid, field, op, b
