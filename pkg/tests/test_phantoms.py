import numpy as np
import pytest

from romres.errors import RomresError
from romres.grids import Grid1D, Grid2D
from romres.phantoms import phantom, phantom_function_1d


def test_values_quadratic():
    rq = phantom_function_1d("rQ")
    assert rq(0.5) == pytest.approx(2.0)
    assert rq(0.0) == pytest.approx(1.0)


def test_values_jumps():
    rj = phantom_function_1d("rJ")
    assert rj(0.4) == 2.0
    assert rj(0.7) == 1.5
    assert rj(0.1) == 1.0


def test_high_contrast_ratio():
    rh = phantom_function_1d("rH")
    assert rh(0.4) / rh(0.1) == pytest.approx(5.0)
    assert rh(0.7) == 3.0


def test_localized_contrast():
    rl = phantom_function_1d("rL")
    assert rl(0.2) == pytest.approx(2.0)
    x = np.linspace(0, 1, 2001)
    vals = rl(x)
    assert vals.max() == pytest.approx(2.0, rel=2e-3)
    assert vals.max() / vals.min() == pytest.approx(2.0, rel=0.03)


def test_sampling_matches_grid():
    g = Grid1D(199)
    f = phantom("rQ", g)
    assert f.values.shape == (199,)
    g2 = Grid2D(nx=90, ny=30)
    f2 = phantom("tilted", g2)
    assert f2.values.shape == (2700,)


def test_2d_contrasts():
    g = Grid2D(nx=90, ny=30)
    rects = phantom("two-rect-corner", g).values
    assert set(np.round(np.unique(rects), 2)) == {0.66, 1.0, 1.5}
    tilted = phantom("tilted", g).values
    assert set(np.unique(tilted)) == {1.0, 2.0}
    side = phantom("two-rect-side", g).values
    assert side.min() == pytest.approx(0.66)
    assert side.max() == pytest.approx(1.5)


def test_unknown_phantom():
    with pytest.raises(RomresError):
        phantom("nope", Grid1D(10))
    with pytest.raises(RomresError):
        phantom("nope", Grid2D(nx=6, ny=4))
