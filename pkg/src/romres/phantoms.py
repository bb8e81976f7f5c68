"""Built-in test resistivities for the experiment suite."""

from __future__ import annotations

import numpy as np

from .errors import RomresError
from .grids import Grid1D, Grid2D, ResistivityField

__all__ = ["phantom_function_1d", "phantom", "PHANTOMS_1D", "PHANTOMS_2D"]


def _r_quadratic(x):
    return 2.0 - 4.0 * (x - 0.5) ** 2


def _r_localized(x):
    return 0.8 * np.exp(-100.0 * (x - 0.2) ** 2) + x + 1.0


def _r_jumps(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.2, 1.0, np.where(x <= 0.6, 2.0, 1.5))


def _r_high(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.2, 1.0, np.where(x <= 0.6, 5.0, 3.0))


PHANTOMS_1D = {
    "rQ": _r_quadratic,   # smooth parabolic bump, contrast 2
    "rL": _r_localized,   # Gaussian bump on a linear ramp, contrast 2
    "rJ": _r_jumps,       # piecewise constant 1 / 2 / 1.5
    "rH": _r_high,        # piecewise constant 1 / 5 / 3, high contrast
}


def _in_rotated_box(xc, yc, cx, cy, half_len, half_wid, angle_deg):
    a = np.deg2rad(angle_deg)
    dx, dy = xc - cx, yc - cy
    u = dx * np.cos(a) + dy * np.sin(a)
    v = -dx * np.sin(a) + dy * np.cos(a)
    return (np.abs(u) <= half_len) & (np.abs(v) <= half_wid)


def _corner_boxes(xc, yc):
    r = np.ones_like(xc)
    r[(xc >= 1.1) & (xc <= 1.5) & (yc >= 0.20) & (yc <= 0.45)] = 1.5
    r[(xc > 1.5) & (xc <= 1.9) & (yc > 0.45) & (yc <= 0.70)] = 0.66
    return r


def _side_boxes(xc, yc):
    r = np.ones_like(xc)
    r[(xc >= 1.1) & (xc <= 1.5) & (yc >= 0.2) & (yc <= 0.5)] = 1.5
    r[(xc > 1.5) & (xc <= 1.9) & (yc >= 0.2) & (yc <= 0.5)] = 0.66
    return r


def _tilted_box(xc, yc):
    r = np.ones_like(xc)
    r[_in_rotated_box(xc, yc, 1.5, 0.45, 0.40, 0.12, 25.0)] = 2.0
    return r


PHANTOMS_2D = {
    "two-rect-corner": _corner_boxes,  # contrasts 1.5 / 0.66, corner-touching
    "two-rect-side": _side_boxes,      # contrasts 1.5 / 0.66, side-touching
    "tilted": _tilted_box,             # tilted inclusion, contrast 2
}


def phantom_function_1d(name: str):
    try:
        return PHANTOMS_1D[name]
    except KeyError:
        raise RomresError(f"unknown 1D phantom {name!r}") from None


def phantom(name: str, grid: Grid1D | Grid2D) -> ResistivityField:
    """Sample a named phantom on a grid (edge midpoints / cell centers)."""
    if isinstance(grid, Grid1D):
        fn = phantom_function_1d(name)
        return ResistivityField(fn(grid.edge_midpoints), grid)
    if isinstance(grid, Grid2D):
        try:
            fn = PHANTOMS_2D[name]
        except KeyError:
            raise RomresError(f"unknown 2D phantom {name!r}") from None
        xc, yc = grid.cell_centers()
        return ResistivityField(fn(xc, yc), grid)
    raise RomresError("unsupported grid type")
