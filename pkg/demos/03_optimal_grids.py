"""Spectrally matched grids and their dependence on the interpolation nodes.

Prints the staggered primary/dual nodes of the reference medium for three
node families.  The geometric ladder gives interlaced nodes spread over the
interval; nodes that grow too fast cluster everything at the measurement
point, which is what ruins the Jacobian conditioning.
"""

import numpy as np

from romres import check_interlacing, reference_grid

for label in ("pade0", "zolotarev", "fast"):
    for m in (5, 10):
        grid = reference_grid(m, label, n_fine=1999)
        ok, idx = check_interlacing(grid)
        print(f"{label:10s} m={m:2d}  interlaced={ok}")
        print(f"   primary {np.round(grid.x, 4)}")
        print(f"   dual    {np.round(grid.x_hat, 4)}")
h = 1.0 / 2000
fast = reference_grid(5, "fast", n_fine=1999)
print(f"\nfast family clusters at the boundary: first steps "
      f"{fast.x_hat[0]:.2e}, {fast.x[0]:.2e} vs fine step h = {h:.2e}")
