"""Spectrally matched grids of the constant reference medium.

The continued-fraction coefficients of the reference medium (r = 1) are
step sizes of a staggered grid on [0, 1]: primary nodes are partial sums
of kappa, dual nodes partial sums of kappahat.  These grids localize the
sensitivity rows of the Jacobian and provide the normalization for the
ratio reconstruction that visualizes how close the nonlinear map is to
the identity.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cfrac import ContinuedFraction
from .errors import AdmissibilityError
from .grids import Grid1D, ResistivityField
from .krylov import preconditioner_R
from .ratfit import NodeFamily, node_family

__all__ = [
    "OptimalGrid",
    "RatioReconstruction",
    "reference_grid",
    "check_interlacing",
    "ratio_reconstruction",
]

_memo: dict[str, "OptimalGrid"] = {}


@dataclass(frozen=True)
class OptimalGrid:
    """Primary/dual staggered nodes with their source coefficients."""

    x: np.ndarray
    x_hat: np.ndarray
    kappa0: np.ndarray
    kappa_hat0: np.ndarray
    family_label: str
    n_fine: int

    @property
    def m(self) -> int:
        return self.x.size

    def to_csv(self) -> str:
        lines = ["node_primary,node_dual,kappa0,kappa_hat0"]
        for j in range(self.m):
            lines.append(f"{self.x[j]!r},{self.x_hat[j]!r},"
                         f"{self.kappa0[j]!r},{self.kappa_hat0[j]!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RatioReconstruction:
    """Resistivity ratios at the grid nodes.

    zeta (at primary nodes) tends to overestimate the resistivity and
    zeta_hat (at dual nodes) to underestimate it; their geometric average
    zeta_tilde tracks it closely.
    """

    zeta: np.ndarray
    zeta_hat: np.ndarray
    zeta_tilde: np.ndarray
    grid: OptimalGrid

    def to_csv(self) -> str:
        lines = ["node_primary,node_dual,zeta,zeta_hat,zeta_tilde"]
        for j in range(self.grid.m):
            lines.append(f"{self.grid.x[j]!r},{self.grid.x_hat[j]!r},"
                         f"{self.zeta[j]!r},{self.zeta_hat[j]!r},{self.zeta_tilde[j]!r}")
        return "\n".join(lines) + "\n"


def _cache_key(family: NodeFamily, n_fine: int) -> str:
    payload = json.dumps({
        "label": family.label,
        "nodes": [round(float(s), 12) for s in family.nodes],
        "mult": [int(q) for q in family.multiplicities],
        "N": n_fine,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def reference_grid(m: int, family: NodeFamily | str = "zolotarev", n_fine: int = 1999,
                   cache_dir: str | Path | None = None) -> OptimalGrid:
    """Staggered grid from the constant unit medium.

    Results are memoized per (family, N); with ``cache_dir`` they are also
    persisted as JSON keyed by a content hash of the configuration.
    """
    if isinstance(family, str):
        family = node_family(family, m)
    if family.m != m:
        raise AdmissibilityError(f"family size {family.m} != m = {m}")
    key = _cache_key(family, n_fine)
    if key in _memo:
        return _memo[key]
    path = Path(cache_dir) / f"refgrid_{key}.json" if cache_dir else None
    if path is not None and path.exists():
        d = json.loads(path.read_text())
        grid = OptimalGrid(x=np.array(d["x"]), x_hat=np.array(d["x_hat"]),
                           kappa0=np.array(d["kappa0"]),
                           kappa_hat0=np.array(d["kappa_hat0"]),
                           family_label=family.label, n_fine=n_fine)
        _memo[key] = grid
        return grid

    field = ResistivityField(np.ones(n_fine), Grid1D(n_fine))
    vec, ctx = preconditioner_R(field, family, return_context=True)
    k0 = ctx.cf.kappa
    kh0 = ctx.cf.kappa_hat
    grid = OptimalGrid(x=np.cumsum(k0), x_hat=np.cumsum(kh0), kappa0=k0,
                       kappa_hat0=kh0, family_label=family.label, n_fine=n_fine)
    _memo[key] = grid
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({
            "x": list(map(float, grid.x)), "x_hat": list(map(float, grid.x_hat)),
            "kappa0": list(map(float, k0)), "kappa_hat0": list(map(float, kh0)),
        }, indent=2, sort_keys=True))
    return grid


def check_interlacing(grid: OptimalGrid) -> tuple[bool, int]:
    """Verify 0 < xhat_1 < x_1 < xhat_2 < ... < x_m <= 1.

    Returns (ok, first violation index into the interleaved sequence; -1
    when the ordering holds).
    """
    seq = np.empty(2 * grid.m)
    seq[0::2] = grid.x_hat
    seq[1::2] = grid.x
    if seq[0] <= 0:
        return False, 0
    diffs = np.diff(seq)
    bad = np.flatnonzero(diffs <= 0)
    if bad.size:
        return False, int(bad[0] + 1)
    if grid.x[-1] > 1.0 + 1e-6:
        return False, 2 * grid.m - 1
    return True, -1


def ratio_reconstruction(cf: ContinuedFraction, grid: OptimalGrid) -> RatioReconstruction:
    """Node-wise resistivity estimates from coefficient ratios.

    zeta_j = (kappa0_j / kappa_j)^2, zetahat_j = (kappahat_j / kappahat0_j)^2
    and their geometric average.
    """
    if cf.m != grid.m:
        raise AdmissibilityError("model size does not match the reference grid")
    zeta = (grid.kappa0 / cf.kappa) ** 2
    zeta_hat = (cf.kappa_hat / grid.kappa_hat0) ** 2
    return RatioReconstruction(zeta=zeta, zeta_hat=zeta_hat,
                               zeta_tilde=np.sqrt(zeta * zeta_hat), grid=grid)
