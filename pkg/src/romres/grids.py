"""Grids, difference operators and system-operator assembly.

The semi-discrete diffusion operator has the product form

    A(rho) = -D^T diag(rho) D,

where ``D`` is a sparse difference factor mapping state values (nodes in 1D,
cell centers in 2D) to flux edges, and ``rho`` holds one resistivity value
per edge.  In 1D the inversion unknown lives directly on the edges.  In 2D
the unknown is cell-centered and edge values are obtained by arithmetic
averaging, ``rho = M r``; the sparse map ``M`` is kept so that derivative
chains stay short sums of rank-one terms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidGridError, PositivityError

__all__ = [
    "Grid1D",
    "Grid2D",
    "BoundarySegment",
    "ResistivityField",
    "SystemOperator",
    "SourceVector",
    "build_difference_1d",
    "build_difference_2d",
    "assemble_operator",
    "assemble_operator_2d",
    "operator_derivative",
    "source_vector",
    "uniform_segments",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``n_points`` interior nodes on [0, 1].

    Node i sits at x = i*h for i = 1..N with h = 1/(N+1); x = 0 carries the
    zero-flux (measurement) boundary and x = 1 the homogeneous Dirichlet one.
    Resistivity sample i is attached to the edge [i*h, (i+1)*h].
    """

    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise InvalidGridError("1D grid needs at least 2 points")

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_points + 1)

    @property
    def edge_midpoints(self) -> np.ndarray:
        h = self.spacing
        return (np.arange(1, self.n_points + 1) + 0.5) * h


@dataclass(frozen=True)
class BoundarySegment:
    """Interval [lo, hi] on the accessible part of the boundary."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InvalidGridError("segment must have positive length")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def overlaps(self, other: "BoundarySegment") -> bool:
        return self.lo < other.hi and other.lo < self.hi


@dataclass(frozen=True)
class Grid2D:
    """Rectangular cell grid on [0, Lx] x [0, Ly].

    ``nx`` by ``ny`` cells of size hx = Lx/nx, hy = Ly/ny.  Fields are
    cell-centered, stored row-major as shape (ny, nx) flattened in C order
    (index = iy*nx + ix).  The accessible boundary is the interval
    ``accessible = (a0, a1)`` on the bottom side y = 0; it carries the
    zero-flux condition and the source/receiver segments.  The remaining
    boundary is homogeneous Dirichlet.
    """

    nx: int
    ny: int
    Lx: float = 3.0
    Ly: float = 1.0
    accessible: tuple[float, float] = (1.0, 2.0)
    segments: tuple[BoundarySegment, ...] = field(default=())

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise InvalidGridError("2D grid needs at least 2x2 cells")
        if self.Lx <= 0 or self.Ly <= 0:
            raise InvalidGridError("domain extents must be positive")
        a0, a1 = self.accessible
        if not (0.0 <= a0 < a1 <= self.Lx):
            raise InvalidGridError("accessible interval outside the bottom side")
        for i, s in enumerate(self.segments):
            if s.lo < a0 - 1e-12 or s.hi > a1 + 1e-12:
                raise InvalidGridError(f"segment {i} outside accessible boundary")
            for t in self.segments[i + 1:]:
                if s.overlaps(t):
                    raise InvalidGridError("segments must be pairwise disjoint")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (xc, yc) of length n_cells, C-order (iy*nx + ix)."""
        xs = (np.arange(self.nx) + 0.5) * self.hx
        ys = (np.arange(self.ny) + 0.5) * self.hy
        xc, yc = np.meshgrid(xs, ys)
        return xc.ravel(), yc.ravel()

    def to_json(self) -> str:
        d = {
            "nx": self.nx,
            "ny": self.ny,
            "Lx": self.Lx,
            "Ly": self.Ly,
            "accessible": list(self.accessible),
            "segments": [[s.lo, s.hi] for s in self.segments],
        }
        return json.dumps(d, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Grid2D":
        d = json.loads(text)
        return Grid2D(
            nx=int(d["nx"]),
            ny=int(d["ny"]),
            Lx=float(d["Lx"]),
            Ly=float(d["Ly"]),
            accessible=tuple(d.get("accessible", (1.0, 2.0))),
            segments=tuple(BoundarySegment(*p) for p in d.get("segments", [])),
        )


@dataclass(frozen=True)
class ResistivityField:
    """Strictly positive resistivity samples attached to a grid."""

    values: np.ndarray
    grid: Grid1D | Grid2D

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        n = self.grid.n_points if isinstance(self.grid, Grid1D) else self.grid.n_cells
        if v.shape != (n,):
            raise InvalidGridError(f"field length {v.shape} does not match grid ({n})")
        if not np.all(v > 0):
            raise PositivityError("resistivity must be strictly positive")

    def to_csv(self) -> str:
        return "\n".join(repr(float(x)) for x in self.values) + "\n"

    @staticmethod
    def from_csv(text: str, grid) -> "ResistivityField":
        vals = np.array([float(line) for line in text.split() if line.strip()])
        return ResistivityField(vals, grid)


@dataclass(frozen=True)
class SystemOperator:
    """Assembled operator A = -D^T diag(rho) D with its factors.

    ``averaging`` is the sparse edge-from-cell map M (identity in 1D, where
    the parameter vector is the edge vector itself).
    """

    A: sp.csr_matrix
    D: sp.csr_matrix
    averaging: sp.csr_matrix

    @property
    def n_state(self) -> int:
        return self.A.shape[0]

    @property
    def n_edges(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class SourceVector:
    """Source/measurement vector with its support indices."""

    b: np.ndarray
    support: np.ndarray


def build_difference_1d(grid: Grid1D) -> sp.csr_matrix:
    """Forward-difference factor on the 1D grid.

    Row i < N is (v_{i+1} - v_i)/h; the last row is -v_N/h, which folds the
    Dirichlet condition at x = 1 into the product -D^T diag(r) D.  The
    zero-flux edge at x = 0 carries no row.
    """
    n = grid.n_points
    h = grid.spacing
    main = np.full(n, -1.0 / h)
    upper = np.full(n - 1, 1.0 / h)
    return sp.diags([main, upper], [0, 1], shape=(n, n), format="csr")


def assemble_operator(field: ResistivityField, D: sp.csr_matrix) -> SystemOperator:
    """Assemble A(r) = -D^T diag(r) D for edge-valued resistivity."""
    r = field.values
    if D.shape[0] != r.shape[0]:
        raise InvalidGridError("resistivity length does not match edge count")
    if not np.all(r > 0):
        raise PositivityError("resistivity must be strictly positive")
    A = (-(D.T @ sp.diags(r) @ D)).tocsr()
    eye = sp.identity(r.shape[0], format="csr")
    return SystemOperator(A=A, D=D, averaging=eye)


def operator_derivative(D: sp.csr_matrix, k: int) -> np.ndarray:
    """Rank-one derivative factor d_k = (row k of D)^T.

    The operator derivative with respect to the k-th edge resistivity is
    -d_k d_k^T.
    """
    if not 0 <= k < D.shape[0]:
        raise IndexError(f"edge index {k} out of range")
    return np.asarray(D.getrow(k).todense()).ravel()


def _edges_2d(grid: Grid2D):
    """Enumerate flux edges: (state indices, D coefficients, cell weights)."""
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    a0, a1 = grid.accessible

    def cell(ix, iy):
        return iy * nx + ix

    rows = []  # (list[(state_idx, coeff)], list[(cell_idx, weight)])
    for iy in range(ny):
        for ix in range(nx - 1):
            c0, c1 = cell(ix, iy), cell(ix + 1, iy)
            rows.append(([(c0, -1.0 / hx), (c1, 1.0 / hx)],
                         [(c0, 0.5), (c1, 0.5)]))
    for iy in range(ny - 1):
        for ix in range(nx):
            c0, c1 = cell(ix, iy), cell(ix, iy + 1)
            rows.append(([(c0, -1.0 / hy), (c1, 1.0 / hy)],
                         [(c0, 0.5), (c1, 0.5)]))
    # Dirichlet faces: distance from cell center to boundary is half a cell,
    # hence the sqrt(2)/h coefficient so that the diagonal picks up 2r/h^2.
    sx, sy = np.sqrt(2.0) / hx, np.sqrt(2.0) / hy
    for iy in range(ny):
        for ix in (0, nx - 1):
            c = cell(ix, iy)
            rows.append(([(c, -sx)], [(c, 1.0)]))
    for ix in range(nx):
        c = cell(ix, ny - 1)
        rows.append(([(c, -sy)], [(c, 1.0)]))
    for ix in range(nx):
        mid = (ix + 0.5) * hx
        if a0 < mid < a1:
            continue  # zero-flux face on the accessible boundary
        c = cell(ix, 0)
        rows.append(([(c, -sy)], [(c, 1.0)]))
    return rows


def build_difference_2d(grid: Grid2D) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Difference factor D and edge-from-cell averaging map M for a 2D grid."""
    rows = _edges_2d(grid)
    n_e = len(rows)
    n_c = grid.n_cells
    D = sp.lil_matrix((n_e, n_c))
    M = sp.lil_matrix((n_e, n_c))
    for e, (dents, ments) in enumerate(rows):
        for idx, coeff in dents:
            D[e, idx] = coeff
        for idx, w in ments:
            M[e, idx] = w
    return D.tocsr(), M.tocsr()


def assemble_operator_2d(field: ResistivityField, grid: Grid2D | None = None) -> SystemOperator:
    """Five-point finite-volume operator with cell-centered resistivity.

    Edge resistivity is the arithmetic mean of the two adjacent cells, which
    keeps A linear in the cell values.  Zero-flux on the accessible
    boundary interval, homogeneous Dirichlet elsewhere.
    """
    grid = grid or field.grid
    if not isinstance(grid, Grid2D):
        raise InvalidGridError("assemble_operator_2d needs a Grid2D field")
    D, M = build_difference_2d(grid)
    rho = M @ field.values
    A = (-(D.T @ sp.diags(rho) @ D)).tocsr()
    return SystemOperator(A=A, D=D, averaging=M)


def uniform_segments(grid: Grid2D, n_segments: int, fill: float = 0.8) -> tuple[BoundarySegment, ...]:
    """Equispaced disjoint source/receiver segments on the accessible boundary.

    The accessible interval is split into ``n_segments`` slots; each segment
    is centered in its slot and covers ``fill`` of the slot width, leaving
    gaps that keep the supports disjoint on any raster.
    """
    a0, a1 = grid.accessible
    pitch = (a1 - a0) / n_segments
    half = 0.5 * fill * pitch
    segs = []
    for j in range(n_segments):
        c = a0 + (j + 0.5) * pitch
        segs.append(BoundarySegment(c - half, c + half))
    return tuple(segs)


def source_vector(grid: Grid1D | Grid2D, segment: BoundarySegment | None = None) -> SourceVector:
    """Source/measurement vector for one boundary segment.

    1D: the point excitation/measurement at x = 0, b = e_1/sqrt(h).

    2D: fractional indicator of the bottom-row cells covered by ``segment``,
    scaled by sqrt(hx/hy).  With that scaling b^T exp(At) b approximates the
    grid-independent functional  int_J int_J G(t, x, x') dx dx'  of the
    continuum line source, so data synthesized on one grid can be fitted
    with a model on another.
    """
    if isinstance(grid, Grid1D):
        b = np.zeros(grid.n_points)
        b[0] = 1.0 / np.sqrt(grid.spacing)
        return SourceVector(b=b, support=np.array([0]))

    if segment is None:
        raise InvalidGridError("2D source needs a boundary segment")
    a0, a1 = grid.accessible
    if segment.lo < a0 - 1e-12 or segment.hi > a1 + 1e-12:
        raise InvalidGridError("segment outside accessible boundary")
    hx, hy = grid.hx, grid.hy
    b = np.zeros(grid.n_cells)
    support = []
    for ix in range(grid.nx):
        lo, hi = ix * hx, (ix + 1) * hx
        overlap = min(hi, segment.hi) - max(lo, segment.lo)
        if overlap > 1e-12 * hx:
            w = overlap / hx
            b[ix] = np.sqrt(hx / hy) * w  # bottom row: cell index = ix
            support.append(ix)
    if not support:
        raise InvalidGridError("segment covers no boundary cells")
    return SourceVector(b=b, support=np.array(support))
