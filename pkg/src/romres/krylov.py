"""Rational Krylov subspaces, Galerkin projection and the map to log
continued-fraction coefficients.

The nonlinear map evaluated here takes a resistivity vector to the
2m-vector (log kappa_1..m, log kappahat_1..m) through the stable chain

    r -> A(r) -> snapshot basis V -> (A_m, b_m) -> (theta, c)
      -> (kappa, kappahat) -> logs.

All intermediates are kept in a ChainContext so the analytic Jacobian can
reuse them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cfrac import ContinuedFraction, Tridiagonal, pole_residue_to_cfrac
from .errors import BasisCollapseError, DegeneracyError, RomresError
from .forward import shifted_solver
from .grids import (Grid1D, Grid2D, ResistivityField, SystemOperator,
                    assemble_operator, assemble_operator_2d,
                    build_difference_1d, source_vector)
from .ratfit import NodeFamily, PoleResidue, node_family

__all__ = [
    "KrylovBasis",
    "ReducedModel",
    "ChainContext",
    "build_krylov",
    "project",
    "reduced_spectral",
    "preconditioner_chain",
    "preconditioner_R",
]


@dataclass(frozen=True)
class KrylovBasis:
    """Snapshots K, orthonormal V and triangular U with K = V U, diag(U) > 0.

    ``generation`` records how the snapshots were produced: ``raw`` stores
    the literal resolvent powers (differentiable columns); ``sequential``
    re-applies the resolvent to the newest orthonormal vector, which spans
    the same subspace but stays well conditioned when plain powers go
    numerically collinear.  In the sequential case K coincides with V and
    U is the identity.
    """

    K: np.ndarray
    V: np.ndarray
    U: np.ndarray
    family: NodeFamily
    generation: str = "raw"

    @property
    def m(self) -> int:
        return self.K.shape[1]


@dataclass(frozen=True)
class ReducedModel:
    """Projected system (A_m, b_m); A_m symmetric negative definite."""

    A_m: np.ndarray
    b_m: np.ndarray
    family: NodeFamily
    source_index: int = 0

    @property
    def m(self) -> int:
        return self.b_m.size

    def to_json(self) -> str:
        import json

        return json.dumps({
            "A_m": [list(map(float, row)) for row in self.A_m],
            "b_m": list(map(float, self.b_m)),
            "node_family": {"label": self.family.label,
                            "nodes": list(map(float, self.family.nodes)),
                            "multiplicities": list(map(int, self.family.multiplicities))},
        }, indent=2, sort_keys=True)


def snapshot_columns(solver: shifted_solver, b: np.ndarray, family: NodeFamily) -> np.ndarray:
    """Snapshot matrix with columns (s_j I - A)^{-k} b, k = 1..M_j."""
    cols = []
    for s, mult in zip(family.nodes, family.multiplicities):
        x = np.asarray(b, dtype=float)
        for _ in range(int(mult)):
            x = solver.solve(s, x)
            cols.append(x)
    return np.column_stack(cols)


def _orthonormalize_mgs(K: np.ndarray, floor: float = 1e-13):
    """Gram-Schmidt with one re-pass; returns (V, U) with positive diag(U)."""
    n, m = K.shape
    V = np.zeros((n, m))
    U = np.zeros((m, m))
    for j in range(m):
        u = K[:, j].copy()
        nrm0 = np.linalg.norm(u)
        for _ in range(2):
            c = V[:, :j].T @ u
            u -= V[:, :j] @ c
            U[:j, j] += c
        nb = np.linalg.norm(u)
        if nb <= floor * nrm0:
            raise BasisCollapseError(
                f"snapshot column {j + 1} lies in the span of the previous ones; "
                "reduce the model size m")
        U[j, j] = nb
        V[:, j] = u / nb
    return V, U


def sequential_basis(solver: shifted_solver, b: np.ndarray, family: NodeFamily) -> np.ndarray:
    """Orthonormal basis built by re-solving on the newest basis vector.

    Spans the same rational Krylov subspace as the raw powers but never
    forms them, so confluent families stay numerically sound at depths
    where the raw snapshot matrix loses rank to roundoff.
    """
    n = b.size
    V = np.zeros((n, family.m))
    col = 0
    for s, mult in zip(family.nodes, family.multiplicities):
        x = np.asarray(b, dtype=float)
        for _ in range(int(mult)):
            x = solver.solve(s, x)
            for _ in range(2):
                x -= V[:, :col] @ (V[:, :col].T @ x)
            nrm = np.linalg.norm(x)
            if nrm == 0.0:
                raise BasisCollapseError("sequential snapshot vanished; reduce m")
            x = x / nrm
            V[:, col] = x
            col += 1
    return V


def _orthonormalize_cholqr(K: np.ndarray):
    """QR through Cholesky of the column-equilibrated Gram matrix."""
    norms = np.linalg.norm(K, axis=0)
    if np.any(norms == 0):
        raise BasisCollapseError("zero snapshot column")
    Kt = K / norms
    G = Kt.T @ Kt
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise BasisCollapseError("Gram matrix not positive definite; reduce m") from exc
    piv = np.diag(L) ** 2
    if np.min(piv) < 1e-13 * np.trace(G):
        raise BasisCollapseError("Cholesky pivot below roundoff floor; reduce m")
    V = sla.solve_triangular(L, Kt.T, lower=True).T
    # one re-orthonormalization pass tightens V^T V = I for squared conditioning
    G2 = V.T @ V
    L2 = np.linalg.cholesky(G2)
    V = sla.solve_triangular(L2, V.T, lower=True).T
    U = (L2.T @ L.T) * norms[None, :]
    return V, U


# below this relative residual the raw snapshot columns are too collinear
# for the factored derivative formulas; switch to sequential generation
_RAW_RESIDUAL_FLOOR = 1e-8


def build_krylov(A, b, family: NodeFamily, solver: shifted_solver | None = None,
                 method: str = "mgs", generation: str = "auto") -> KrylovBasis:
    """Orthonormal basis of the rational Krylov subspace of ``family``.

    ``generation='raw'`` orthonormalizes the literal snapshot columns
    (``mgs`` directly, ``cholqr`` through the Gram matrix); these columns
    are what the analytic Jacobian differentiates.  ``'sequential'``
    re-solves on the newest orthonormal vector instead, which is the only
    sound choice once confluent powers go collinear.  ``'auto'`` tries raw
    and falls back when the smallest orthogonalization residual drops
    below the trust floor.
    """
    solver = solver or shifted_solver(A)
    if generation not in ("auto", "raw", "sequential"):
        raise RomresError(f"unknown snapshot generation {generation!r}")
    if generation != "sequential":
        K = snapshot_columns(solver, b, family)
        try:
            if method == "mgs":
                V, U = _orthonormalize_mgs(K)
            elif method == "cholqr":
                V, U = _orthonormalize_cholqr(K)
            else:
                raise RomresError(f"unknown orthonormalization {method!r}")
        except BasisCollapseError:
            if generation == "raw":
                raise
            V = U = None
        if V is not None:
            trust = np.min(np.diag(U) / np.linalg.norm(K, axis=0))
            if generation == "raw" or trust > _RAW_RESIDUAL_FLOOR:
                return KrylovBasis(K=K, V=V, U=U, family=family, generation="raw")
    V = sequential_basis(solver, b, family)
    return KrylovBasis(K=V, V=V, U=np.eye(family.m), family=family,
                       generation="sequential")


def project(A, b, basis: KrylovBasis, source_index: int = 0) -> ReducedModel:
    """Galerkin projection A_m = V^T A V, b_m = V^T b."""
    V = basis.V
    AV = A @ V
    A_m = V.T @ AV
    A_m = 0.5 * (A_m + A_m.T)
    b_m = V.T @ np.asarray(b, dtype=float)
    lam_max = sla.eigvalsh(A_m)[-1]
    if lam_max >= 0:
        raise RomresError(f"projected operator not negative definite (max eig {lam_max:g})")
    return ReducedModel(A_m=A_m, b_m=b_m, family=basis.family, source_index=source_index)


def reduced_spectral(model: ReducedModel):
    """Poles and residues of the reduced model.

    Eigenvalues of A_m are -theta; residues are c_j = (b_m^T z_j)^2 >= 0.
    Returns (PoleResidue, Z) with theta ascending and the eigenvector
    columns of Z ordered accordingly.
    """
    lam, Z = sla.eigh(model.A_m)
    theta = -lam[::-1]
    Z = Z[:, ::-1]
    c = (model.b_m @ Z) ** 2
    return PoleResidue(theta=theta, c=c), Z


@dataclass(frozen=True)
class ChainContext:
    """All intermediates of one preconditioner evaluation at a fixed r."""

    operator: SystemOperator
    b: np.ndarray
    family: NodeFamily
    solver: shifted_solver
    basis: KrylovBasis
    model: ReducedModel
    pr: PoleResidue
    Z: np.ndarray
    eta: np.ndarray
    tri: Tridiagonal
    X: np.ndarray
    cf: ContinuedFraction

    @property
    def m(self) -> int:
        return self.family.m

    def log_vector(self) -> np.ndarray:
        return self.cf.log_vector()


def preconditioner_chain(op: SystemOperator, b: np.ndarray, family: NodeFamily,
                         source_index: int = 0, method: str = "mgs",
                         generation: str = "auto",
                         solver: shifted_solver | None = None) -> ChainContext:
    """Run the full stable chain at one operator/source pair."""
    solver = solver or shifted_solver(op.A)
    basis = build_krylov(op.A, b, family, solver=solver, method=method,
                         generation=generation)
    model = project(op.A, b, basis, source_index=source_index)
    pr, Z = reduced_spectral(model)
    gaps = np.diff(pr.theta)
    if gaps.size and np.min(gaps) < 1e-10 * abs(pr.theta[-1]):
        raise DegeneracyError("nearly coinciding reduced eigenvalues")
    cf, tri, X = pole_residue_to_cfrac(pr)
    eta = np.sqrt(pr.c / np.sum(pr.c))
    return ChainContext(operator=op, b=b, family=family, solver=solver,
                        basis=basis, model=model, pr=pr, Z=Z, eta=eta,
                        tri=tri, X=X, cf=cf)


def preconditioner_R(field: ResistivityField, family: NodeFamily | str | None = None,
                     segment=None, method: str = "mgs", generation: str = "auto",
                     return_context: bool = False):
    """Log continued-fraction coefficients of a resistivity field.

    Output ordering is fixed: (log kappa_1..m, log kappahat_1..m).  For 1D
    fields the source is the boundary excitation at x = 0; 2D fields need a
    boundary ``segment``.  ``family`` may be a NodeFamily or a preset name
    (default: the geometric ladder with m = 5 in 1D, the single-node family
    in 2D).
    """
    grid = field.grid
    if isinstance(grid, Grid1D):
        if family is None:
            family = node_family("zolotarev", 5)
        elif isinstance(family, str):
            family = node_family(family, 5)
        op = assemble_operator(field, build_difference_1d(grid))
        b = source_vector(grid).b
    elif isinstance(grid, Grid2D):
        if family is None:
            family = node_family("single-node", 5)
        elif isinstance(family, str):
            family = node_family(family, 5)
        op = assemble_operator_2d(field, grid)
        if segment is None:
            raise RomresError("2D preconditioner needs a boundary segment")
        b = source_vector(grid, segment).b
    else:
        raise RomresError("unsupported grid type")
    ctx = preconditioner_chain(op, b, family, method=method, generation=generation)
    vec = ctx.log_vector()
    return (vec, ctx) if return_context else vec
