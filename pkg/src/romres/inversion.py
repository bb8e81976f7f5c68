"""Regularized, nonlinearly preconditioned Gauss-Newton inversion.

The data enter once, through the fitting map that converts a measured
time series to target log continued-fraction coefficients (the only
ill-conditioned step; its instability is controlled by shrinking the
reduced-model size m until the fitted coefficients are all positive).
The iteration then matches the stable resistivity-to-coefficients map to
that target.  Updates live in the low-dimensional row space of the
Jacobian; prior information enters through a null-space correction that
minimizes a weighted discrete H1 seminorm without touching the linearized
residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import (AdmissibilityError, DataUnusableError, DegeneracyError,
                     RegularizationError, RomresError, SpectralValidityError,
                     StepFailureError)
from .forward import TimeSeries, shifted_solver, transfer_moments
from .grids import (Grid1D, Grid2D, ResistivityField, SystemOperator,
                    assemble_operator, assemble_operator_2d,
                    build_difference_1d, build_difference_2d, source_vector,
                    uniform_segments)
from .jacobian import assemble_jacobian
from .krylov import preconditioner_chain
from .laplace import laplace_derivative, laplace_moments, laplace_transform
from .ratfit import (NodeFamily, fit_multipoint, fit_pade_toeplitz, node_family,
                     to_pole_residue)
from .cfrac import pole_residue_to_cfrac

__all__ = [
    "InversionConfig",
    "FitTarget",
    "data_fitting_Q",
    "data_fitting_moments",
    "gauss_newton_step",
    "adaptive_weights",
    "regularize_nullspace",
    "invert_1d",
    "invert_2d",
    "relative_error",
]


@dataclass(frozen=True)
class InversionConfig:
    """Knobs of the Gauss-Newton drivers; defaults follow the experiments.

    ``weights='identity'`` keeps the plain discrete H1 seminorm in the
    null-space correction (smooth targets); ``'adaptive'`` uses the
    misfit-scaled inverse-gradient weights that suppress Gibbs artifacts
    at jumps.  ``parametrization='spectral'`` switches the residual to the
    log pole/residue coordinates (baseline for comparison).
    """

    m0: int = 6
    family_kind: str = "zolotarev"
    s_hat: float = 60.0
    n_gn: int = 5
    step_length: float = 1.0
    weights: str = "identity"
    c_phi: float | None = None
    kkt_drop: int = 1
    svd_rcond: float = 1e-12
    max_halvings: int = 20
    parametrization: str = "cfrac"
    nullspace_correction: bool = True
    stagnation_rtol: float = 1e-8
    backtracking: bool = False
    toeplitz_scale: float | str = "auto"
    n_sources: int = 8
    r_init: np.ndarray | None = None
    keep_iterates: bool = False

    def family(self, m: int) -> NodeFamily:
        return node_family(self.family_kind, m, s_hat=self.s_hat)


@dataclass(frozen=True)
class FitTarget:
    """Outcome of the data-fitting map: final m and target vectors."""

    m: int
    log_cfrac: np.ndarray
    spectral: np.ndarray
    attempts: tuple[int, ...] = field(default=())

    def vector(self, parametrization: str) -> np.ndarray:
        if parametrization == "cfrac":
            return self.log_cfrac
        if parametrization == "spectral":
            return self.spectral
        raise RomresError(f"unknown parametrization {parametrization!r}")


_FIT_ERRORS = (SpectralValidityError, AdmissibilityError, DegeneracyError,
               RomresError)


def _target_from_model(model) -> FitTarget:
    pr = to_pole_residue(model)
    cf, _, _ = pole_residue_to_cfrac(pr)
    return pr, cf


def data_fitting_Q(series: TimeSeries, config: InversionConfig | None = None,
                   m0: int | None = None) -> FitTarget:
    """Fit a rational model to measured 1D data, shrinking m as needed.

    At each trial m the transfer function and its derivative are read off
    the data at the m geometric nodes and fitted by the osculatory
    interpolation; invalid poles/residues or nonpositive coefficients
    trigger a retry at m - 1.  Reaching m = 0 means the data support no
    admissible model at all.
    """
    config = config or InversionConfig()
    m = m0 or config.m0
    attempts = []
    while m >= 1:
        attempts.append(m)
        fam = config.family(m)
        try:
            values = np.array([laplace_transform(series, s) for s in fam.nodes])
            derivs = np.array([laplace_derivative(series, s) for s in fam.nodes])
            model = fit_multipoint(values, derivs, fam)
            pr, cf = _target_from_model(model)
            return FitTarget(m=m, log_cfrac=cf.log_vector(),
                             spectral=np.concatenate([pr.theta, pr.c]),
                             attempts=tuple(attempts))
        except _FIT_ERRORS:
            m -= 1
    raise DataUnusableError("no admissible reduced model at any m >= 1")


def _toeplitz_scale(tau: np.ndarray, rule) -> float:
    if rule != "auto":
        return float(rule)
    lo, hi = abs(tau[0]), abs(tau[-1])
    if lo == 0 or hi == 0:
        return 1.0
    return (lo / hi) ** (1.0 / (tau.size - 1))


def data_fitting_moments(moments: np.ndarray, s_hat: float,
                         config: InversionConfig | None = None,
                         m0: int | None = None) -> FitTarget:
    """Moment-based fitting at one expansion node (the 2D data route).

    ``moments`` holds tau_0..tau_{2 m0 - 1} of the transfer function at
    s_hat; trial m uses the leading 2m of them.
    """
    config = config or InversionConfig()
    m = m0 or config.m0
    tau_all = np.asarray(moments, dtype=float)
    if tau_all.size < 2 * m:
        raise RomresError("not enough moments for the requested m")
    attempts = []
    while m >= 1:
        attempts.append(m)
        tau = tau_all[: 2 * m]
        try:
            model = fit_pade_toeplitz(tau, shift=s_hat,
                                      scale=_toeplitz_scale(tau, config.toeplitz_scale))
            pr, cf = _target_from_model(model)
            return FitTarget(m=pr.m, log_cfrac=cf.log_vector(),
                             spectral=np.concatenate([pr.theta, pr.c]),
                             attempts=tuple(attempts))
        except _FIT_ERRORS:
            m -= 1
    raise DataUnusableError("no admissible reduced model at any m >= 1")


def gauss_newton_step(r: np.ndarray, J: np.ndarray, residual: np.ndarray,
                      alpha: float = 1.0, rcond: float = 1e-12,
                      max_halvings: int = 20):
    """Pseudoinverse step with a positivity guard on the step length.

    rho = -J^+ residual; alpha is halved (at most ``max_halvings`` times)
    until r + alpha*rho stays strictly positive.
    """
    rho = -np.linalg.pinv(J, rcond=rcond) @ residual
    a = alpha
    for _ in range(max_halvings + 1):
        r_gn = r + a * rho
        if np.all(r_gn > 0):
            return r_gn, rho, a
        a *= 0.5
    raise StepFailureError("positivity guard exhausted while halving the step")


def adaptive_weights(Dt: sp.spmatrix, r: np.ndarray, phi: float) -> np.ndarray:
    """Misfit-scaled inverse-gradient weights, w_j = ((Dt r)_j^2 + phi^2)^-1."""
    g = np.asarray(Dt @ r).ravel()
    return 1.0 / (g ** 2 + phi ** 2)


def regularize_nullspace(r_gn: np.ndarray, J: np.ndarray, Dt: sp.spmatrix,
                         w: np.ndarray | None = None, drop: int = 1,
                         solver: str = "auto"):
    """Null-space correction minimizing the weighted H1 seminorm.

    Computes the minimizer of

        min 1/2 || W^(1/2) Dt rho ||^2   s.t.  J rho = J r_gn,

    so the seminorm picks the smoothest representative while the
    linearized residual is untouched.  ``solver='kkt'`` forms the
    first-order stationarity (saddle) system and applies an SVD solve
    with the ``drop`` smallest singular components discarded, then snaps
    the correction back onto null(J); that matches the classical recipe
    and is adequate for identity weights.  Adaptive weights can span
    10+ decades, which pushes parts of the saddle spectrum below the SVD
    noise floor, so ``'nullspace'`` eliminates the constraint exactly
    (parametrizing the correction in a null-space basis of J) and solves
    the remaining least-squares problem; ``'auto'`` picks per weight mode.
    """
    n = r_gn.size
    k = J.shape[0]
    if solver == "auto":
        solver = "kkt" if w is None else "nullspace"

    if solver == "nullspace":
        U, s, Vh = np.linalg.svd(J, full_matrices=True)
        rank = int(np.sum(s > max(J.shape) * np.finfo(float).eps * s[0]))
        Nmat = Vh[rank:].T
        sw = np.ones(Dt.shape[0]) if w is None else np.sqrt(w)
        G = sp.diags(sw) @ Dt
        rhs = -np.asarray(G @ r_gn).ravel()
        z, *_ = np.linalg.lstsq(np.asarray(G @ Nmat), rhs, rcond=1e-13)
        return r_gn + Nmat @ z

    if solver != "kkt":
        raise RomresError(f"unknown null-space solver {solver!r}")
    if w is None:
        H = (Dt.T @ Dt).toarray()
    else:
        H = (Dt.T @ sp.diags(w) @ Dt).toarray()
    M = np.zeros((n + k, n + k))
    M[:n, :n] = H
    M[:n, n:] = J.T
    M[n:, :n] = J
    rhs = np.concatenate([np.zeros(n), J @ r_gn])
    try:
        U, s, Vh = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise RegularizationError(f"saddle-system SVD failed: {exc}") from exc
    if drop >= s.size or (drop and s[:-drop].size and s[-drop - 1] == 0):
        raise RegularizationError("saddle system singular beyond truncation")
    inv = np.zeros_like(s)
    keep = s.size - drop if drop else s.size
    inv[:keep] = 1.0 / s[:keep]
    x = Vh.T @ (inv * (U.T @ rhs))
    # exact constraint enforcement: project the correction onto null(J)
    corr = x[:n] - r_gn
    corr -= np.linalg.pinv(J, rcond=1e-12) @ (J @ corr)
    return r_gn + corr


def regularization_gradient(grid: Grid1D | Grid2D) -> sp.csr_matrix:
    """Difference operator of the H1 seminorm (no boundary rows)."""
    if isinstance(grid, Grid1D):
        D = build_difference_1d(grid)
        return D[:-1, :].tocsr()
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    rows, cols, vals = [], [], []
    e = 0
    for iy in range(ny):
        for ix in range(nx - 1):
            c0, c1 = iy * nx + ix, iy * nx + ix + 1
            rows += [e, e]; cols += [c0, c1]; vals += [-1.0 / hx, 1.0 / hx]
            e += 1
    for iy in range(ny - 1):
        for ix in range(nx):
            c0, c1 = iy * nx + ix, (iy + 1) * nx + ix
            rows += [e, e]; cols += [c0, c1]; vals += [-1.0 / hy, 1.0 / hy]
            e += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(e, grid.n_cells))


def relative_error(r_star: np.ndarray, r_true: np.ndarray) -> float:
    """Ratio of discrete l2 norms, ||r* - r_true|| / ||r_true||."""
    r_star = np.asarray(r_star, dtype=float)
    r_true = np.asarray(r_true, dtype=float)
    if r_star.shape != r_true.shape:
        raise RomresError("fields must have matching shape")
    return float(np.linalg.norm(r_star - r_true) / np.linalg.norm(r_true))


@dataclass
class InversionHistory:
    """Per-iteration record of the Gauss-Newton run."""

    iterations: list[int] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    error: list[float] = field(default_factory=list)
    step_length: list[float] = field(default_factory=list)
    m: int = 0
    notes: list[str] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["iteration,residual,error"]
        for i, p in enumerate(self.iterations):
            err = self.error[i] if i < len(self.error) else float("nan")
            lines.append(f"{p},{self.residual[i]!r},{err!r}")
        return "\n".join(lines) + "\n"


def _gn_loop(eval_chain, jac, n_param, l_star, config: InversionConfig, Dt,
             r_true=None, r_init=None):
    """Shared Gauss-Newton driver over an abstract chain evaluator.

    ``eval_chain(r) -> (l_vec, payload)`` and ``jac(payload) -> J`` supply
    the residual and its Jacobian; everything else (step, weights,
    null-space correction, bookkeeping) is common to 1D and 2D.
    """
    r = np.ones(n_param) if r_init is None else np.asarray(r_init, dtype=float).copy()
    hist = InversionHistory()
    prev_res = None
    for p in range(1, config.n_gn + 1):
        l_vec, payload = eval_chain(r)
        residual = l_vec - l_star
        res_norm = float(np.linalg.norm(residual))
        hist.iterations.append(p)
        hist.residual.append(res_norm)
        if r_true is not None:
            hist.error.append(relative_error(r, r_true))
        if config.keep_iterates:
            hist.iterates.append(r.copy())
        if prev_res is not None and abs(prev_res - res_norm) <= \
                config.stagnation_rtol * max(prev_res, 1e-300):
            hist.notes.append(f"stagnated at iteration {p}")
            break
        prev_res = res_norm
        J = jac(payload)
        r_gn, rho, a_used = gauss_newton_step(r, J, residual,
                                              alpha=config.step_length,
                                              rcond=config.svd_rcond,
                                              max_halvings=config.max_halvings)
        hist.step_length.append(a_used)
        if not config.nullspace_correction:
            r_next = r_gn
        else:
            if config.weights == "adaptive":
                m_eff = J.shape[0] // 2
                cp = config.c_phi if config.c_phi is not None else 1.0 / (2.0 * m_eff ** 2)
                phi = cp * res_norm
                w = adaptive_weights(Dt, r_gn, phi)
            elif config.weights == "identity":
                w = None
            else:
                raise RomresError(f"unknown weight mode {config.weights!r}")
            r_next = regularize_nullspace(r_gn, J, Dt, w=w, drop=config.kkt_drop)
            if not np.all(r_next > 0):
                hist.notes.append(f"null-space correction left positivity at "
                                  f"iteration {p}; kept the plain update")
                r_next = r_gn
        if config.backtracking:
            l_try, _ = eval_chain(r_next)
            if np.linalg.norm(l_try - l_star) > res_norm:
                a = a_used
                while a > 2 ** -config.max_halvings:
                    a *= 0.5
                    cand = r + a * rho
                    if np.all(cand > 0):
                        l_try, _ = eval_chain(cand)
                        if np.linalg.norm(l_try - l_star) <= res_norm:
                            r_next = cand
                            break
                else:
                    hist.notes.append(f"backtracking failed at iteration {p}")
        r = r_next
    l_vec, _ = eval_chain(r)
    hist.iterations.append(config.n_gn + 1)
    hist.residual.append(float(np.linalg.norm(l_vec - l_star)))
    if r_true is not None:
        hist.error.append(relative_error(r, r_true))
    if config.keep_iterates:
        hist.iterates.append(r.copy())
    return r, hist


def invert_1d(data: TimeSeries | FitTarget, grid: Grid1D,
              config: InversionConfig | None = None,
              r_true: np.ndarray | None = None):
    """Full 1D driver: data fitting once, then the regularized iteration.

    ``data`` may be a measured time series (fitted here, with the
    m-reduction rule) or an already-computed FitTarget.  Returns
    (ResistivityField, InversionHistory).
    """
    config = config or InversionConfig()
    target = data if isinstance(data, FitTarget) else data_fitting_Q(data, config)
    m = target.m
    fam = config.family(m)
    l_star = target.vector(config.parametrization)
    D = build_difference_1d(grid)
    b = source_vector(grid).b
    Dt = regularization_gradient(grid)

    def eval_chain(r):
        op = assemble_operator(ResistivityField(r, grid), D)
        ctx = preconditioner_chain(op, b, fam)
        if config.parametrization == "cfrac":
            return ctx.log_vector(), ctx
        return np.concatenate([ctx.pr.theta, ctx.pr.c]), ctx

    def jac(ctx):
        return assemble_jacobian(ctx, target=config.parametrization)

    r, hist = _gn_loop(eval_chain, jac, grid.n_points, l_star, config, Dt,
                       r_true=r_true, r_init=config.r_init)
    hist.m = m
    return ResistivityField(r, grid), hist


def moments_from_series(series_list, s_hat: float, K: int) -> np.ndarray:
    """Stack per-source Taylor moments extracted from time data."""
    return np.vstack([laplace_moments(s, s_hat, K) for s in series_list])


def moments_from_operator(op: SystemOperator, sources, s_hat: float, K: int) -> np.ndarray:
    """Per-source transfer moments of a semi-discrete model (data synthesis)."""
    solver = shifted_solver(op.A)
    return np.vstack([transfer_moments(op.A, b, s_hat, K, solver=solver)
                      for b in sources])


def invert_2d(data, grid: Grid2D, config: InversionConfig | None = None,
              r_true: np.ndarray | None = None):
    """Multi-source 2D driver with single-node moment matching.

    ``data`` is either a list of per-source TimeSeries or an array of
    per-source transfer moments, shape (N_d, 2 m0), taken at the common
    node ``config.s_hat``.  Per-source residuals and Jacobians are stacked
    into one coupled least-squares update; the shared model size m is the
    largest at which every source admits a positive-coefficient fit.
    """
    config = config or InversionConfig()
    if not grid.segments:
        grid = replace(grid, segments=uniform_segments(grid, config.n_sources))
    sources = [source_vector(grid, seg).b for seg in grid.segments]
    n_d = len(sources)

    if isinstance(data, np.ndarray):
        tau = np.asarray(data, dtype=float)
        if tau.ndim != 2 or tau.shape[0] != n_d:
            raise RomresError("moment array must be (n_sources, 2*m0)")
    else:
        tau = moments_from_series(data, config.s_hat, 2 * config.m0)

    m = min(config.m0, tau.shape[1] // 2)
    targets = None
    while m >= 1:
        try:
            fits = [data_fitting_moments(tau[j], config.s_hat, config, m0=m)
                    for j in range(n_d)]
        except DataUnusableError:
            raise
        if all(f.m == m for f in fits):
            targets = fits
            break
        m = min(f.m for f in fits)
    if targets is None:
        raise DataUnusableError("sources do not admit a common model size")
    fam = config.family(m) if config.family_kind == "single-node" else \
        node_family("single-node", m, s_hat=config.s_hat)
    l_star = np.concatenate([t.vector(config.parametrization) for t in targets])

    D, M_avg = build_difference_2d(grid)
    Dt = regularization_gradient(grid)

    def eval_chain(r):
        op = assemble_operator_2d(ResistivityField(r, grid), grid)
        solver = shifted_solver(op.A)
        ctxs = [preconditioner_chain(op, b, fam, source_index=j, solver=solver)
                for j, b in enumerate(sources)]
        if config.parametrization == "cfrac":
            vecs = [c.log_vector() for c in ctxs]
        else:
            vecs = [np.concatenate([c.pr.theta, c.pr.c]) for c in ctxs]
        return np.concatenate(vecs), ctxs

    def jac(ctxs):
        return np.vstack([assemble_jacobian(c, target=config.parametrization)
                          for c in ctxs])

    r, hist = _gn_loop(eval_chain, jac, grid.n_cells, l_star, config, Dt,
                       r_true=r_true, r_init=config.r_init)
    hist.m = m
    return ResistivityField(r, grid), hist
