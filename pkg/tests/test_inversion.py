import numpy as np
import pytest

from romres.errors import DataUnusableError, RomresError, StepFailureError
from romres.forward import TimeSeries, simulate_response
from romres.grids import (Grid1D, Grid2D, ResistivityField, assemble_operator,
                          assemble_operator_2d, build_difference_1d,
                          source_vector, uniform_segments)
from romres.inversion import (InversionConfig, adaptive_weights, data_fitting_Q,
                              data_fitting_moments, gauss_newton_step, invert_1d,
                              invert_2d, moments_from_operator,
                              regularization_gradient, regularize_nullspace,
                              relative_error)
from romres.jacobian import assemble_jacobian
from romres.krylov import preconditioner_R
from romres.phantoms import phantom
from romres.ratfit import node_family


def synthesize(name, n_fine=149, T=100.0, h_T=2e-5):
    g = Grid1D(n_fine)
    op = assemble_operator(phantom(name, g), build_difference_1d(g))
    b = source_vector(g).b
    return simulate_response(op.A, b, T, h_T)


def test_relative_error_basics():
    r = np.array([1.0, 2.0])
    assert relative_error(r, r) == 0.0
    assert relative_error(2 * r, r) == pytest.approx(1.0)
    with pytest.raises(RomresError):
        relative_error(np.ones(3), np.ones(2))


def test_gauss_newton_fixed_point(small_system):
    grid, field, op, b = small_system
    fam = node_family("zolotarev", 3)
    vec, ctx = preconditioner_R(field, fam, return_context=True)
    J = assemble_jacobian(ctx)
    r_gn, rho, a = gauss_newton_step(field.values, J, np.zeros(6))
    assert np.linalg.norm(rho) <= 1e-12 * np.linalg.norm(field.values)
    assert np.array_equal(r_gn, field.values)


def test_gauss_newton_positivity_guard():
    J = np.eye(2)
    r = np.array([1.0, 1.0])
    residual = np.array([100.0, 0.0])  # rho = (-100, 0)
    r_gn, rho, a = gauss_newton_step(r, J, residual)
    assert np.all(r_gn > 0)
    assert a < 1.0
    with pytest.raises(StepFailureError):
        gauss_newton_step(r, J, residual, max_halvings=2)


def test_nullspace_correction_preserves_residual(small_system, rng):
    grid, field, op, b = small_system
    fam = node_family("zolotarev", 3)
    vec, ctx = preconditioner_R(field, fam, return_context=True)
    J = assemble_jacobian(ctx)
    Dt = regularization_gradient(grid)
    r_gn = field.values * (1.0 + 0.1 * rng.random(grid.n_points))
    for w in (None, adaptive_weights(Dt, r_gn, 1e-3)):
        for solver in ("kkt", "nullspace"):
            r_next = regularize_nullspace(r_gn, J, Dt, w=w, solver=solver)
            rel = np.linalg.norm(J @ (r_next - r_gn)) / np.linalg.norm(J @ r_gn)
            assert rel < 1e-8, (solver, w is None)


def test_nullspace_correction_keeps_constant(small_system):
    # a constant update already minimizes the seminorm in its affine space
    grid, field, op, b = small_system
    fam = node_family("zolotarev", 3)
    vec, ctx = preconditioner_R(field, fam, return_context=True)
    J = assemble_jacobian(ctx)
    Dt = regularization_gradient(grid)
    r_gn = np.full(grid.n_points, 1.37)
    r_next = regularize_nullspace(r_gn, J, Dt, w=None)
    assert np.allclose(r_next, r_gn, atol=1e-8)


def test_adaptive_weights_formula(rng):
    g = Grid1D(10)
    Dt = regularization_gradient(g)
    r = 1.0 + rng.random(10)
    phi = 0.05
    w = adaptive_weights(Dt, r, phi)
    grad = np.asarray(Dt @ r).ravel()
    assert np.allclose(w, 1.0 / (grad ** 2 + phi ** 2))


def test_data_fitting_noiseless_consistency():
    # the fitted coefficients of same-grid noiseless data match the stable
    # map up to the quadrature error amplified by the fit conditioning
    n = 199
    g = Grid1D(n)
    f = ResistivityField(np.ones(n), g)
    op = assemble_operator(f, build_difference_1d(g))
    b = source_vector(g).b
    y = simulate_response(op.A, b, T=100.0, h_T=1e-5)
    target = data_fitting_Q(y, InversionConfig(m0=4))
    assert target.m == 4
    vec = preconditioner_R(f, node_family("zolotarev", 4))
    assert np.max(np.abs(target.log_cfrac - vec)) < 0.1
    # noiseless data admits the full m = 6 model
    assert data_fitting_Q(y, InversionConfig(m0=6)).m == 6


def test_data_fitting_unusable():
    t = 1e-2 * np.arange(1, 2001)
    rng = np.random.default_rng(0)
    junk = TimeSeries(np.abs(rng.standard_normal(2000)) + 1.0, 1e-2)
    with pytest.raises(DataUnusableError):
        data_fitting_Q(junk, InversionConfig(m0=3))
    del t


def test_data_fitting_moments_reduction():
    # moments of an m=1 function at a shifted node: requested m=2 collapses
    tau = np.array([1.0 / 3.0, -1.0 / 9.0, 1.0 / 27.0, -1.0 / 81.0])  # 1/(s+1) at s=2
    cfg = InversionConfig(m0=2)
    target = data_fitting_moments(tau, 2.0, cfg)
    assert target.m == 1
    assert target.spectral[0] == pytest.approx(1.0, rel=1e-8)


def test_invert_1d_noiseless_quick():
    y = synthesize("rQ")
    g = Grid1D(99)
    cfg = InversionConfig(m0=4, n_gn=4)
    truth = phantom("rQ", g)
    rec, hist = invert_1d(y, g, cfg, r_true=truth.values)
    assert hist.m == 4
    assert hist.error[-1] < 0.05
    assert all(np.diff(hist.residual[:3]) < 0)  # early monotone decrease
    assert np.all(rec.values > 0)


def test_invert_1d_history_csv():
    y = synthesize("rQ")
    g = Grid1D(99)
    cfg = InversionConfig(m0=3, n_gn=2, keep_iterates=True)
    rec, hist = invert_1d(y, g, cfg, r_true=phantom("rQ", g).values)
    txt = hist.to_csv()
    assert txt.splitlines()[0] == "iteration,residual,error"
    assert len(hist.iterates) == len(hist.iterations)


def test_invert_2d_smoke():
    gf = Grid2D(nx=24, ny=8)
    gc = Grid2D(nx=18, ny=6)
    from dataclasses import replace

    gf = replace(gf, segments=uniform_segments(gf, 2))
    gc = replace(gc, segments=uniform_segments(gc, 2))
    truth_f = phantom("two-rect-side", gf)
    op = assemble_operator_2d(truth_f, gf)
    sources = [source_vector(gf, s).b for s in gf.segments]
    cfg = InversionConfig(m0=3, family_kind="single-node", s_hat=30.0, n_gn=1,
                          n_sources=2)
    tau = moments_from_operator(op, sources, cfg.s_hat, 2 * cfg.m0)
    truth_c = phantom("two-rect-side", gc)
    rec, hist = invert_2d(tau, gc, cfg, r_true=truth_c.values)
    assert rec.values.shape == (gc.n_cells,)
    assert np.all(rec.values > 0)
    assert hist.m == 3
    # the step reduces the coefficient misfit
    assert hist.residual[-1] <= hist.residual[0]


def test_moments_from_series_match_operator(small_system):
    grid, field, op, b = small_system
    y = simulate_response(op.A, b, T=40.0, h_T=5e-5)
    s_hat = 8.0
    tau_q = np.asarray(
        __import__("romres.laplace", fromlist=["laplace_moments"])
        .laplace_moments(y, s_hat, 4))
    tau_m = moments_from_operator(op, [b], s_hat, 4)[0]
    assert np.allclose(tau_q, tau_m, rtol=5e-3)
