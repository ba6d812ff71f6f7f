"""Time integrator and run-loop tests."""

import numpy as np
import pytest

from igafct import afc, timeint
from igafct.euler import GasModel, InadmissibleStateError
from igafct.timeint import TimeLoopConfig, mass_richardson_solver, run, ssprk3_step
from conftest import uniform_state

GAS = GasModel()


def test_zero_rhs_keeps_state():
    U = np.arange(12.0).reshape(4, 3) + 1.0
    out = ssprk3_step(U, lambda V: np.zeros_like(V), np.ones(4), 0.1)
    np.testing.assert_allclose(out, U, atol=1e-15)


def test_scalar_amplification_factor():
    lam = -0.7
    for dt in (0.05, 0.11, 0.37):
        z = lam * dt
        u = np.array([[1.0]])
        out = ssprk3_step(u, lambda V: lam * V, None, dt)
        expected = 1.0 + z + z**2 / 2 + z**3 / 6
        assert abs(out[0, 0] - expected) <= 1e-14


def test_third_order_convergence():
    def solve(dt):
        u = np.array([[1.0]])
        n = round(1.0 / dt)
        for _ in range(n):
            u = ssprk3_step(u, lambda V: -V, None, dt)
        return float(u[0, 0])

    e1 = abs(solve(0.05) - np.exp(-1.0))
    e2 = abs(solve(0.025) - np.exp(-1.0))
    order = np.log2(e1 / e2)
    assert order >= 2.99


def test_linear_system_matches_dense_stage_oracle():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(5, 5)) * 0.3
    m = rng.uniform(0.5, 2.0, 5)
    U = rng.normal(size=(5, 2))
    dt = 0.1
    got = ssprk3_step(U, lambda V: A @ V, m, dt)
    # dense replay of the three stages
    Minv = np.diag(1.0 / m)
    U1 = U + dt * Minv @ A @ U
    U2 = 0.75 * U + 0.25 * (U1 + dt * Minv @ A @ U1)
    expected = (U + 2.0 * (U2 + dt * Minv @ A @ U2)) / 3.0
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_rhs_failure_reports_stage():
    def bad_rhs(V):
        raise InadmissibleStateError("boom", index=3)

    with pytest.raises(InadmissibleStateError, match="stage 1"):
        ssprk3_step(np.ones((2, 2)), bad_rhs, None, 0.1)


def test_mass_richardson_converges_on_spd_system():
    import scipy.sparse as sp

    rng = np.random.default_rng(1)
    n = 20
    M = sp.eye(n) * 1.0 + sp.random(n, n, density=0.2, random_state=2) * 0.01
    M = (M + M.T) * 0.5
    m_l = np.asarray(M.sum(axis=1)).ravel()
    solve = mass_richardson_solver(M.tocsr(), m_l, iterations=30)
    b = rng.normal(size=(n, 2))
    x = solve(b)
    np.testing.assert_allclose(M @ x, b, atol=1e-8)


def test_step_count_and_truncation():
    cfg = TimeLoopConfig(dt=0.0005, t_final=0.231)
    assert cfg.n_steps() == 462
    cfg = TimeLoopConfig(dt=0.3, t_final=1.0)
    assert cfg.n_steps() == 4


def test_run_zero_final_time(square_case):
    geo, ops, bspec = square_case
    field = afc.SolutionField(uniform_state(ops.n_dofs, GAS), 0.0)
    res = run(field, "fct", ops, bspec, GAS, TimeLoopConfig(dt=0.01, t_final=0.0))
    np.testing.assert_array_equal(res.field.U, field.U)
    assert res.diagnostics == []


def test_run_reaches_exact_final_time(square_case):
    geo, ops, bspec = square_case
    field = afc.SolutionField(uniform_state(ops.n_dofs, GAS), 0.0)
    res = run(field, "low_order", ops, bspec, GAS, TimeLoopConfig(dt=0.003, t_final=0.01))
    assert len(res.diagnostics) == 4
    assert abs(res.field.t - 0.01) <= 1e-14


def test_low_order_equals_fct_with_zero_alpha(square_case):
    geo, ops, bspec = square_case
    rng = np.random.default_rng(3)
    from conftest import random_admissible

    field = afc.SolutionField(random_admissible(ops.n_dofs, 2, rng, GAS), 0.0)
    loop = TimeLoopConfig(dt=0.002, t_final=0.006)
    res_low = run(field, "low_order", ops, bspec, GAS, loop)
    res_fct0 = run(field, "fct", ops, bspec, GAS, loop, alpha_override=0.0)
    np.testing.assert_array_equal(res_low.field.U, res_fct0.field.U)


def test_unknown_scheme_rejected(square_case):
    geo, ops, bspec = square_case
    field = afc.SolutionField(uniform_state(ops.n_dofs, GAS), 0.0)
    with pytest.raises(ValueError):
        run(field, "bogus", ops, bspec, GAS, TimeLoopConfig(dt=0.01, t_final=0.01))


def test_run_returns_partial_diagnostics_on_failure(square_case):
    geo, ops, bspec = square_case
    # near-vacuum right half with a large time step blows up quickly
    x = geo.greville_images()
    from igafct.euler import conservative_from_primitive

    rho = np.where(x[:, 0] < 0.5, 1.0, 1e-4)
    p = np.where(x[:, 0] < 0.5, 1.0, 1e-5)
    U = conservative_from_primitive(rho, np.zeros((x.shape[0], 2)), p, GAS)
    field = afc.SolutionField(U, 0.0)
    res = run(field, "fct", ops, bspec, GAS, TimeLoopConfig(dt=0.05, t_final=1.0))
    assert res.failed
    assert res.failure is not None and "step" in res.failure
    assert res.t_failed is not None


def test_bitwise_determinism(square_case):
    geo, ops, bspec = square_case
    x = geo.greville_images()
    from igafct.euler import conservative_from_primitive

    rho = np.where(x[:, 0] < 0.5, 1.0, 0.125)
    p = np.where(x[:, 0] < 0.5, 1.0, 0.1)
    U = conservative_from_primitive(rho, np.zeros((x.shape[0], 2)), p, GAS)
    field = afc.SolutionField(U, 0.0)
    loop = TimeLoopConfig(dt=0.001, t_final=0.01)
    res_a = run(field, "fct", ops, bspec, GAS, loop)
    res_b = run(field, "fct", ops, bspec, GAS, loop)
    np.testing.assert_array_equal(res_a.field.U, res_b.field.U)
    for ra, rb in zip(res_a.diagnostics, res_b.diagnostics):
        assert (ra.min_rho, ra.min_p, ra.mass, ra.energy, ra.min_alpha, ra.mean_alpha) == (
            rb.min_rho, rb.min_p, rb.mass, rb.energy, rb.min_alpha, rb.mean_alpha
        )


def test_cfl_estimate_positive(square_case):
    geo, ops, bspec = square_case
    U = uniform_state(ops.n_dofs, GAS, v=(0.5, 0.0))
    cfl = timeint.cfl_estimate(U, ops, GAS, dt=0.001)
    assert cfl > 0.0
