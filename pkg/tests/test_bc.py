"""Boundary flux and boundary term tests."""

import numpy as np
import pytest

from igafct import afc, assembly, bc, geometry
from igafct.bc import BoundarySpec, assemble_boundary_term, farfield_flux, wall_flux
from igafct.euler import (
    GasModel,
    Primitive,
    conservative_from_primitive,
    normal_flux,
)

GAS = GasModel()


def _state(rho, v, p):
    return conservative_from_primitive(rho, np.atleast_1d(np.asarray(v, float)), p, GAS)


def test_wall_flux_rest_state():
    U = _state(1.0, (0.0, 0.0), 1.0)
    n = np.array([1.0, 0.0])
    np.testing.assert_allclose(wall_flux(U, n, GAS), [0.0, 1.0, 0.0, 0.0], atol=1e-15)


def test_wall_flux_tangential_flow_matches_full_flux():
    # velocity orthogonal to the normal: the wall flux is the exact normal flux
    U = _state(1.2, (0.0, 0.7), 0.9)
    n = np.array([1.0, 0.0])
    np.testing.assert_allclose(wall_flux(U, n, GAS), normal_flux(U, n, GAS), atol=1e-12)


def test_wall_flux_linear_in_pressure():
    n = np.array([0.0, 1.0])
    f1 = wall_flux(_state(1.0, (0.0, 0.0), 1.0), n, GAS)
    f2 = wall_flux(_state(1.0, (0.0, 0.0), 2.0), n, GAS)
    np.testing.assert_allclose(f2, 2.0 * f1, atol=1e-14)


def test_farfield_zero_jump():
    U = _state(1.0, (0.4, -0.2), 0.8)
    n = np.array([0.6, 0.8])
    got = farfield_flux(U, U, n, GAS)
    np.testing.assert_allclose(got, normal_flux(U, n, GAS), atol=1e-13)


def test_farfield_supersonic_outflow():
    U = _state(1.0, (3.0, 0.0), 1.0)  # v.n = 3 > c
    U_inf = _state(0.9, (2.5, 0.1), 0.9)
    n = np.array([1.0, 0.0])
    got = farfield_flux(U, U_inf, n, GAS)
    np.testing.assert_allclose(got, normal_flux(U, n, GAS), atol=1e-12)


def test_farfield_supersonic_inflow():
    U = _state(1.0, (-3.0, 0.0), 1.0)  # v.n = -3 < -c
    U_inf = _state(0.9, (-2.5, 0.1), 0.9)
    n = np.array([1.0, 0.0])
    got = farfield_flux(U, U_inf, n, GAS)
    np.testing.assert_allclose(got, normal_flux(U_inf, n, GAS), atol=1e-12)


@pytest.fixture(scope="module")
def square():
    geo = geometry.make_unit_square(10, 2)
    return geo, assembly.build_operators(geo)


def test_closed_box_pressure_integral(square):
    geo, ops = square
    bspec = BoundarySpec.uniform("slip_wall", assembly.boundary_sides(2))
    U = np.tile(_state(1.0, (0.0, 0.0), 1.0), (ops.n_dofs, 1))
    S = assemble_boundary_term(U, ops, bspec, GAS)
    # pressure on opposite walls cancels in the total
    np.testing.assert_allclose(S.sum(axis=0)[1:3], 0.0, atol=1e-10)
    # individual boundary rows do carry pressure load
    assert np.abs(S[:, 1:3]).max() > 1e-3


def test_boundary_term_locality(square):
    geo, ops = square
    bspec = BoundarySpec.uniform("slip_wall", assembly.boundary_sides(2))
    rng = np.random.default_rng(0)
    from conftest import random_admissible

    U = random_admissible(ops.n_dofs, 2, rng, GAS)
    S = assemble_boundary_term(U, ops, bspec, GAS)
    shape = geo.basis.shape
    for flat in range(ops.n_dofs):
        i0, i1 = geo.basis.multi_index(flat)
        on_boundary = i0 in (0, shape[0] - 1) or i1 in (0, shape[1] - 1)
        if not on_boundary:
            assert np.all(S[flat] == 0.0)


def test_transmissive_constant_state_surface_integral(square):
    geo, ops = square
    U_const = _state(1.0, (0.3, -0.4), 0.7)
    U = np.tile(U_const, (ops.n_dofs, 1))
    # constant state on the unit square: the four side integrals cancel exactly
    bspec = BoundarySpec.uniform("transmissive", assembly.boundary_sides(2))
    S = assemble_boundary_term(U, ops, bspec, GAS)
    np.testing.assert_allclose(S.sum(axis=0), 0.0, atol=1e-12)


def test_transmissive_exact_integral_1d():
    geo = geometry.make_interval(7, 2, a=0.0, b=1.0)
    ops = assembly.build_operators(geo)
    bspec = BoundarySpec.uniform("transmissive", assembly.boundary_sides(1))
    U_const = _state(1.0, 0.5, 0.8)
    U = np.tile(U_const, (ops.n_dofs, 1))
    S = assemble_boundary_term(U, ops, bspec, GAS)
    f = normal_flux(U_const, np.array([1.0]), GAS)
    # clamped ends: only the corner DOFs receive the endpoint fluxes
    np.testing.assert_allclose(S[0], -f, atol=1e-14)
    np.testing.assert_allclose(S[-1], f, atol=1e-14)
    np.testing.assert_allclose(S[1:-1], 0.0, atol=1e-14)


def test_free_stream_preservation(square):
    geo, ops = square
    prim = Primitive(1.0, (0.35, -0.2), 0.8)
    bspec = BoundarySpec.uniform("farfield", assembly.boundary_sides(2), prim)
    U = np.tile(prim.conservative(GAS), (ops.n_dofs, 1))
    R = afc.galerkin_residual(U, ops, bspec, GAS)
    assert np.abs(R).max() <= 1e-11


def test_conservation_accounting(square):
    # total rate of change equals the negative total boundary flux
    geo, ops = square
    prim = Primitive(1.0, (0.1, 0.05), 1.0)
    bspec = BoundarySpec.uniform("farfield", assembly.boundary_sides(2), prim)
    rng = np.random.default_rng(1)
    from conftest import random_admissible

    U = random_admissible(ops.n_dofs, 2, rng, GAS)
    R = afc.low_order_residual(U, ops, bspec, GAS)
    S = assemble_boundary_term(U, ops, bspec, GAS)
    total_R = R.sum(axis=0)
    total_S = S.sum(axis=0)
    scale = max(1.0, np.abs(total_S).max())
    np.testing.assert_allclose(total_R, -total_S, atol=1e-9 * scale)


def test_boundary_spec_validation():
    with pytest.raises(ValueError):
        BoundarySpec({"west": "bogus"})
    with pytest.raises(ValueError):
        BoundarySpec({"west": "farfield"})  # missing free-stream state
