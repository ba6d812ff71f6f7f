import numpy as np
import pytest

from igafct import assembly, geometry
from igafct.bc import BoundarySpec
from igafct.euler import GasModel, conservative_from_primitive


@pytest.fixture(scope="session")
def gas():
    return GasModel()


@pytest.fixture(scope="session")
def square_case(gas):
    """Small 2D patch with assembled operators and closed-box walls."""
    geo = geometry.make_unit_square(12, 2)
    ops = assembly.build_operators(geo)
    bspec = BoundarySpec.uniform("slip_wall", assembly.boundary_sides(2))
    return geo, ops, bspec


@pytest.fixture(scope="session")
def line_case(gas):
    """1D patch with linear elements, used by hand-computed oracles."""
    geo = geometry.make_interval(9, 1)
    ops = assembly.build_operators(geo)
    bspec = BoundarySpec.uniform("transmissive", assembly.boundary_sides(1))
    return geo, ops, bspec


def uniform_state(n, gas, rho=1.0, v=(0.0, 0.0), p=1.0):
    U = conservative_from_primitive(rho, np.asarray(v, dtype=float), p, gas)
    return np.tile(U, (n, 1))


def random_admissible(n, d, rng, gas):
    rho = rng.uniform(0.5, 1.5, n)
    v = rng.uniform(-0.3, 0.3, (n, d))
    p = rng.uniform(0.5, 1.5, n)
    return conservative_from_primitive(rho, v, p, gas)
