"""Weak boundary conditions: slip walls, far fields and transmissive ends.

Boundary fluxes enter the semi-discrete system through surface integrals
of a numerical normal flux against the basis functions. The far-field
flux uses characteristic upwinding between the interior trace and the
free-stream state, so no strong constraints on DOFs are needed.
"""

from __future__ import annotations

import numpy as np

from . import euler
from .assembly import Operators
from .euler import GasModel, Primitive

__all__ = [
    "BoundarySpec",
    "wall_flux",
    "farfield_flux",
    "transmissive_flux",
    "assemble_boundary_term",
    "boundary_residual",
]

KINDS = ("slip_wall", "farfield", "transmissive")


class BoundarySpec:
    """Boundary kind per patch side, plus the far-field state if used."""

    def __init__(self, kinds: dict[str, str], farfield: Primitive | None = None):
        for side, kind in kinds.items():
            if kind not in KINDS:
                raise ValueError(f"unknown boundary kind {kind!r} on side {side!r}")
        if "farfield" in kinds.values() and farfield is None:
            raise ValueError("farfield boundaries require a free-stream state")
        self.kinds = dict(kinds)
        self.farfield = farfield

    @classmethod
    def uniform(cls, kind: str, sides, farfield: Primitive | None = None) -> "BoundarySpec":
        return cls({side: kind for side in sides}, farfield)


def wall_flux(U: np.ndarray, n: np.ndarray, gas: GasModel) -> np.ndarray:
    """Slip-wall flux: no mass or energy transfer, pressure on momentum."""
    p = euler.pressure(U, gas)
    if np.any(p <= 0.0):
        raise euler.InadmissibleStateError(f"non-positive wall pressure (min {np.min(p)})")
    out = np.zeros(np.broadcast(U[..., 0], n[..., 0]).shape + (U.shape[-1],))
    out[..., 1:-1] = p[..., None] * n
    return out


def transmissive_flux(U: np.ndarray, n: np.ndarray, gas: GasModel) -> np.ndarray:
    """Outflow flux equal to the normal flux of the interior trace."""
    return euler.normal_flux(U, n, gas)


def farfield_flux(U: np.ndarray, U_inf: np.ndarray, n: np.ndarray, gas: GasModel) -> np.ndarray:
    """Characteristic upwind flux between the trace and the free stream.

    Central flux average plus Roe dissipation on the jump, which reduces
    to the pure interior (free-stream) flux for supersonic outflow
    (inflow).
    """
    U_inf = np.broadcast_to(U_inf, U.shape)
    diss, _ = euler.roe_dissipation(U, U_inf, n, gas)
    central = 0.5 * (euler.normal_flux(U, n, gas) + euler.normal_flux(U_inf, n, gas))
    return central - 0.5 * diss


def _numerical_flux(kind: str, U, n, gas: GasModel, bspec: BoundarySpec):
    if kind == "slip_wall":
        return wall_flux(U, n, gas)
    if kind == "transmissive":
        return transmissive_flux(U, n, gas)
    U_inf = bspec.farfield.conservative(gas)
    return farfield_flux(U, U_inf, n, gas)


def assemble_boundary_term(U: np.ndarray, ops: Operators, bspec: BoundarySpec, gas: GasModel) -> np.ndarray:
    """Surface integrals of the numerical flux, ``S_i = oint phi_i F_n ds``.

    The trace state is the spline expansion evaluated at the boundary
    quadrature points.
    """
    S = np.zeros_like(U)
    for side, trace in ops.traces.items():
        kind = bspec.kinds[side]
        U_trace = np.einsum("qa,qav->qv", trace.phi, U[trace.active])
        F_n = _numerical_flux(kind, U_trace, trace.normals, gas, bspec)
        contrib = trace.w_ds[:, None, None] * trace.phi[:, :, None] * F_n[:, None, :]
        np.add.at(S, trace.active, contrib)
    return S


def boundary_residual(
    U: np.ndarray,
    F_nodal: np.ndarray,
    ops: Operators,
    bspec: BoundarySpec,
    gas: GasModel,
) -> np.ndarray:
    """Boundary closure of the edge-decomposed residual.

    Adds ``oint phi_i [0.5 n . (F^h + F_i) - F_n] ds`` per DOF, where
    ``F^h`` is the group-interpolated flux trace and ``F_i`` the nodal
    flux of the receiving DOF. Together with the interior edge sum this
    reproduces the divergence-form Galerkin residual with the boundary
    flux replaced by the numerical one; constant states with consistent
    boundary data give a pointwise-zero integrand.
    """
    B = np.zeros_like(U)
    for side, trace in ops.traces.items():
        kind = bspec.kinds[side]
        U_trace = np.einsum("qa,qav->qv", trace.phi, U[trace.active])
        F_n = _numerical_flux(kind, U_trace, trace.normals, gas, bspec)
        # nodal normal fluxes of the active DOFs and their interpolant
        nF_a = np.einsum("qavl,ql->qav", F_nodal[trace.active], trace.normals)
        Fh_n = np.einsum("qa,qav->qv", trace.phi, nF_a)
        integrand = 0.5 * (Fh_n[:, None, :] + nF_a) - F_n[:, None, :]
        contrib = trace.w_ds[:, None, None] * trace.phi[:, :, None] * integrand
        np.add.at(B, trace.active, contrib)
    return B
