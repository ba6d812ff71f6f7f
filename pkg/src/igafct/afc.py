"""Algebraic flux correction of predictor-corrector type.

The pipeline per time step:

1. a low-order predictor obtained by adding edge-wise Roe upwind
   dissipation to the group Galerkin residual and integrating with the
   lumped mass matrix,
2. antidiffusive edge fluxes linearized around the predicted solution
   and its rate,
3. synchronized multidimensional flux limiting on scalar control
   variables (density and pressure), producing one symmetric correction
   factor per edge,
4. the limited correction applied to the predictor coefficients.

Because B-Spline basis functions are non-negative and sum to one, the
coefficient bounds enforced by the limiter carry over to the spline
field pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bc as bc_mod
from . import euler
from .assembly import EdgeSet, Operators
from .euler import GasModel, InadmissibleStateError

__all__ = [
    "SolutionField",
    "LimiterWorkspace",
    "LimiterError",
    "CONTROL_VARIABLES",
    "nodal_flux",
    "galerkin_residual",
    "viscosity_matrix",
    "edge_dissipation",
    "low_order_residual",
    "predictor_step",
    "antidiffusive_fluxes",
    "compute_bounds",
    "control_values",
    "transformed_flux",
    "zalesak_alpha",
    "limit",
    "correct",
    "fct_step",
]

CONTROL_VARIABLES = ("density", "pressure")


@dataclass
class SolutionField:
    """Spline coefficients of the conservative variables, shape (N, d+2)."""

    U: np.ndarray
    t: float = 0.0

    def copy(self) -> "SolutionField":
        return SolutionField(self.U.copy(), self.t)


class LimiterError(RuntimeError):
    """The corrected solution violated the limiter bounds (internal bug)."""


def nodal_flux(U: np.ndarray, gas: GasModel) -> np.ndarray:
    """Flux tensor evaluated at every DOF coefficient (group interpolation)."""
    return euler.flux(U, gas)


def galerkin_residual(
    U: np.ndarray, ops: Operators, bspec: bc_mod.BoundarySpec, gas: GasModel
) -> np.ndarray:
    """Group Galerkin residual in edge-difference form plus boundary closure.

    Interior part: ``sum_{j != i} e_ij . (F_j - F_i)`` over the edge set;
    the boundary closure makes the total match the divergence-form
    residual with the numerical boundary flux, so uniform states with
    consistent boundary data produce an exactly zero residual.
    """
    edges = ops.edges
    F = nodal_flux(U, gas)
    Fdiff = F[edges.j] - F[edges.i]
    r_e = np.einsum("el,evl->ev", edges.e, Fdiff)
    R = edges.scatter_both(r_e, ops.n_dofs)
    R += bc_mod.boundary_residual(U, F, ops, bspec, gas)
    return R


def viscosity_matrix(
    e_vec: np.ndarray, U_i: np.ndarray, U_j: np.ndarray, gas: GasModel, entropy_fix: float = 0.0
) -> np.ndarray:
    """Edge dissipation tensor ``|e| R |Lambda| R^{-1}`` at the Roe average.

    Explicit matrix form for a single edge; zero-length coefficient
    vectors produce the zero matrix.
    """
    e_vec = np.asarray(e_vec, dtype=float)
    norm = np.linalg.norm(e_vec)
    d = e_vec.size
    if norm == 0.0:
        return np.zeros((d + 2, d + 2))
    roe = euler.roe_average(U_i, U_j, gas)
    R, lam, Rinv = euler.eig_decompose(roe, e_vec / norm, gas)
    wave = np.abs(lam)
    if entropy_fix > 0.0:
        delta = entropy_fix * float(roe.c)
        small = wave < delta
        wave[small] = 0.5 * (wave[small] ** 2 / delta + delta)
    return norm * (R * wave) @ Rinv


def edge_dissipation(
    U: np.ndarray, edges: EdgeSet, gas: GasModel, entropy_fix: float = 0.0
):
    """Per-edge dissipation ``D_ij (U_j - U_i)`` for all edges at once.

    Returns the (n_edges, d+2) array together with the per-edge Roe
    states. Matrix-free evaluation through the wave decomposition.
    """
    if edges.all_active:
        diss, roe = euler.roe_dissipation(
            U[edges.i], U[edges.j], edges.n_unit, gas, entropy_fix
        )
        return edges.e_norm[:, None] * diss, roe.v
    d_e = np.zeros((edges.n_edges, U.shape[1]))
    roe_v = np.zeros((edges.n_edges, U.shape[1] - 2))
    act = edges.active
    diss, roe = euler.roe_dissipation(
        U[edges.i[act]], U[edges.j[act]], edges.n_unit[act], gas, entropy_fix
    )
    d_e[act] = edges.e_norm[act, None] * diss
    roe_v[act] = roe.v
    return d_e, roe_v


def low_order_residual(
    U: np.ndarray,
    ops: Operators,
    bspec: bc_mod.BoundarySpec,
    gas: GasModel,
    entropy_fix: float = 0.0,
    return_edge_dissipation: bool = False,
):
    """Galerkin residual augmented with edge-wise upwind dissipation."""
    R = galerkin_residual(U, ops, bspec, gas)
    d_e, roe_v = edge_dissipation(U, ops.edges, gas, entropy_fix)
    R += ops.edges.scatter_signed(d_e, ops.n_dofs)
    if return_edge_dissipation:
        return R, d_e, roe_v
    return R


def predictor_step(
    U: np.ndarray,
    ops: Operators,
    bspec: bc_mod.BoundarySpec,
    gas: GasModel,
    dt: float,
    entropy_fix: float = 0.0,
):
    """Advance the low-order scheme one step and return its rate.

    Returns ``(U_pred, Udot, d_e_pred, roe_v_pred)`` where ``Udot`` is the
    lumped-mass rate of the predicted solution and ``d_e_pred`` the edge
    dissipation evaluated at the prediction (reused by the antidiffusive
    fluxes).
    """
    from .timeint import ssprk3_step

    def rhs(V):
        return low_order_residual(V, ops, bspec, gas, entropy_fix)

    U_pred = ssprk3_step(U, rhs, ops.m_lumped, dt)
    R_pred, d_e_pred, roe_v_pred = low_order_residual(
        U_pred, ops, bspec, gas, entropy_fix, return_edge_dissipation=True
    )
    Udot = R_pred / ops.m_lumped[:, None]
    return U_pred, Udot, d_e_pred, roe_v_pred


def antidiffusive_fluxes(
    U_pred: np.ndarray,
    Udot: np.ndarray,
    edges: EdgeSet,
    gas: GasModel,
    d_e_pred: np.ndarray | None = None,
    entropy_fix: float = 0.0,
) -> np.ndarray:
    """Raw antidiffusive flux per edge (oriented from j to i).

    ``F_ij = m_ij (Udot_i - Udot_j) + D_ij (U_pred_i - U_pred_j)`` with the
    dissipation tensor evaluated at the predicted Roe averages; the
    reversed orientation is the negative.
    """
    if d_e_pred is None:
        d_e_pred, _ = edge_dissipation(U_pred, edges, gas, entropy_fix)
    return edges.m_ij[:, None] * (Udot[edges.i] - Udot[edges.j]) - d_e_pred


def control_values(U: np.ndarray, gas: GasModel, var: str) -> np.ndarray:
    if var == "density":
        return U[:, 0]
    if var == "pressure":
        return euler.pressure(U, gas)
    raise ValueError(f"unknown control variable {var!r}")


def compute_bounds(u: np.ndarray, edges: EdgeSet):
    """Per-DOF min/max of a control variable over the edge stencil.

    The stencil is every DOF with overlapping support plus the DOF
    itself, so the bounds always bracket the local value.
    """
    return edges.neighbor_min_max(u)


def transformed_flux(
    F: np.ndarray, var: str, roe_v: np.ndarray, gas: GasModel
) -> np.ndarray:
    """Project conservative edge fluxes onto a scalar control variable.

    Density is the first component. Pressure uses the ideal-gas law
    linearized at the edge Roe velocity:
    ``dp = (gamma-1) (dE - v . dm + 0.5 |v|^2 drho)``.
    """
    if var == "density":
        return F[:, 0]
    if var == "pressure":
        g1 = gas.gamma - 1.0
        vdm = np.einsum("el,el->e", roe_v, F[:, 1:-1])
        q2 = np.einsum("el,el->e", roe_v, roe_v)
        return g1 * (F[:, -1] - vdm + 0.5 * q2 * F[:, 0])
    raise ValueError(f"unknown control variable {var!r}")


def zalesak_alpha(
    f: np.ndarray,
    u: np.ndarray,
    umin: np.ndarray,
    umax: np.ndarray,
    m_lumped: np.ndarray,
    dt: float,
    edges: EdgeSet,
) -> np.ndarray:
    """Symmetric limiting factors for one scalar control variable.

    Classic multidimensional construction: per-DOF sums of positive and
    negative incident fluxes (P), admissible increments towards the local
    bounds (Q), nodal factors ``R = min(1, Q/P)`` with ``R = 1`` when
    there is nothing to limit, combined per edge by the upwind-side
    minimum.
    """
    n = m_lumped.size
    fi = f
    fj = -f
    P_plus = (
        np.bincount(edges.i, weights=np.maximum(fi, 0.0), minlength=n)
        + np.bincount(edges.j, weights=np.maximum(fj, 0.0), minlength=n)
    )
    P_minus = (
        np.bincount(edges.i, weights=np.minimum(fi, 0.0), minlength=n)
        + np.bincount(edges.j, weights=np.minimum(fj, 0.0), minlength=n)
    )
    Q_plus = m_lumped * (umax - u) / dt
    Q_minus = m_lumped * (umin - u) / dt
    R_plus = np.ones(n)
    R_minus = np.ones(n)
    # flux sums that would change u by under ~1e-13 relative in one step are
    # roundoff noise and fall under the nothing-to-limit convention
    eps = 1e-13 * max(float(np.abs(u).max(initial=0.0)), 1e-300) * m_lumped / dt
    pos = P_plus > eps
    R_plus[pos] = np.minimum(1.0, Q_plus[pos] / P_plus[pos])
    neg = P_minus < -eps
    R_minus[neg] = np.minimum(1.0, Q_minus[neg] / P_minus[neg])

    alpha = np.ones(edges.n_edges)
    up = f > 0.0
    alpha[up] = np.minimum(R_plus[edges.i[up]], R_minus[edges.j[up]])
    down = f < 0.0
    alpha[down] = np.minimum(R_minus[edges.i[down]], R_plus[edges.j[down]])
    return alpha + 0.0  # normalizes negative zeros


@dataclass
class LimiterWorkspace:
    """Per-step limiter state kept for diagnostics and tests."""

    fluxes: np.ndarray
    alpha: np.ndarray
    bounds: dict = field(default_factory=dict)       # var -> (umin, umax)
    per_var_alpha: dict = field(default_factory=dict)
    failsafe_passes: int = 0


def limit(
    F: np.ndarray,
    U_pred: np.ndarray,
    edges: EdgeSet,
    m_lumped: np.ndarray,
    dt: float,
    gas: GasModel,
    control_vars=CONTROL_VARIABLES,
    roe_v: np.ndarray | None = None,
    failsafe: bool = True,
) -> tuple[np.ndarray, LimiterWorkspace]:
    """Correction factors per edge, synchronized over the control variables.

    ``alpha`` is the minimum of the per-variable factors. The optional
    failsafe stage re-checks the nonlinear control variables after the
    tentative correction and removes the antidiffusion from edges
    touching any DOF that still leaves its bounds, which the linearized
    pressure projection alone cannot strictly rule out.
    """
    if roe_v is None:
        ok = edges.e_norm > 0.0
        roe_v = np.zeros((edges.n_edges, U_pred.shape[1] - 2))
        if np.any(ok):
            roe = euler.roe_average(U_pred[edges.i[ok]], U_pred[edges.j[ok]], gas)
            roe_v[ok] = roe.v
    ws = LimiterWorkspace(fluxes=F, alpha=np.ones(edges.n_edges))
    for var in control_vars:
        u = control_values(U_pred, gas, var)
        umin, umax = compute_bounds(u, edges)
        f_u = transformed_flux(F, var, roe_v, gas)
        a_u = zalesak_alpha(f_u, u, umin, umax, m_lumped, dt, edges)
        ws.bounds[var] = (umin, umax)
        ws.per_var_alpha[var] = a_u
        ws.alpha = np.minimum(ws.alpha, a_u)

    if failsafe:
        scale = max(1.0, float(np.abs(U_pred).max()))
        for _ in range(50):
            U_new = U_pred + (dt / m_lumped[:, None]) * edges.scatter_signed(
                ws.alpha[:, None] * F, m_lumped.size
            )
            bad = np.zeros(m_lumped.size, dtype=bool)
            for var in control_vars:
                umin, umax = ws.bounds[var]
                u_new = control_values(U_new, gas, var)
                bad |= (u_new < umin - 1e-12 * scale) | (u_new > umax + 1e-12 * scale)
            if not bad.any():
                break
            ws.failsafe_passes += 1
            kill = bad[edges.i] | bad[edges.j]
            ws.alpha[kill] = 0.0
    return ws.alpha, ws


def correct(
    U_pred: np.ndarray,
    alpha: np.ndarray,
    F: np.ndarray,
    edges: EdgeSet,
    m_lumped: np.ndarray,
    dt: float,
    gas: GasModel | None = None,
    bounds: dict | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Apply the limited antidiffusive correction to the predictor.

    With ``bounds`` given (mapping control variable to its (min, max)
    arrays) the corrected coefficients are verified against them; a
    violation beyond ``tol`` indicates a limiter defect and raises.
    """
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (edges.n_edges,))
    corr = edges.scatter_signed(alpha[:, None] * F, m_lumped.size)
    U_new = U_pred + (dt / m_lumped[:, None]) * corr
    if bounds:
        for var, (umin, umax) in bounds.items():
            u_new = control_values(U_new, gas, var)
            lo = np.min(u_new - umin)
            hi = np.max(u_new - umax)
            if lo < -tol or hi > tol:
                raise LimiterError(
                    f"corrected {var} leaves its bounds "
                    f"(under {min(lo, 0.0):.3e}, over {max(hi, 0.0):.3e})"
                )
    return U_new


def fct_step(
    U: np.ndarray,
    ops: Operators,
    bspec: bc_mod.BoundarySpec,
    gas: GasModel,
    dt: float,
    control_vars=CONTROL_VARIABLES,
    alpha_override: float | None = None,
    entropy_fix: float = 0.0,
):
    """One full predictor / limit / correct cycle.

    Returns the end-of-step coefficients and a stats dict with limiter
    and predictor diagnostics. ``alpha_override`` replaces the limiter
    output by a constant factor (testing aid; 0 reproduces the pure
    low-order step).
    """
    U_pred, Udot, d_e_pred, roe_v = predictor_step(U, ops, bspec, gas, dt, entropy_fix)
    min_rho_pred = float(U_pred[:, 0].min())
    min_p_pred = float(euler.pressure(U_pred, gas).min())
    F = antidiffusive_fluxes(U_pred, Udot, ops.edges, gas, d_e_pred, entropy_fix)
    if alpha_override is None:
        alpha, ws = limit(F, U_pred, ops.edges, ops.m_lumped, dt, gas, control_vars, roe_v)
        bounds = ws.bounds
        if alpha.size and not (alpha.min() >= 0.0 and alpha.max() <= 1.0):
            raise LimiterError(
                f"correction factors out of range [{alpha.min()}, {alpha.max()}]"
            )
    else:
        alpha = np.full(ops.edges.n_edges, float(alpha_override))
        ws = None
        bounds = None
    U_new = correct(U_pred, alpha, F, ops.edges, ops.m_lumped, dt, gas, bounds)
    stats = {
        "min_alpha": float(alpha.min()) if alpha.size else 1.0,
        "mean_alpha": float(alpha.mean()) if alpha.size else 1.0,
        "min_rho_pred": min_rho_pred,
        "min_p_pred": min_p_pred,
        "workspace": ws,
    }
    return U_new, stats
