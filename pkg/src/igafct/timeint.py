"""Explicit strong-stability-preserving RK3 stepping and the time loop."""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from .euler import GasModel, InadmissibleStateError, max_wave_speed

__all__ = [
    "TimeLoopConfig",
    "DiagnosticsRecord",
    "RunResult",
    "ssprk3_step",
    "mass_richardson_solver",
    "run",
]

SCHEMES = ("galerkin", "low_order", "fct")


def ssprk3_step(U: np.ndarray, rhs, mass, dt: float) -> np.ndarray:
    """Three-stage third-order SSP Runge-Kutta update.

    ``rhs(U)`` returns the residual; ``mass`` is either a diagonal mass
    array, ``None`` for the identity, or a callable solving ``M x = b``.
    Stage weights are ``(1; 3/4, 1/4; 1/3, 2/3)``. Failures of the
    residual evaluation are re-raised with the stage index attached.
    """
    if mass is None:
        def solve(b):
            return b
    elif callable(mass):
        solve = mass
    else:
        m = np.asarray(mass, dtype=float)
        mcol = m[:, None] if np.ndim(U) == 2 else m

        def solve(b):
            return b / mcol

    stages = []
    try:
        stages.append("1")
        U1 = U + dt * solve(rhs(U))
        stages.append("2")
        U2 = 0.75 * U + 0.25 * (U1 + dt * solve(rhs(U1)))
        stages.append("3")
        return (U + 2.0 * (U2 + dt * solve(rhs(U2)))) / 3.0
    except InadmissibleStateError as err:
        raise InadmissibleStateError(
            f"stage {stages[-1]} of the RK step failed: {err}", index=err.index
        ) from err


def mass_richardson_solver(M, m_lumped: np.ndarray, iterations: int = 5):
    """Approximate consistent-mass solver by lumped-preconditioned Richardson.

    Fixed iteration count keeps the scheme explicit and deterministic;
    adequate for the diagnostic role of the consistent-mass scheme.
    """
    minv = 1.0 / m_lumped[:, None]

    def solve(b):
        x = minv * b
        for _ in range(iterations):
            x = x + minv * (b - M @ x)
        return x

    return solve


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    min_rho: float
    min_p: float
    mass: float
    energy: float
    min_alpha: float
    mean_alpha: float
    ms_per_step: float


@dataclass
class TimeLoopConfig:
    dt: float
    t_final: float
    hook: object = None

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_final < 0.0:
            raise ValueError("t_final must be non-negative")
        if 0.0 < self.t_final < self.dt:
            raise ValueError("dt must not exceed t_final")

    def n_steps(self) -> int:
        if self.t_final == 0.0:
            return 0
        return int(np.ceil(self.t_final / self.dt - 1e-9))


@dataclass
class RunResult:
    field: object
    diagnostics: list
    failed: bool = False
    failure: str | None = None
    t_failed: float | None = None
    extras: dict = field(default_factory=dict)


def cfl_estimate(U: np.ndarray, ops, gas: GasModel, dt: float) -> float:
    """Largest edge CFL number ``(|v.n| + c) dt / distance`` at a state.

    Reported for information only; the step size is fixed by the config.
    """
    edges = ops.edges
    ok = edges.e_norm > 0.0
    if not np.any(ok):
        return 0.0
    pts = ops.geo.greville_images()
    dist = np.linalg.norm(pts[edges.j[ok]] - pts[edges.i[ok]], axis=1)
    lam_i = max_wave_speed(U[edges.i[ok]], edges.n_unit[ok], gas)
    lam_j = max_wave_speed(U[edges.j[ok]], edges.n_unit[ok], gas)
    lam = np.maximum(lam_i, lam_j)
    good = dist > 0.0
    return float((lam[good] * dt / dist[good]).max())


def run(
    field,
    scheme: str,
    ops,
    bspec,
    gas: GasModel,
    config: TimeLoopConfig,
    control_vars=("density", "pressure"),
    alpha_override: float | None = None,
    entropy_fix: float = 0.0,
) -> RunResult:
    """March a solution field to the final time with the chosen scheme.

    ``fct`` runs the full predictor / limit / correct cycle per step,
    ``low_order`` the predictor only, and ``galerkin`` the consistent-mass
    group formulation without any stabilization (a deliberately
    oscillatory reference). On an inadmissible state the loop stops and
    returns the diagnostics gathered so far together with the failure
    time.
    """
    from . import afc

    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    field = field.copy()
    n_steps = config.n_steps()
    diagnostics: list[DiagnosticsRecord] = []

    if scheme == "galerkin":
        mass_solve = mass_richardson_solver(ops.M, ops.m_lumped)

    for step in range(1, n_steps + 1):
        t_next = step * config.dt
        dt = config.dt
        if step == n_steps:
            t_next = config.t_final
            dt = config.t_final - (n_steps - 1) * config.dt
        tic = _time.perf_counter()
        try:
            if scheme == "fct":
                U_new, stats = afc.fct_step(
                    field.U, ops, bspec, gas, dt, control_vars, alpha_override, entropy_fix
                )
                min_alpha, mean_alpha = stats["min_alpha"], stats["mean_alpha"]
            elif scheme == "low_order":
                def rhs(V):
                    return afc.low_order_residual(V, ops, bspec, gas, entropy_fix)

                U_new = ssprk3_step(field.U, rhs, ops.m_lumped, dt)
                stats = {}
                min_alpha = mean_alpha = 0.0
            else:
                def rhs(V):
                    return afc.galerkin_residual(V, ops, bspec, gas)

                U_new = ssprk3_step(field.U, rhs, mass_solve, dt)
                stats = {}
                min_alpha = mean_alpha = float("nan")
        except InadmissibleStateError as err:
            return RunResult(
                field, diagnostics, failed=True,
                failure=f"step {step}: {err}", t_failed=field.t,
            )
        field.U = U_new
        field.t = t_next
        ms = (_time.perf_counter() - tic) * 1e3
        rho = field.U[:, 0]
        p = (gas.gamma - 1.0) * (
            field.U[:, -1] - 0.5 * np.sum(field.U[:, 1:-1] ** 2, axis=1) / rho
        )
        rec = DiagnosticsRecord(
            step=step,
            t=field.t,
            min_rho=float(rho.min()),
            min_p=float(p.min()),
            mass=float(ops.m_lumped @ rho),
            energy=float(ops.m_lumped @ field.U[:, -1]),
            min_alpha=min_alpha,
            mean_alpha=mean_alpha,
            ms_per_step=ms,
        )
        diagnostics.append(rec)
        if config.hook is not None:
            config.hook(rec, field, stats)
    return RunResult(field, diagnostics)
