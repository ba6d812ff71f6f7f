"""Compressible Euler physics for an ideal polytropic gas.

States are stored as conservative arrays with the variables ordered
``(rho, rho*v_1, ..., rho*v_d, rho*E)`` along the last axis. All
functions broadcast over leading axes so they apply equally to a single
state and to per-DOF or per-edge batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GasModel",
    "Primitive",
    "RoeState",
    "InadmissibleStateError",
    "pressure",
    "primitive_from_conservative",
    "conservative_from_primitive",
    "flux",
    "normal_flux",
    "sound_speed",
    "max_wave_speed",
    "roe_average",
    "jacobian_normal",
    "eig_decompose",
    "roe_dissipation",
]


@dataclass(frozen=True)
class GasModel:
    """Ideal polytropic gas; ``gamma`` is the heat capacity ratio."""

    gamma: float = 1.4

    def __post_init__(self) -> None:
        if self.gamma <= 1.0:
            raise ValueError("gamma must exceed 1")


@dataclass(frozen=True)
class Primitive:
    """Primitive description of a single state: density, velocity, pressure."""

    rho: float
    v: tuple
    p: float

    def conservative(self, gas: GasModel) -> np.ndarray:
        v = np.asarray(self.v, dtype=float)
        return conservative_from_primitive(self.rho, v, self.p, gas)


class InadmissibleStateError(RuntimeError):
    """A state with non-positive density or pressure was encountered."""

    def __init__(self, message: str, index=None, time=None):
        super().__init__(message)
        self.index = index
        self.time = time


def _check_rho(rho) -> None:
    if np.any(rho <= 0.0):
        idx = int(np.argmin(rho)) if np.ndim(rho) else None
        raise InadmissibleStateError(f"non-positive density (min {np.min(rho)})", index=idx)


def pressure(U: np.ndarray, gas: GasModel) -> np.ndarray:
    """Pressure from the ideal-gas law, ``(gamma-1)(rho E - rho |v|^2 / 2)``."""
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    _check_rho(rho)
    kinetic = 0.5 * np.sum(U[..., 1:-1] ** 2, axis=-1) / rho
    return (gas.gamma - 1.0) * (U[..., -1] - kinetic)


def primitive_from_conservative(U: np.ndarray, gas: GasModel):
    """Split a conservative state into ``(rho, v, p)``."""
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    _check_rho(rho)
    v = U[..., 1:-1] / rho[..., None]
    p = (gas.gamma - 1.0) * (U[..., -1] - 0.5 * rho * np.sum(v * v, axis=-1))
    return rho, v, p


def conservative_from_primitive(rho, v, p, gas: GasModel) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    rhoE = p / (gas.gamma - 1.0) + 0.5 * rho * np.sum(v * v, axis=-1)
    return np.concatenate(
        [rho[..., None], rho[..., None] * v, rhoE[..., None]], axis=-1
    )


def flux(U: np.ndarray, gas: GasModel) -> np.ndarray:
    """Inviscid flux tensor, shape ``(..., d + 2, d)``."""
    rho, v, p = primitive_from_conservative(U, gas)
    if np.any(p <= 0.0):
        idx = int(np.argmin(p)) if np.ndim(p) else None
        raise InadmissibleStateError(f"non-positive pressure (min {np.min(p)})", index=idx)
    d = v.shape[-1]
    out = np.empty(U.shape + (d,))
    out[..., 0, :] = rho[..., None] * v
    mom = rho[..., None, None] * v[..., :, None] * v[..., None, :]
    mom += p[..., None, None] * np.eye(d)
    out[..., 1:-1, :] = mom
    out[..., -1, :] = (U[..., -1] + p)[..., None] * v
    return out


def normal_flux(U: np.ndarray, n: np.ndarray, gas: GasModel) -> np.ndarray:
    """Flux contracted with a direction vector, ``F(U) . n``."""
    return np.einsum("...kl,...l->...k", flux(U, gas), np.asarray(n, dtype=float))


def sound_speed(U: np.ndarray, gas: GasModel) -> np.ndarray:
    rho, _, p = primitive_from_conservative(U, gas)
    if np.any(p <= 0.0):
        raise InadmissibleStateError(f"non-positive pressure (min {np.min(p)})")
    return np.sqrt(gas.gamma * p / rho)


def max_wave_speed(U: np.ndarray, n: np.ndarray, gas: GasModel) -> np.ndarray:
    """Spectral radius ``|v . n| + c`` of the directional flux Jacobian."""
    _, v, _ = primitive_from_conservative(U, gas)
    vn = np.einsum("...l,...l->...", v, np.asarray(n, dtype=float))
    return np.abs(vn) + sound_speed(U, gas)


@dataclass(frozen=True)
class RoeState:
    """Density-averaged intermediate state (velocity, total enthalpy, sound speed)."""

    rho: np.ndarray
    v: np.ndarray
    H: np.ndarray
    c: np.ndarray


def roe_average(U_i: np.ndarray, U_j: np.ndarray, gas: GasModel) -> RoeState:
    """Square-root-of-density weighted average of two admissible states."""
    rho_i, v_i, p_i = primitive_from_conservative(U_i, gas)
    rho_j, v_j, p_j = primitive_from_conservative(U_j, gas)
    if np.any(p_i <= 0.0) or np.any(p_j <= 0.0):
        raise InadmissibleStateError("non-positive pressure in Roe average input")
    H_i = (np.asarray(U_i)[..., -1] + p_i) / rho_i
    H_j = (np.asarray(U_j)[..., -1] + p_j) / rho_j
    w = np.sqrt(rho_j / rho_i)
    denom = 1.0 + w
    v = (v_i + w[..., None] * v_j) / denom[..., None]
    H = (H_i + w * H_j) / denom
    c2 = (gas.gamma - 1.0) * (H - 0.5 * np.sum(v * v, axis=-1))
    if np.any(c2 <= 0.0):
        raise InadmissibleStateError("Roe-averaged sound speed is not real")
    return RoeState(rho=np.sqrt(rho_i * rho_j), v=v, H=H, c=np.sqrt(c2))


def jacobian_normal(v: np.ndarray, H: np.ndarray, n: np.ndarray, gas: GasModel) -> np.ndarray:
    """Directional flux Jacobian ``A(n) = sum_l n_l dF^l/dU`` for given (v, H).

    Works for a single state; used as the analytic reference for the
    eigendecomposition and for upwind checks.
    """
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    d = v.size
    g1 = gas.gamma - 1.0
    q2 = float(v @ v)
    vn = float(v @ n)
    A = np.zeros((d + 2, d + 2))
    A[0, 1:-1] = n
    for k in range(d):
        A[1 + k, 0] = 0.5 * g1 * q2 * n[k] - v[k] * vn
        for l in range(d):
            A[1 + k, 1 + l] = v[k] * n[l] + vn * (1.0 if k == l else 0.0) - g1 * n[k] * v[l]
        A[1 + k, -1] = g1 * n[k]
    A[-1, 0] = (0.5 * g1 * q2 - H) * vn
    A[-1, 1:-1] = H * n - g1 * vn * v
    A[-1, -1] = gas.gamma * vn
    return A


def _tangents(n: np.ndarray) -> list[np.ndarray]:
    """Orthonormal completion of a unit direction (empty in 1D)."""
    d = n.size
    if d == 1:
        return []
    if d == 2:
        return [np.array([-n[1], n[0]])]
    basis = [n]
    for e in np.eye(d):
        w = e - sum((e @ b) * b for b in basis)
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            basis.append(w / norm)
        if len(basis) == d:
            break
    return basis[1:]


def eig_decompose(roe: RoeState, n: np.ndarray, gas: GasModel):
    """Eigendecomposition ``A(n) = R diag(lam) R^{-1}`` at a Roe state.

    Returns ``(R, lam, Rinv)`` with the eigenvalues ordered
    ``(vn - c, vn, ..., vn, vn + c)``.
    """
    n = np.asarray(n, dtype=float)
    v = np.asarray(roe.v, dtype=float)
    c = float(roe.c)
    H = float(roe.H)
    if not c > 0.0:
        raise InadmissibleStateError("degenerate sound speed in eigendecomposition")
    d = v.size
    vn = float(v @ n)
    q2 = float(v @ v)
    lam = np.concatenate([[vn - c], np.full(d, vn), [vn + c]])
    R = np.zeros((d + 2, d + 2))
    R[0, 0] = 1.0
    R[1:-1, 0] = v - c * n
    R[-1, 0] = H - c * vn
    R[0, 1] = 1.0
    R[1:-1, 1] = v
    R[-1, 1] = 0.5 * q2
    for k, t in enumerate(_tangents(n)):
        R[1:-1, 2 + k] = t
        R[-1, 2 + k] = float(v @ t)
    R[0, -1] = 1.0
    R[1:-1, -1] = v + c * n
    R[-1, -1] = H + c * vn
    return R, lam, np.linalg.inv(R)


def roe_dissipation(
    U_i: np.ndarray,
    U_j: np.ndarray,
    n: np.ndarray,
    gas: GasModel,
    entropy_fix: float = 0.0,
):
    """Upwind dissipation ``|A_roe(n)| (U_j - U_i)`` for batches of pairs.

    Implemented through the characteristic wave decomposition so no
    matrices are formed; exact for the Roe linearization. ``entropy_fix``
    optionally applies a Harten-type parabolic floor ``eps * c`` to the
    wave speeds (disabled by default). Also returns the Roe state.
    """
    U_i = np.asarray(U_i, dtype=float)
    U_j = np.asarray(U_j, dtype=float)
    n = np.asarray(n, dtype=float)
    rho_i, v_i, p_i = primitive_from_conservative(U_i, gas)
    rho_j, v_j, p_j = primitive_from_conservative(U_j, gas)
    if np.any(p_i <= 0.0) or np.any(p_j <= 0.0):
        raise InadmissibleStateError(
            f"non-positive pressure in dissipation input (min {min(np.min(p_i), np.min(p_j))})"
        )
    H_i = (U_i[..., -1] + p_i) / rho_i
    H_j = (U_j[..., -1] + p_j) / rho_j
    w = np.sqrt(rho_j / rho_i)
    denom = 1.0 + w
    rho = np.sqrt(rho_i * rho_j)
    v = (v_i + w[..., None] * v_j) / denom[..., None]
    H = (H_i + w * H_j) / denom
    c2 = (gas.gamma - 1.0) * (H - 0.5 * np.sum(v * v, axis=-1))
    if np.any(c2 <= 0.0):
        raise InadmissibleStateError("Roe-averaged sound speed is not real")
    c = np.sqrt(c2)

    vn = np.einsum("...l,...l->...", v, n)
    drho = rho_j - rho_i
    dp = p_j - p_i
    dv = v_j - v_i
    dvn = np.einsum("...l,...l->...", dv, n)

    a_minus = (dp - rho * c * dvn) / (2.0 * c2)
    a_plus = (dp + rho * c * dvn) / (2.0 * c2)
    a_ent = drho - dp / c2

    w_minus = np.abs(vn - c)
    w_mid = np.abs(vn)
    w_plus = np.abs(vn + c)
    if entropy_fix > 0.0:
        delta = entropy_fix * c
        for arr in (w_minus, w_mid, w_plus):
            small = arr < delta
            arr[small] = 0.5 * (arr[small] ** 2 / delta[small] + delta[small])

    out = np.empty_like(U_i)
    # acoustic waves
    coef_m = w_minus * a_minus
    coef_p = w_plus * a_plus
    out[..., 0] = coef_m + coef_p
    out[..., 1:-1] = coef_m[..., None] * (v - c[..., None] * n) + coef_p[..., None] * (
        v + c[..., None] * n
    )
    out[..., -1] = coef_m * (H - c * vn) + coef_p * (H + c * vn)
    # entropy wave
    coef_e = w_mid * a_ent
    out[..., 0] += coef_e
    out[..., 1:-1] += coef_e[..., None] * v
    out[..., -1] += coef_e * 0.5 * np.sum(v * v, axis=-1)
    # shear waves, combined into a single tangential contribution
    dvt = dv - dvn[..., None] * n
    coef_s = w_mid * rho
    out[..., 1:-1] += coef_s[..., None] * dvt
    out[..., -1] += coef_s * np.einsum("...l,...l->...", v, dvt)
    roe = RoeState(rho=rho, v=v, H=H, c=c)
    return out, roe
