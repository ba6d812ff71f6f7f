"""Patch geometry: spline mappings, Jacobians and Gauss quadrature.

A :class:`GeometryMap` carries a tensor B-Spline basis together with one
control point per DOF and represents the mapping from the reference
domain ``[0, 1]^d`` onto the physical patch. Geometry and solution share
the same basis (isoparametric setup).
"""

from __future__ import annotations

import itertools

import numpy as np

from .splines import KnotVector, TensorBasis, open_uniform_knots

__all__ = [
    "GeometryError",
    "QuadratureRule",
    "GeometryMap",
    "build_quadrature",
    "make_unit_square",
    "make_ubend",
    "make_interval",
    "save_patch",
    "load_patch",
    "patch_area",
]


class GeometryError(RuntimeError):
    """Raised when a patch mapping is invalid (degenerate Jacobian)."""


class DirectionRule:
    """Gauss-Legendre points per non-empty knot span of one direction."""

    def __init__(self, kv: KnotVector, q: int) -> None:
        if q < 1:
            raise ValueError("need at least one quadrature point per span")
        ref_pts, ref_wts = np.polynomial.legendre.leggauss(q)
        spans = kv.spans()
        self.q = q
        self.spans = np.array([s for s, _, _ in spans], dtype=np.int64)
        lefts = np.array([a for _, a, _ in spans])
        rights = np.array([b for _, _, b in spans])
        half = 0.5 * (rights - lefts)
        self.points = lefts[:, None] + half[:, None] * (ref_pts[None, :] + 1.0)
        self.weights = np.broadcast_to(ref_wts[None, :], self.points.shape) * half[:, None]
        self.first_active = self.spans - kv.degree
        # basis values/derivatives at all quadrature points, per span
        _, vals, ders = kv.eval_many(self.points.ravel(), deriv=True)
        nloc = kv.degree + 1
        self.basis = vals.reshape(len(spans), q, nloc)
        self.basis_deriv = ders.reshape(len(spans), q, nloc)


class QuadratureRule:
    """Per-direction span-wise Gauss rules on the reference domain."""

    def __init__(self, basis: TensorBasis, q: int) -> None:
        self.q = q
        self.axes = [DirectionRule(kv, q) for kv in basis.axes]

    @property
    def n_cells(self) -> int:
        return int(np.prod([len(ax.spans) for ax in self.axes]))


def build_quadrature(basis: TensorBasis, q: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``q`` points per span per direction."""
    return QuadratureRule(basis, q)


class CellTables:
    """Tensorized per-cell arrays used by integration and assembly.

    Shapes (2D): ``active (ncells, nloc)``, ``phi (ncells, nqp, nloc)``,
    ``dphi (ncells, nqp, nloc, dim)``, ``w (ncells, nqp)`` with
    ``nloc = prod(p_l + 1)`` and ``nqp = q^dim``.
    """

    def __init__(self, basis: TensorBasis, quad: QuadratureRule) -> None:
        axes = quad.axes
        dim = basis.dim
        if dim == 1:
            ax = axes[0]
            self.active = ax.first_active[:, None] + np.arange(basis.axes[0].degree + 1)[None, :]
            self.phi = ax.basis
            self.dphi = ax.basis_deriv[..., None]
            self.w = ax.weights
        elif dim == 2:
            ax0, ax1 = axes
            n0, n1 = len(ax0.spans), len(ax1.spans)
            p0, p1 = basis.axes[0].degree, basis.axes[1].degree
            q = quad.q
            i0 = ax0.first_active[:, None] + np.arange(p0 + 1)[None, :]   # (n0, p0+1)
            i1 = ax1.first_active[:, None] + np.arange(p1 + 1)[None, :]   # (n1, p1+1)
            flat = (i0[:, None, :, None] * basis.shape[1] + i1[None, :, None, :])
            self.active = flat.reshape(n0 * n1, (p0 + 1) * (p1 + 1))
            # phi[c0,c1,q0,q1,a0,a1] = v0[c0,q0,a0] * v1[c1,q1,a1]
            v0, v1 = ax0.basis, ax1.basis
            d0, d1 = ax0.basis_deriv, ax1.basis_deriv
            phi = np.einsum("cqa,dsb->cdqsab", v0, v1)
            g0 = np.einsum("cqa,dsb->cdqsab", d0, v1)
            g1 = np.einsum("cqa,dsb->cdqsab", v0, d1)
            nloc = (p0 + 1) * (p1 + 1)
            nqp = q * q
            self.phi = phi.reshape(n0 * n1, nqp, nloc)
            self.dphi = np.stack(
                [g0.reshape(n0 * n1, nqp, nloc), g1.reshape(n0 * n1, nqp, nloc)], axis=-1
            )
            self.w = np.einsum("cq,ds->cdqs", ax0.weights, ax1.weights).reshape(n0 * n1, nqp)
        else:
            raise NotImplementedError("only 1D and 2D patches are supported")


def _jacobians(tables: CellTables, control: np.ndarray):
    """Jacobian, determinant and scaled co-factor matrix at all cell points.

    Returns ``J (c, q, d, d)``, ``det (c, q)`` and ``B (c, q, d, d)`` with
    ``B = sign(det) * adj(J)^T`` so that physical gradients carrying the
    ``|det J|`` integration weight are ``B @ ref_grad``.
    """
    p_loc = control[tables.active]                      # (c, nloc, d)
    J = np.einsum("cak,cqal->cqkl", p_loc, tables.dphi)
    d = control.shape[1]
    if d == 1:
        det = J[..., 0, 0]
        B = np.sign(det)[..., None, None] * np.ones_like(J)
    else:
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        B = np.empty_like(J)
        B[..., 0, 0] = J[..., 1, 1]
        B[..., 0, 1] = -J[..., 1, 0]
        B[..., 1, 0] = -J[..., 0, 1]
        B[..., 1, 1] = J[..., 0, 0]
        B *= np.sign(det)[..., None, None]
    return J, det, B


class GeometryMap:
    """Spline patch mapping from ``[0, 1]^d`` to the physical domain.

    The constructor sweeps all quadrature points of a ``p + 1``-point rule
    and rejects mappings whose Jacobian determinant vanishes or changes
    sign.
    """

    def __init__(self, basis: TensorBasis, control_points: np.ndarray) -> None:
        control_points = np.ascontiguousarray(control_points, dtype=float)
        if control_points.shape != (basis.size, basis.dim):
            raise ValueError(
                f"control points must have shape {(basis.size, basis.dim)}, "
                f"got {control_points.shape}"
            )
        self.basis = basis
        self.control = control_points
        self.dim = basis.dim
        quad = build_quadrature(basis, max(kv.degree for kv in basis.axes) + 1)
        tables = CellTables(basis, quad)
        _, det, _ = _jacobians(tables, control_points)
        dmin, dmax = det.min(), det.max()
        scale = max(abs(dmin), abs(dmax))
        if scale == 0.0 or dmin * dmax <= 0.0 or min(abs(dmin), abs(dmax)) < 1e-12 * scale:
            raise GeometryError(
                f"Jacobian determinant degenerates on the patch (range [{dmin}, {dmax}])"
            )
        self.orientation = 1.0 if dmin > 0 else -1.0
        self.min_abs_det = float(np.abs(det).min())

    def map_point(self, xi) -> np.ndarray:
        """Physical image of a reference point."""
        active, vals = self.basis.eval_at(xi)
        return vals @ self.control[active]

    def map_points(self, xis: np.ndarray) -> np.ndarray:
        xis = np.atleast_2d(np.asarray(xis, dtype=float))
        return np.array([self.map_point(xi) for xi in xis])

    def jacobian(self, xi) -> tuple[np.ndarray, float]:
        """Jacobian matrix ``J[k, l] = dx_k / dxi_l`` and its determinant."""
        active, _, grads = self.basis.eval_grad_at(xi)
        J = self.control[active].T @ grads
        return J, float(np.linalg.det(J))

    def greville_images(self) -> np.ndarray:
        """Physical images of the tensor Greville points."""
        return self.map_points(self.basis.greville_grid())


def patch_area(geo: GeometryMap, quad: QuadratureRule | None = None) -> float:
    """Measure of the patch computed by quadrature of ``|det J|``."""
    if quad is None:
        quad = build_quadrature(geo.basis, max(kv.degree for kv in geo.basis.axes) + 1)
    tables = CellTables(geo.basis, quad)
    _, det, _ = _jacobians(tables, geo.control)
    return float(np.sum(tables.w * np.abs(det)))


def make_interval(n: int, degree: int, a: float = 0.0, b: float = 1.0) -> GeometryMap:
    """1D patch mapping ``[0, 1]`` onto ``[a, b]``."""
    kv = KnotVector(degree, open_uniform_knots(n, degree))
    basis = TensorBasis([kv])
    control = (a + (b - a) * kv.greville())[:, None]
    return GeometryMap(basis, control)


def make_unit_square(n, degree: int = 2, scale: float = 1.0) -> GeometryMap:
    """Square patch ``[0, scale]^2``; control points on the Greville grid.

    Placing the control points at the Greville abscissae reproduces the
    (scaled) identity mapping exactly because splines reproduce linear
    functions.
    """
    n0, n1 = (n, n) if np.isscalar(n) else n
    basis = TensorBasis(
        [
            KnotVector(degree, open_uniform_knots(n0, degree)),
            KnotVector(degree, open_uniform_knots(n1, degree)),
        ]
    )
    return GeometryMap(basis, scale * basis.greville_grid())


def _ubend_backbone(s, tau, width, leg, inner_radius):
    """Point of the idealized U-bend at channel coordinate ``s``, offset ``tau``.

    The channel consists of a straight leg, a half-circle bend and a
    second straight leg. ``s`` runs along the center line from 0 to
    ``2 * leg + pi * rc`` and ``tau`` across the channel from ``-width/2``
    (outer wall) to ``+width/2`` (inner wall).
    """
    rc = inner_radius + 0.5 * width
    s = np.asarray(s, dtype=float)
    tau = np.asarray(tau, dtype=float)
    bend_len = np.pi * rc
    x = np.empty(np.broadcast(s, tau).shape)
    y = np.empty_like(x)
    in1 = s <= leg
    in2 = (s > leg) & (s < leg + bend_len)
    in3 = s >= leg + bend_len
    x[in1] = s[in1] - leg
    y[in1] = np.broadcast_to(tau, x.shape)[in1]
    phi = -0.5 * np.pi + (s[in2] - leg) / rc
    rad = rc - np.broadcast_to(tau, x.shape)[in2]
    x[in2] = rad * np.cos(phi)
    y[in2] = rc + rad * np.sin(phi)
    u = s[in3] - leg - bend_len
    x[in3] = -u
    y[in3] = 2.0 * rc - np.broadcast_to(tau, x.shape)[in3]
    return np.stack([x, y], axis=-1)


def make_ubend(
    width: float = 1.0,
    leg: float = 2.0,
    inner_radius: float = 0.5,
    n=(194, 34),
    degree: int = 2,
) -> GeometryMap:
    """Single-patch U-bend: two straight legs joined by a 180 degree bend.

    Control points are placed at the image of the Greville grid under the
    idealized channel map (Schoenberg approximation). The straight legs
    are then represented exactly while the circular arcs are approximated
    by polynomial spline segments, one per knot span; the approximation
    error shrinks quadratically with the span count. The first parametric
    direction follows the channel, the second runs across its width.
    """
    if width <= 0 or leg <= 0 or inner_radius <= 0:
        raise ValueError("U-bend dimensions must be positive")
    n0, n1 = (n, n) if np.isscalar(n) else n
    basis = TensorBasis(
        [
            KnotVector(degree, open_uniform_knots(n0, degree)),
            KnotVector(degree, open_uniform_knots(n1, degree)),
        ]
    )
    rc = inner_radius + 0.5 * width
    total = 2.0 * leg + np.pi * rc
    g = basis.greville_grid()
    control = _ubend_backbone(g[:, 0] * total, (g[:, 1] - 0.5) * width, width, leg, inner_radius)
    return GeometryMap(basis, control)


def save_patch(geo: GeometryMap, path) -> None:
    """Write a patch to a plain-text key/value file.

    Format: one ``key = value`` pair per line (``dim``, per-direction
    ``degree_l`` and ``knots_l``, ``shape``), then a ``control_points``
    marker followed by one whitespace-separated coordinate row per DOF in
    lexicographic DOF order.
    """
    lines = [f"dim = {geo.dim}"]
    for l, kv in enumerate(geo.basis.axes):
        lines.append(f"degree_{l} = {kv.degree}")
        lines.append(f"knots_{l} = " + " ".join(f"{t:.17g}" for t in kv.knots))
    lines.append("shape = " + " ".join(str(s) for s in geo.basis.shape))
    lines.append("control_points")
    for row in geo.control:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_patch(path) -> GeometryMap:
    """Read a patch written by :func:`save_patch`."""
    keys: dict[str, str] = {}
    control_rows: list[list[float]] = []
    in_points = False
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if in_points:
                control_rows.append([float(v) for v in line.split()])
            elif line == "control_points":
                in_points = True
            else:
                key, _, value = line.partition("=")
                keys[key.strip()] = value.strip()
    dim = int(keys["dim"])
    axes = []
    for l in range(dim):
        degree = int(keys[f"degree_{l}"])
        knots = np.array([float(v) for v in keys[f"knots_{l}"].split()])
        axes.append(KnotVector(degree, knots))
    basis = TensorBasis(axes)
    return GeometryMap(basis, np.array(control_rows))
