"""Assembly of the discrete operators driving the semi-discretization.

Builds the consistent mass matrix, its row-sum lumped counterpart, the
discretized divergence operators (one per spatial direction), the
antisymmetric edge coefficients derived from them, and boundary
quadrature traces. All integrals are evaluated on the reference domain
with per-span Gauss rules; cell contributions are scattered in a fixed
deterministic order so repeated assembly is bitwise reproducible.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .geometry import CellTables, GeometryMap, QuadratureRule, build_quadrature, _jacobians
from .splines import TensorBasis

__all__ = [
    "AssemblyError",
    "assemble_mass",
    "lump_mass",
    "assemble_divergence",
    "EdgeSet",
    "build_edges",
    "BoundaryTrace",
    "assemble_boundary",
    "boundary_sides",
    "dump_coo",
    "Operators",
    "build_operators",
]


class AssemblyError(RuntimeError):
    pass


def _scatter(blocks: np.ndarray, active: np.ndarray, n: int) -> sp.csr_matrix:
    """Sum dense per-cell blocks into a CSR matrix."""
    ncells, nloc = active.shape
    rows = np.repeat(active, nloc, axis=1).ravel()
    cols = np.tile(active, (1, nloc)).ravel()
    mat = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))
    return mat.tocsr()


def assemble_mass(geo: GeometryMap, quad: QuadratureRule) -> sp.csr_matrix:
    """Consistent mass matrix ``m_ij = int phi_i phi_j dx``."""
    tables = CellTables(geo.basis, quad)
    _, det, _ = _jacobians(tables, geo.control)
    w = tables.w * np.abs(det)
    blocks = np.einsum("cq,cqa,cqb->cab", w, tables.phi, tables.phi)
    return _scatter(blocks, tables.active, geo.basis.size)


def lump_mass(M: sp.csr_matrix) -> np.ndarray:
    """Row sums of the consistent mass matrix; fails on non-positive entries."""
    m = np.asarray(M.sum(axis=1)).ravel()
    if np.any(m <= 0.0):
        raise AssemblyError(
            f"row-sum lumping produced a non-positive entry (min {m.min()}); "
            "the geometry or quadrature is invalid"
        )
    return m


def assemble_divergence(geo: GeometryMap, quad: QuadratureRule) -> list[sp.csr_matrix]:
    """Operators ``c^l_ij = int phi_i d_l phi_j dx`` for each direction ``l``.

    Reference gradients are pushed forward with the inverse-transpose
    Jacobian; combined with the ``|det J|`` weight this reduces to the
    (sign-corrected) co-factor matrix, keeping the integrand polynomial.
    """
    tables = CellTables(geo.basis, quad)
    _, _, B = _jacobians(tables, geo.control)
    gphys = np.einsum("cqlm,cqbm->cqbl", B, tables.dphi)
    n = geo.basis.size
    out = []
    for l in range(geo.dim):
        blocks = np.einsum("cq,cqa,cqb->cab", tables.w, tables.phi, gphys[..., l])
        out.append(_scatter(blocks, tables.active, n))
    return out


class EdgeSet:
    """Unordered DOF pairs with overlapping support and their coefficients.

    Each pair ``{i, j}`` is stored once with ``i < j`` in lexicographic
    order. ``e`` holds ``e_ij = (c_ji - c_ij) / 2`` per direction; the
    companion value for the reversed orientation is its negative. Zero
    length ``e`` vectors keep a zero unit direction (such edges carry no
    upwind dissipation).
    """

    def __init__(self, i, j, m_ij, e, n_dofs: int | None = None):
        self.i = np.asarray(i, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.m_ij = np.asarray(m_ij, dtype=float)
        self.e = np.asarray(e, dtype=float)
        self.e_norm = np.linalg.norm(self.e, axis=1)
        self.n_unit = np.zeros_like(self.e)
        ok = self.e_norm > 0.0
        self.n_unit[ok] = self.e[ok] / self.e_norm[ok, None]
        self.n_edges = self.i.size
        self.active = np.flatnonzero(ok)
        self.all_active = bool(ok.all())
        if n_dofs is None:
            n_dofs = 1 + int(max(self.i.max(initial=0), self.j.max(initial=0)))
        self.n_dofs = n_dofs
        self._build_adjacency()
        self._build_incidence()

    def _build_adjacency(self) -> None:
        n = self.n_dofs
        rows = np.concatenate([self.i, self.j])
        cols = np.concatenate([self.j, self.i])
        order = np.argsort(rows, kind="stable")
        self.adj_cols = cols[order]
        counts = np.bincount(rows, minlength=n)
        self.adj_ptr = np.concatenate([[0], np.cumsum(counts)])

    def _build_incidence(self) -> None:
        rows = np.concatenate([self.i, self.j])
        cols = np.tile(np.arange(self.n_edges, dtype=np.int64), 2)
        ones = np.ones(self.n_edges)
        shape = (self.n_dofs, self.n_edges)
        self._inc_both = sp.coo_matrix(
            (np.concatenate([ones, ones]), (rows, cols)), shape=shape
        ).tocsr()
        self._inc_signed = sp.coo_matrix(
            (np.concatenate([ones, -ones]), (rows, cols)), shape=shape
        ).tocsr()

    def neighbor_min_max(self, u: np.ndarray):
        """Per-DOF min/max of ``u`` over the edge stencil including the DOF itself."""
        vals = u[self.adj_cols]
        umin = u.copy()
        umax = u.copy()
        has = np.diff(self.adj_ptr) > 0
        umin[has] = np.minimum(umin[has], np.minimum.reduceat(vals, self.adj_ptr[:-1][has]))
        umax[has] = np.maximum(umax[has], np.maximum.reduceat(vals, self.adj_ptr[:-1][has]))
        return umin, umax

    def scatter_both(self, contrib: np.ndarray, n: int) -> np.ndarray:
        """Add the same per-edge value to both endpoints (symmetric scatter)."""
        if n != self.n_dofs:
            raise ValueError("scatter target size mismatch")
        return self._inc_both @ contrib

    def scatter_signed(self, contrib: np.ndarray, n: int) -> np.ndarray:
        """Add per-edge values to endpoint ``i`` and subtract them at ``j``."""
        if n != self.n_dofs:
            raise ValueError("scatter target size mismatch")
        return self._inc_signed @ contrib


def build_edges(basis: TensorBasis, M: sp.csr_matrix, C: list[sp.csr_matrix]) -> EdgeSet:
    """Edge list over the support-overlap pattern of the basis.

    The structural pattern (positive-measure support overlap) is used
    rather than numerical non-zeros, which for B-Splines coincide by the
    positivity of the mass integrand.
    """
    for op in C:
        if op.shape != M.shape:
            raise AssemblyError("mass and divergence operators have mismatched shapes")
    i_list, j_list = [], []
    for i in range(basis.size):
        js = basis.support_overlap(i)
        js = js[js > i]
        i_list.append(np.full(js.size, i, dtype=np.int64))
        j_list.append(js)
    i_arr = np.concatenate(i_list)
    j_arr = np.concatenate(j_list)
    m_ij = np.asarray(M[i_arr, j_arr]).ravel()
    d = len(C)
    e = np.empty((i_arr.size, d))
    for l in range(d):
        c_ij = np.asarray(C[l][i_arr, j_arr]).ravel()
        c_ji = np.asarray(C[l][j_arr, i_arr]).ravel()
        e[:, l] = 0.5 * (c_ji - c_ij)
    return EdgeSet(i_arr, j_arr, m_ij, e, n_dofs=basis.size)


def boundary_sides(dim: int) -> list[str]:
    if dim == 1:
        return ["west", "east"]
    return ["west", "east", "south", "north"]


_SIDE_AXIS = {"west": (0, 0.0), "east": (0, 1.0), "south": (1, 0.0), "north": (1, 1.0)}


class BoundaryTrace:
    """Quadrature data of one patch face.

    Attributes
    ----------
    params : (nq, d) reference coordinates of the quadrature points
    points : (nq, d) physical positions
    normals : (nq, d) outward unit normals
    w_ds : (nq,) quadrature weights carrying the surface measure
    active : (nq, nloc) flat DOF indices active at each point
    phi : (nq, nloc) basis values
    """

    def __init__(self, side, params, points, normals, w_ds, active, phi):
        self.side = side
        self.params = params
        self.points = points
        self.normals = normals
        self.w_ds = w_ds
        self.active = active
        self.phi = phi


def assemble_boundary(geo: GeometryMap, side: str, q: int | None = None) -> BoundaryTrace:
    """Boundary quadrature trace for one of the ``2 d`` patch faces.

    In 1D the face is a single endpoint with unit weight. In 2D the
    surface measure comes from the tangent of the boundary curve and the
    outward normal from the inverse-transpose Jacobian applied to the
    reference face normal.
    """
    basis = geo.basis
    dim = basis.dim
    if side not in boundary_sides(dim):
        raise ValueError(f"unknown side {side!r} for a {dim}D patch")
    axis, value = _SIDE_AXIS[side]
    if dim == 1:
        xi = np.array([[value]])
        active, phi = basis.eval_at(xi[0])
        J, det = geo.jacobian(xi[0])
        normal = np.array([[-1.0 if value == 0.0 else 1.0]]) * np.sign(det)
        return BoundaryTrace(
            side, xi, geo.map_points(xi), normal, np.array([1.0]),
            active[None, :], phi[None, :],
        )

    t_axis = 1 - axis
    if q is None:
        q = max(kv.degree for kv in basis.axes) + 2
    ref_pts, ref_wts = np.polynomial.legendre.leggauss(q)
    params_t, wts_t = [], []
    for _, a, b in basis.axes[t_axis].spans():
        half = 0.5 * (b - a)
        params_t.append(a + half * (ref_pts + 1.0))
        wts_t.append(half * ref_wts)
    params_t = np.concatenate(params_t)
    wts_t = np.concatenate(wts_t)
    nq = params_t.size

    ref_normal = np.zeros(2)
    ref_normal[axis] = -1.0 if value == 0.0 else 1.0

    nloc = (basis.axes[0].degree + 1) * (basis.axes[1].degree + 1)
    params = np.empty((nq, 2))
    points = np.empty((nq, 2))
    normals = np.empty((nq, 2))
    w_ds = np.empty(nq)
    active = np.empty((nq, nloc), dtype=np.int64)
    phi = np.empty((nq, nloc))
    for k, t in enumerate(params_t):
        xi = np.empty(2)
        xi[axis] = value
        xi[t_axis] = t
        params[k] = xi
        act, vals, grads = basis.eval_grad_at(xi)
        J = geo.control[act].T @ grads
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        tangent = J[:, t_axis]
        w_ds[k] = wts_t[k] * np.linalg.norm(tangent)
        n_raw = np.sign(det) * np.linalg.solve(J.T, ref_normal)
        normals[k] = n_raw / np.linalg.norm(n_raw)
        points[k] = vals @ geo.control[act]
        active[k] = act
        phi[k] = vals
    return BoundaryTrace(side, params, points, normals, w_ds, active, phi)


def dump_coo(mat: sp.spmatrix, path) -> None:
    """Write a sparse matrix as ``row col value`` text triplets."""
    coo = mat.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")


class Operators:
    """Assembled discrete operators of one patch.

    Bundles everything the residual evaluation needs: consistent and
    lumped mass, divergence operators and their transposes, the edge set,
    and boundary traces for every face.
    """

    def __init__(self, geo: GeometryMap, q: int | None = None, q_surface: int | None = None):
        basis = geo.basis
        if q is None:
            q = max(kv.degree for kv in basis.axes) + 1
        self.geo = geo
        self.basis = basis
        self.quad = build_quadrature(basis, q)
        self.M = assemble_mass(geo, self.quad)
        self.m_lumped = lump_mass(self.M)
        self.C = assemble_divergence(geo, self.quad)
        self.CT = [op.T.tocsr() for op in self.C]
        self.edges = build_edges(basis, self.M, self.C)
        self.traces = {
            side: assemble_boundary(geo, side, q_surface) for side in boundary_sides(geo.dim)
        }
        self.area = float(self.m_lumped.sum())
        self.n_dofs = basis.size
        self.dim = geo.dim


def build_operators(geo: GeometryMap, q: int | None = None, q_surface: int | None = None) -> Operators:
    return Operators(geo, q, q_surface)
