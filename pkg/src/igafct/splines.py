"""Univariate B-Spline bases and their tensor-product composition.

Evaluation uses the Cox-de Boor recursion restricted to the active knot
span, so a basis of degree ``p`` always yields exactly ``p + 1`` nonzero
values at a point. Only open (clamped) knot vectors are supported: the
first and last knots are repeated ``p + 1`` times, which makes the end
control coefficients interpolatory.
"""

from __future__ import annotations

import itertools

import numpy as np

__all__ = [
    "KnotVector",
    "TensorBasis",
    "open_uniform_knots",
]


def open_uniform_knots(n: int, degree: int, a: float = 0.0, b: float = 1.0) -> np.ndarray:
    """Open knot vector with uniform interior knots for ``n`` basis functions.

    Parameters
    ----------
    n : int
        Number of basis functions, must satisfy ``n >= degree + 1``.
    degree : int
        Polynomial degree.
    a, b : float
        Parameter interval endpoints.

    Returns
    -------
    np.ndarray
        Knot sequence of length ``n + degree + 1``.
    """
    if n < degree + 1:
        raise ValueError(f"need at least degree+1={degree + 1} basis functions, got {n}")
    interior = np.linspace(a, b, n - degree + 1)[1:-1]
    return np.concatenate([np.full(degree + 1, a), interior, np.full(degree + 1, b)])


class KnotVector:
    """Clamped univariate B-Spline basis of a given degree.

    Attributes
    ----------
    degree : int
        Polynomial degree ``p >= 1``.
    knots : np.ndarray
        Non-decreasing knot sequence; the end knots each appear exactly
        ``p + 1`` times.
    n : int
        Number of basis functions, ``len(knots) - p - 1``.
    """

    def __init__(self, degree: int, knots) -> None:
        if degree < 1:
            raise ValueError("degree must be >= 1")
        knots = np.ascontiguousarray(knots, dtype=float)
        if knots.ndim != 1:
            raise ValueError("knots must be a 1D sequence")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        p = degree
        n = knots.size - p - 1
        if n < p + 1:
            raise ValueError("too few knots for the requested degree")
        if not (np.all(knots[: p + 1] == knots[0]) and knots[p + 1] > knots[p]):
            raise ValueError("first knot must be repeated exactly degree+1 times")
        if not (np.all(knots[-(p + 1):] == knots[-1]) and knots[-(p + 2)] < knots[-1]):
            raise ValueError("last knot must be repeated exactly degree+1 times")
        self.degree = p
        self.knots = knots
        self.n = n

    def __repr__(self) -> str:  # pragma: no cover
        return f"KnotVector(degree={self.degree}, n={self.n})"

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def find_span(self, x: float) -> int:
        """Index ``s`` of the non-empty span with ``knots[s] <= x < knots[s+1]``.

        The right endpoint is mapped to the last non-empty span.
        """
        lo, hi = self.domain
        if x < lo or x > hi:
            raise ValueError(f"point {x} outside knot range [{lo}, {hi}]")
        span = int(np.searchsorted(self.knots, x, side="right")) - 1
        return min(max(span, self.degree), self.n - 1)

    def eval_basis(self, x: float) -> tuple[int, np.ndarray]:
        """Values of the ``p + 1`` basis functions active at ``x``.

        Returns
        -------
        (int, np.ndarray)
            Index of the first active function and its ``p + 1`` values.
            The values are non-negative and sum to one.
        """
        span = self.find_span(x)
        return span - self.degree, _basis_values(self.knots, self.degree, span, float(x))

    def eval_basis_deriv(self, x: float) -> tuple[int, np.ndarray]:
        """First derivatives of the active basis functions at ``x``.

        The returned values sum to zero (derivative of the partition of
        unity).
        """
        span = self.find_span(x)
        return span - self.degree, _basis_derivs(self.knots, self.degree, span, float(x))

    def greville(self) -> np.ndarray:
        """Knot-average abscissae, one per basis function."""
        p = self.degree
        windows = np.lib.stride_tricks.sliding_window_view(self.knots[1:-1], p)
        return windows[: self.n].mean(axis=1)

    def breakpoints(self) -> np.ndarray:
        """Distinct knot values (span boundaries)."""
        return np.unique(self.knots)

    def spans(self) -> list[tuple[int, float, float]]:
        """Non-empty spans as ``(span_index, left, right)`` triples."""
        out = []
        for s in range(self.degree, self.n):
            a, b = self.knots[s], self.knots[s + 1]
            if b > a:
                out.append((s, float(a), float(b)))
        return out

    def support(self, i: int) -> tuple[float, float]:
        """Closure of the support interval of basis function ``i``."""
        if not 0 <= i < self.n:
            raise IndexError(f"basis index {i} out of range")
        return float(self.knots[i]), float(self.knots[i + self.degree + 1])

    def overlap_window(self, i: int) -> np.ndarray:
        """Indices ``j`` whose support overlaps that of ``i`` on positive measure."""
        if not 0 <= i < self.n:
            raise IndexError(f"basis index {i} out of range")
        p = self.degree
        lo, hi = max(0, i - p), min(self.n - 1, i + p)
        js = np.arange(lo, hi + 1)
        left = np.maximum(self.knots[js], self.knots[i])
        right = np.minimum(self.knots[js + p + 1], self.knots[i + p + 1])
        return js[right > left]

    def eval_many(self, xs: np.ndarray, deriv: bool = False):
        """Evaluate at many points; returns first-active indices and a value table.

        Output shapes are ``(m,)`` and ``(m, p + 1)``. With ``deriv`` a third
        ``(m, p + 1)`` array of first derivatives is appended.
        """
        xs = np.asarray(xs, dtype=float)
        m = xs.size
        first = np.empty(m, dtype=np.int64)
        vals = np.empty((m, self.degree + 1))
        ders = np.empty((m, self.degree + 1)) if deriv else None
        for k, x in enumerate(xs.ravel()):
            span = self.find_span(x)
            first[k] = span - self.degree
            vals[k] = _basis_values(self.knots, self.degree, span, x)
            if deriv:
                ders[k] = _basis_derivs(self.knots, self.degree, span, x)
        if deriv:
            return first, vals, ders
        return first, vals


def _basis_values(knots: np.ndarray, p: int, span: int, x: float) -> np.ndarray:
    # Cox-de Boor triangle on the active span; N[r] ends up as the value of
    # basis function span - p + r.
    left = np.empty(p)
    right = np.empty(p)
    vals = np.empty(p + 1)
    vals[0] = 1.0
    for j in range(1, p + 1):
        left[j - 1] = x - knots[span + 1 - j]
        right[j - 1] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            tmp = vals[r] / (right[r] + left[j - 1 - r])
            vals[r] = saved + right[r] * tmp
            saved = left[j - 1 - r] * tmp
        vals[j] = saved
    return vals


def _basis_derivs(knots: np.ndarray, p: int, span: int, x: float) -> np.ndarray:
    # d/dx N_{i,p} = p * (N_{i,p-1}/(t_{i+p}-t_i) - N_{i+1,p-1}/(t_{i+p+1}-t_{i+1}))
    lower = _basis_values(knots, p - 1, span, x) if p > 1 else np.array([1.0])
    # lower[k] is N_{span-p+1+k, p-1}
    ders = np.empty(p + 1)
    for k in range(p + 1):
        i = span - p + k
        acc = 0.0
        if k >= 1:  # N_{i,p-1} is active
            denom = knots[i + p] - knots[i]
            if denom > 0.0:
                acc += lower[k - 1] / denom
        if k <= p - 1:  # N_{i+1,p-1} is active
            denom = knots[i + p + 1] - knots[i + 1]
            if denom > 0.0:
                acc -= lower[k] / denom
        ders[k] = p * acc
    return ders


class TensorBasis:
    """Tensor product of univariate clamped B-Spline bases.

    Flat DOF indices are lexicographic with the first direction slowest
    (C order), i.e. ``flat = i0 * n1 + i1`` in 2D.
    """

    def __init__(self, axes) -> None:
        axes = tuple(axes)
        if not axes:
            raise ValueError("need at least one direction")
        self.axes = axes
        self.dim = len(axes)
        self.shape = tuple(kv.n for kv in axes)
        self.size = int(np.prod(self.shape))

    def __repr__(self) -> str:  # pragma: no cover
        degs = tuple(kv.degree for kv in self.axes)
        return f"TensorBasis(shape={self.shape}, degrees={degs})"

    def flat_index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))

    def support_overlap(self, i: int) -> np.ndarray:
        """Sorted flat indices whose support overlaps DOF ``i`` (including ``i``)."""
        if not 0 <= i < self.size:
            raise IndexError(f"DOF index {i} out of range")
        multi = self.multi_index(i)
        windows = [kv.overlap_window(m) for kv, m in zip(self.axes, multi)]
        combos = np.array(list(itertools.product(*windows)), dtype=np.int64)
        flats = np.ravel_multi_index(combos.T, self.shape)
        return np.sort(flats)

    def greville_grid(self) -> np.ndarray:
        """All tensor Greville abscissae, shape ``(size, dim)``."""
        pts_1d = [kv.greville() for kv in self.axes]
        grids = np.meshgrid(*pts_1d, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def _active_flat(self, firsts) -> np.ndarray:
        ranges = [f + np.arange(kv.degree + 1) for f, kv in zip(firsts, self.axes)]
        combos = np.meshgrid(*ranges, indexing="ij")
        return np.ravel_multi_index(tuple(c.ravel() for c in combos), self.shape)

    def eval_at(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """Active flat indices and basis values at a parametric point."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        parts = [kv.eval_basis(x) for kv, x in zip(self.axes, xi)]
        firsts = [p[0] for p in parts]
        vals = parts[0][1]
        for _, v in parts[1:]:
            vals = np.multiply.outer(vals, v)
        return self._active_flat(firsts), vals.ravel()

    def eval_grad_at(self, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Active indices, values and reference gradients at a point.

        Gradient array has shape ``(n_active, dim)``.
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        vals_1d, ders_1d = [], []
        firsts = []
        for kv, x in zip(self.axes, xi):
            f, v = kv.eval_basis(x)
            _, d = kv.eval_basis_deriv(x)
            firsts.append(f)
            vals_1d.append(v)
            ders_1d.append(d)
        vals = vals_1d[0]
        for v in vals_1d[1:]:
            vals = np.multiply.outer(vals, v)
        grads = []
        for l in range(self.dim):
            g = ders_1d[0] if l == 0 else vals_1d[0]
            for m in range(1, self.dim):
                g = np.multiply.outer(g, ders_1d[m] if l == m else vals_1d[m])
            grads.append(g.ravel())
        return self._active_flat(firsts), vals.ravel(), np.stack(grads, axis=-1)
