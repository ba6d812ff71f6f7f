"""Univariate and tensor-product B-Spline basis tests."""

import numpy as np
import pytest

from igafct.splines import KnotVector, TensorBasis, open_uniform_knots


def test_linear_hats_midpoint():
    kv = KnotVector(1, [0.0, 0.0, 1.0, 1.0])
    first, vals = kv.eval_basis(0.5)
    assert first == 0
    np.testing.assert_allclose(vals, [0.5, 0.5])


def test_quadratic_bernstein_midpoint():
    # single-span quadratic equals the Bernstein basis
    kv = KnotVector(2, [0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    first, vals = kv.eval_basis(0.5)
    assert first == 0
    np.testing.assert_allclose(vals, [0.25, 0.5, 0.25])


def test_partition_of_unity_random_points():
    rng = np.random.default_rng(1)
    kv = KnotVector(2, [0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0])
    for x in rng.uniform(0.0, 1.0, 200):
        _, vals = kv.eval_basis(x)
        assert abs(vals.sum() - 1.0) <= 1e-12
        assert np.all(vals >= 0.0)


def test_eval_basis_outside_range_raises():
    kv = KnotVector(2, open_uniform_knots(5, 2))
    with pytest.raises(ValueError):
        kv.eval_basis(1.5)
    with pytest.raises(ValueError):
        kv.eval_basis(-0.1)


def test_right_endpoint_evaluates():
    kv = KnotVector(2, open_uniform_knots(6, 2))
    first, vals = kv.eval_basis(1.0)
    assert first == kv.n - 3
    np.testing.assert_allclose(vals, [0.0, 0.0, 1.0], atol=1e-15)


def test_deriv_linear_hats():
    kv = KnotVector(1, [0.0, 0.0, 1.0, 1.0])
    first, ders = kv.eval_basis_deriv(0.3)
    assert first == 0
    np.testing.assert_allclose(ders, [-1.0, 1.0])


def test_deriv_quadratic_bernstein():
    kv = KnotVector(2, [0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    _, ders = kv.eval_basis_deriv(0.5)
    np.testing.assert_allclose(ders, [-1.0, 0.0, 1.0], atol=1e-14)


def test_deriv_sums_to_zero():
    rng = np.random.default_rng(2)
    kv = KnotVector(3, open_uniform_knots(9, 3))
    for x in rng.uniform(0.0, 1.0, 100):
        _, ders = kv.eval_basis_deriv(x)
        assert abs(ders.sum()) <= 1e-11


def test_deriv_matches_finite_differences():
    rng = np.random.default_rng(3)
    kv = KnotVector(2, open_uniform_knots(8, 2))
    h = 1e-7
    for x in rng.uniform(0.05, 0.95, 50):
        first, ders = kv.eval_basis_deriv(x)
        fp, vp = kv.eval_basis(x + h)
        fm, vm = kv.eval_basis(x - h)
        if fp != first or fm != first:
            continue  # straddles a knot, one-sided values differ
        np.testing.assert_allclose(ders, (vp - vm) / (2 * h), atol=1e-6)


@pytest.mark.parametrize(
    "degree,knots,expected",
    [
        (2, [0, 0, 0, 0.5, 1, 1, 1], [0.0, 0.25, 0.75, 1.0]),
        (1, [0, 0, 1, 1], [0.0, 1.0]),
        (2, [0, 0, 0, 1, 1, 1], [0.0, 0.5, 1.0]),
    ],
)
def test_greville_points(degree, knots, expected):
    kv = KnotVector(degree, knots)
    np.testing.assert_allclose(kv.greville(), expected)


def test_greville_monotone_in_range():
    kv = KnotVector(3, open_uniform_knots(11, 3))
    g = kv.greville()
    assert np.all(np.diff(g) >= 0)
    assert g[0] == 0.0 and g[-1] == 1.0


def test_local_support_count():
    for p in (1, 2, 3):
        kv = KnotVector(p, open_uniform_knots(p + 5, p))
        _, vals = kv.eval_basis(0.37)
        assert vals.size == p + 1


def test_overlap_window_1d_hats():
    kv = KnotVector(1, open_uniform_knots(4, 1))
    basis = TensorBasis([kv])
    np.testing.assert_array_equal(basis.support_overlap(0), [0, 1])


def test_overlap_window_quadratic_interior():
    kv = KnotVector(2, open_uniform_knots(5, 2))
    basis = TensorBasis([kv])
    window = basis.support_overlap(2)
    assert window.size <= 5
    np.testing.assert_array_equal(window, [0, 1, 2, 3, 4])


def test_overlap_window_brute_force():
    # compare against direct numerical overlap detection
    kv = KnotVector(2, open_uniform_knots(8, 2))
    xs = np.linspace(0, 1, 2001)[1:-1]
    table = np.zeros((kv.n, xs.size))
    for k, x in enumerate(xs):
        first, vals = kv.eval_basis(x)
        table[first : first + 3, k] = vals
    for i in range(kv.n):
        expected = [
            j for j in range(kv.n) if np.any((table[i] > 1e-12) & (table[j] > 1e-12))
        ]
        np.testing.assert_array_equal(kv.overlap_window(i), expected)


def test_overlap_2d_cartesian_product():
    kv = KnotVector(1, open_uniform_knots(4, 1))
    basis = TensorBasis([kv, kv])
    i = basis.flat_index((1, 2))
    expected = sorted(
        basis.flat_index((a, b))
        for a in kv.overlap_window(1)
        for b in kv.overlap_window(2)
    )
    np.testing.assert_array_equal(basis.support_overlap(i), expected)


def test_support_overlap_out_of_range():
    basis = TensorBasis([KnotVector(1, open_uniform_knots(4, 1))])
    with pytest.raises(IndexError):
        basis.support_overlap(7)


def test_tensor_eval_partition_of_unity():
    rng = np.random.default_rng(4)
    basis = TensorBasis(
        [
            KnotVector(2, open_uniform_knots(6, 2)),
            KnotVector(2, open_uniform_knots(5, 2)),
        ]
    )
    for _ in range(100):
        xi = rng.uniform(0, 1, 2)
        active, vals = basis.eval_at(xi)
        assert abs(vals.sum() - 1.0) <= 1e-12
        assert np.all(vals >= 0)
        assert active.size == 9


def test_tensor_grad_sums_to_zero():
    rng = np.random.default_rng(5)
    basis = TensorBasis(
        [
            KnotVector(2, open_uniform_knots(6, 2)),
            KnotVector(1, open_uniform_knots(4, 1)),
        ]
    )
    for _ in range(50):
        _, _, grads = basis.eval_grad_at(rng.uniform(0, 1, 2))
        np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-11)


def test_flat_multi_index_round_trip():
    basis = TensorBasis(
        [
            KnotVector(2, open_uniform_knots(6, 2)),
            KnotVector(1, open_uniform_knots(4, 1)),
        ]
    )
    for flat in range(basis.size):
        assert basis.flat_index(basis.multi_index(flat)) == flat


def test_invalid_knot_vectors_rejected():
    with pytest.raises(ValueError):
        KnotVector(2, [0, 0, 1, 1])  # not clamped for p=2
    with pytest.raises(ValueError):
        KnotVector(1, [0, 1, 0, 1])  # decreasing
    with pytest.raises(ValueError):
        KnotVector(0, [0, 0.5, 1])  # degree below 1
