from math import factorial

import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings, strategies as st

from vembddc import poly


def test_dim_poly_matches_binomial():
    for dim in (1, 2, 3):
        for deg in range(6):
            assert poly.dim_poly(dim, deg) == len(poly.exponents(dim, deg))
    assert poly.dim_poly(3, 2) == 10
    assert poly.dim_poly(2, 3) == 10


def test_exponents_graded_order():
    ex = poly.exponents(3, 3)
    degs = [sum(e) for e in ex]
    assert degs == sorted(degs)
    assert list(ex[:4]) == [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]


@pytest.mark.parametrize("dim", [2, 3])
def test_derivative_matrix_against_sympy(dim):
    deg = 4
    xs = sym.symbols("x0:%d" % dim)
    ex = poly.exponents(dim, deg)
    low = poly.exponents(dim, deg - 1)
    for axis in range(dim):
        D = poly.derivative_matrix(dim, deg, axis)
        for j, e in enumerate(ex):
            m = sym.prod([x ** a for x, a in zip(xs, e)])
            d = sym.Poly(sym.diff(m, xs[axis]), *xs)
            want = np.zeros(len(low))
            for mon, c in d.terms():
                want[low.index(tuple(mon))] = float(c)
            np.testing.assert_allclose(D[:, j], want)


def test_multiply_and_laplacian_against_sympy():
    x = sym.symbols("x0:3")
    ex2 = poly.exponents(3, 2)
    ex3 = poly.exponents(3, 3)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(len(ex2))
    p = sum(ci * sym.prod([xi ** a for xi, a in zip(x, e)]) for ci, e in zip(c, ex2))
    for axis in range(3):
        got = poly.multiply_matrix(3, 2, axis) @ c
        q = sym.Poly(sym.expand(x[axis] * p), *x)
        want = np.zeros(len(ex3))
        for mon, v in q.terms():
            want[ex3.index(tuple(mon))] = float(v)
        np.testing.assert_allclose(got, want, atol=1e-13)
    c3 = rng.standard_normal(len(ex3))
    p3 = sum(ci * sym.prod([xi ** a for xi, a in zip(x, e)]) for ci, e in zip(c3, ex3))
    lap = sym.Poly(sum(sym.diff(p3, xi, 2) for xi in x), *x)
    want = np.zeros(poly.dim_poly(3, 1))
    for mon, v in lap.terms():
        want[poly.exponents(3, 1).index(tuple(mon))] = float(v)
    np.testing.assert_allclose(poly.laplacian_matrix(3, 3) @ c3, want, atol=1e-12)


def test_monomials_and_gradients():
    rng = np.random.default_rng(1)
    pts = rng.random((7, 3))
    center, h = np.array([0.3, 0.2, 0.1]), 0.7
    M = poly.monomials(pts, center, h, 3)
    for j, e in enumerate(poly.exponents(3, 3)):
        np.testing.assert_allclose(M[:, j], np.prod(((pts - center) / h) ** np.array(e), axis=1))
    G = poly.monomial_gradients(pts, center, h, 3)
    eps = 1e-6
    for ax in range(3):
        dp = np.zeros(3)
        dp[ax] = eps
        fd = (poly.monomials(pts + dp, center, h, 3) - poly.monomials(pts - dp, center, h, 3)) / (2 * eps)
        np.testing.assert_allclose(G[:, :, ax], fd, atol=1e-7)


def test_xwedge_candidates_are_cross_products():
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((5, 3))
    deg = 2
    C = poly.xwedge_candidates(deg)
    Mhi = poly.monomials(pts, np.zeros(3), 1.0, deg + 1)
    idx = poly.homogeneous_slice(3, deg)
    Mlo = poly.monomials(pts, np.zeros(3), 1.0, deg)
    j = 0
    for c in range(3):
        for a in idx:
            e = np.zeros(3)
            e[c] = 1.0
            want = np.cross(pts, Mlo[:, a][:, None] * e)
            got = Mhi @ C[j].T
            np.testing.assert_allclose(got, want, atol=1e-12)
            j += 1


@pytest.mark.parametrize("npts", [2, 3, 4, 5])
def test_gauss_lobatto_exactness(npts):
    t, w = poly.gauss_lobatto01(npts)
    assert t[0] == 0.0 and t[-1] == 1.0
    assert np.all(np.diff(t) > 0)
    for m in range(2 * npts - 2):
        assert abs(w @ t ** m - 1.0 / (m + 1)) < 1e-14


def test_gauss_lobatto_needs_two_points():
    with pytest.raises(ValueError):
        poly.gauss_lobatto01(1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6))
def test_triangle_rule_exact(a, b):
    deg = a + b
    pts, w = poly.reference_triangle_rule(deg)
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    assert abs(w @ (pts[:, 0] ** a * pts[:, 1] ** b) - exact) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 5))
def test_tet_rule_exact(a, b, c):
    deg = a + b + c
    pts, w = poly.reference_tet_rule(deg)
    exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
    got = w @ (pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c)
    assert abs(got - exact) < 1e-14


def test_mapped_rules_integrate_volume_and_moments():
    tet = np.array([[[0.1, 0.0, 0.0], [1.0, 0.2, 0.0], [0.0, 1.1, 0.3], [0.2, 0.1, 0.9]]])
    pts, w = poly.tet_quadrature(tet, 2)
    E = tet[0, 1:] - tet[0, 0]
    vol = abs(np.linalg.det(E)) / 6
    assert abs(w.sum() - vol) < 1e-14
    np.testing.assert_allclose(w @ pts / vol, tet[0].mean(axis=0), atol=1e-14)
    # a unit square fanned about its centre
    sq = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    p, ww = poly.triangle_quadrature(poly.polygon_fan(sq, sq.mean(axis=0)), 4)
    assert abs(ww.sum() - 1.0) < 1e-14
    assert abs(ww @ (p[:, 0] ** 2 * p[:, 1] ** 2) - 1.0 / 9.0) < 1e-14
