"""Scaled monomial bases, polynomial algebra and quadrature on polytopes.

Polynomials on an entity O are expanded in scaled monomials
``m_a(x) = ((x - x_O) / h_O) ** a`` ordered by total degree, then by
descending lexicographic exponent.  Coefficient vectors always refer to this
ordering.  Derivative and multiplication maps are exact integer-valued
matrices acting on coefficient vectors; the geometric scaling ``1 / h_O`` of
a derivative is applied by the caller.
"""
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def exponents(dim, degree):
    """Exponent tuples of all monomials of total degree <= ``degree``."""
    out = []
    for d in range(degree + 1):
        if dim == 1:
            out.append((d,))
        elif dim == 2:
            for a in range(d, -1, -1):
                out.append((a, d - a))
        elif dim == 3:
            for a in range(d, -1, -1):
                for b in range(d - a, -1, -1):
                    out.append((a, b, d - a - b))
        else:
            raise ValueError("dim must be 1, 2 or 3")
    return tuple(out)


def dim_poly(dim, degree):
    """Dimension of the space of polynomials of degree <= ``degree``."""
    if degree < 0:
        return 0
    n = 1
    for i in range(1, dim + 1):
        n = n * (degree + i) // i
    return n


@lru_cache(maxsize=None)
def _index(dim, degree):
    return {a: i for i, a in enumerate(exponents(dim, degree))}


@lru_cache(maxsize=None)
def derivative_matrix(dim, degree, axis):
    """Map coefficients of ``p`` (deg <= degree) to those of d p / d xhat_axis.

    The result has degree ``degree - 1``; returned shape is
    ``(dim_poly(dim, degree-1), dim_poly(dim, degree))``.
    """
    src = exponents(dim, degree)
    dst = _index(dim, max(degree - 1, 0))
    D = np.zeros((dim_poly(dim, degree - 1), len(src)))
    for j, a in enumerate(src):
        if a[axis] > 0:
            b = list(a)
            b[axis] -= 1
            D[dst[tuple(b)], j] = a[axis]
    D.setflags(write=False)
    return D


@lru_cache(maxsize=None)
def multiply_matrix(dim, degree, axis):
    """Map coefficients of ``p`` (deg <= degree) to those of xhat_axis * p."""
    src = exponents(dim, degree)
    dst = _index(dim, degree + 1)
    M = np.zeros((dim_poly(dim, degree + 1), len(src)))
    for j, a in enumerate(src):
        b = list(a)
        b[axis] += 1
        M[dst[tuple(b)], j] = 1.0
    M.setflags(write=False)
    return M


@lru_cache(maxsize=None)
def embed_matrix(dim, lo, hi):
    """Injection of coefficients of degree <= lo into degree <= hi."""
    E = np.zeros((dim_poly(dim, hi), dim_poly(dim, lo)))
    E[: dim_poly(dim, lo), :] = np.eye(dim_poly(dim, lo))
    E.setflags(write=False)
    return E


def laplacian_matrix(dim, degree):
    """Coefficient map of the Laplacian in scaled variables, degree -> degree-2."""
    L = np.zeros((dim_poly(dim, degree - 2), dim_poly(dim, degree)))
    if degree < 2:
        return L
    for ax in range(dim):
        L += derivative_matrix(dim, degree - 1, ax) @ derivative_matrix(dim, degree, ax)
    return L


def homogeneous_slice(dim, degree):
    """Indices of the monomials of total degree exactly ``degree``."""
    return np.arange(dim_poly(dim, degree - 1), dim_poly(dim, degree))


def monomials(points, center, h, degree):
    """Evaluate scaled monomials at ``points`` (N, dim); returns (N, n_mono)."""
    pts = np.atleast_2d(points)
    dim = pts.shape[1]
    xh = (pts - center) / h
    exps = np.array(exponents(dim, degree))
    # powers table avoids repeated pow calls
    pw = np.ones((pts.shape[0], dim, degree + 1))
    for p in range(1, degree + 1):
        pw[:, :, p] = pw[:, :, p - 1] * xh
    out = np.ones((pts.shape[0], len(exps)))
    for ax in range(dim):
        out *= pw[:, ax, exps[:, ax]]
    return out


def monomial_gradients(points, center, h, degree):
    """Physical gradients of scaled monomials; returns (N, n_mono, dim)."""
    pts = np.atleast_2d(points)
    dim = pts.shape[1]
    low = monomials(pts, center, h, max(degree - 1, 0))
    G = np.zeros((pts.shape[0], dim_poly(dim, degree), dim))
    for ax in range(dim):
        D = derivative_matrix(dim, degree, ax)
        G[:, :, ax] = (low[:, : D.shape[0]] @ D) / h
    return G


def xwedge_candidates(degree):
    """Vector polynomials ``xhat ^ (m_a e_c)`` for homogeneous ``|a| = degree``.

    Returned as coefficient array of shape (n_cand, 3, dim_poly(3, degree+1)).
    """
    n_hi = dim_poly(3, degree + 1)
    idx = homogeneous_slice(3, degree)
    cands = []
    for c in range(3):
        for a in idx:
            coef = np.zeros((3, n_hi))
            # xhat ^ e_c has components given by the cross product table
            e = np.zeros(3)
            e[c] = 1.0
            base = np.zeros(dim_poly(3, degree))
            base[a] = 1.0
            for comp in range(3):
                # (x ^ e)_comp = x_{comp+1} e_{comp+2} - x_{comp+2} e_{comp+1}
                i1, i2 = (comp + 1) % 3, (comp + 2) % 3
                if e[i2] != 0.0:
                    coef[comp] += e[i2] * (multiply_matrix(3, degree, i1) @ base)
                if e[i1] != 0.0:
                    coef[comp] -= e[i1] * (multiply_matrix(3, degree, i2) @ base)
            cands.append(coef)
    return np.array(cands)


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=None)
def gauss_jacobi01(n, alpha):
    """Gauss-Jacobi rule on [0, 1] for weight (1 - t)**alpha, n points."""
    x, w = roots_jacobi(n, alpha, 0.0)
    t = 0.5 * (x + 1.0)
    w = w / 2.0 ** (alpha + 1)
    return t, w


@lru_cache(maxsize=None)
def gauss_lobatto01(npts):
    """Gauss-Lobatto nodes and weights on [0, 1] with ``npts`` >= 2 points."""
    if npts < 2:
        raise ValueError("Gauss-Lobatto needs at least two points")
    m = npts - 1
    P = np.polynomial.legendre.Legendre.basis(m)
    interior = np.sort(P.deriv().roots().real)
    x = np.concatenate([[-1.0], interior, [1.0]])
    w = 2.0 / (m * (m + 1) * P(x) ** 2)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def reference_triangle_rule(degree):
    """Collapsed-coordinate rule on the unit triangle, exact to ``degree``."""
    n = max(1, (degree + 2) // 2)
    tu, wu = gauss_jacobi01(n, 1.0)
    tv, wv = gauss_jacobi01(n, 0.0)
    U, V = np.meshgrid(tu, tv, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.column_stack([U.ravel(), (V * (1 - U)).ravel()])
    return pts, W.ravel()


@lru_cache(maxsize=None)
def reference_tet_rule(degree):
    """Collapsed-coordinate rule on the unit tetrahedron, exact to ``degree``."""
    n = max(1, (degree + 2) // 2)
    tu, wu = gauss_jacobi01(n, 2.0)
    tv, wv = gauss_jacobi01(n, 1.0)
    tw, ww = gauss_jacobi01(n, 0.0)
    U, V, Wc = np.meshgrid(tu, tv, tw, indexing="ij")
    W = wu[:, None, None] * wv[None, :, None] * ww[None, None, :]
    x = U
    y = V * (1 - U)
    z = Wc * (1 - U) * (1 - V)
    pts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    return pts, W.ravel()


def triangle_quadrature(tris, degree):
    """Rule on a batch of triangles ``tris`` (T, 3, dim): points, weights."""
    ref, w = reference_triangle_rule(degree)
    a = tris[:, 0, :]
    e1 = tris[:, 1, :] - a
    e2 = tris[:, 2, :] - a
    if tris.shape[2] == 2:
        jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    else:
        jac = np.linalg.norm(np.cross(e1, e2), axis=1)
    pts = a[:, None, :] + ref[None, :, 0:1] * e1[:, None, :] + ref[None, :, 1:2] * e2[:, None, :]
    wts = jac[:, None] * w[None, :]
    return pts.reshape(-1, tris.shape[2]), wts.ravel()


def tet_quadrature(tets, degree):
    """Rule on a batch of tetrahedra ``tets`` (T, 4, 3): points, weights."""
    ref, w = reference_tet_rule(degree)
    a = tets[:, 0, :]
    E = tets[:, 1:, :] - a[:, None, :]
    jac = np.abs(np.linalg.det(E))
    pts = a[:, None, :] + ref @ E
    wts = jac[:, None] * w[None, :]
    return pts.reshape(-1, 3), wts.ravel()


def polygon_fan(poly3d, center):
    """Triangles of the fan of a polygon (loop of points) around ``center``."""
    nv = len(poly3d)
    nxt = np.roll(np.arange(nv), -1)
    tris = np.empty((nv, 3, poly3d.shape[1]))
    tris[:, 0] = center
    tris[:, 1] = poly3d
    tris[:, 2] = poly3d[nxt]
    return tris
