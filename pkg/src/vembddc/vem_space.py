"""Divergence-free virtual element space of degree k on polyhedra.

Degrees of freedom of a cell (local ordering):

* vertex values, three components per vertex
* values at the k-1 interior Gauss-Lobatto points of each edge (three comps)
* per face, scaled moments ``(1/|f|) int_f (v.n_f) m_b``, then the same with
  ``v.t1`` and ``v.t2`` for all 2D monomials of degree <= k-2, using the
  global face normal and frame
* cell moments ``(1/|K|) int_K v.g_j`` for a basis ``g_j`` of
  ``xhat ^ [P_{k-3}]^3``
* divergence moments ``(h_K/|K|) int_K div(v) m_a`` for 1 <= |a| <= k-1

From these the element computes, with no knowledge of the basis functions,
the H1 projection onto ``[P_k]^3``, the L2 projection onto ``[P_k]^3``, the
L2 projection of the gradient onto ``[P_{k-1}]^{3x3}`` and the divergence as
a polynomial of degree k-1.  Polynomials on the cell use the scaled
variables ``xhat = (x - x_K) / h_K``; ``xhat`` also replaces ``x`` in the
``x ^ p`` complements, which spans an equivalent space.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import poly
from .mesh import _lexkey


def _spd_solve(M, B):
    return cho_solve(cho_factor(M), B)


# ---------------------------------------------------------------------------
# faces


@dataclass
class FaceOps:
    """Scalar face operators for one face, in the face's scalar DOF order.

    Scalar DOFs: loop vertex values, then k-1 edge points per loop edge
    (ordered along the global edge direction), then moments
    ``(1/|f|) int_f v q_b`` where ``q_b`` is the basis of P_{k-2}(f)
    orthonormal for ``(1/|f|) int_f`` obtained from the scaled monomials by
    Cholesky; ``q_0 = 1``.
    """
    k: int
    n_dof: int
    center: np.ndarray
    h: float
    area: float
    normal: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    proj_h1: np.ndarray      # coefficients of Pi^nabla_k in 2D monomials
    proj_l2: np.ndarray      # coefficients of Pi^0_{k+1}
    qpts: np.ndarray         # quadrature points (3D)
    qwts: np.ndarray
    values_l2: np.ndarray    # Pi^0_{k+1} v at quadrature points
    moment_map: np.ndarray   # monomial moments = moment_map @ moment DOFs


def face_coords(pts, center, t1, t2):
    d = pts - center
    return np.column_stack([d @ t1, d @ t2])


def build_face_ops(pts, edge_rev, normal, t1, t2, center, area, h, k, qdeg=None):
    """Projectors of the scalar enhanced face space on one planar polygon.

    ``pts`` is the (nv, 3) vertex loop, ``edge_rev[i]`` tells whether loop
    edge i runs against its global direction.
    """
    nv = len(pts)
    ne_pts = k - 1
    m2 = poly.dim_poly(2, k - 2)
    nfd = nv + nv * ne_pts + m2
    moff = nv + nv * ne_pts
    qdeg = 2 * k + 2 if qdeg is None else qdeg
    tris = poly.polygon_fan(pts, center)
    qp, qw = poly.triangle_quadrature(tris, qdeg)
    q2 = face_coords(qp, center, t1, t2)
    p2 = face_coords(pts, center, t1, t2)
    z = np.zeros(2)
    nk = poly.dim_poly(2, k)
    nk1 = poly.dim_poly(2, k + 1)

    # boundary Gauss-Lobatto points coincide with the vertex/edge DOFs
    s, gw = poly.gauss_lobatto01(k + 1)
    G = np.zeros((nk, nk))
    B = np.zeros((nk, nfd))
    gradq = poly.monomial_gradients(q2, z, h, k)
    G[1:] = np.einsum("q,qad,qbd->ab", qw, gradq, gradq, optimize=True)[1:]
    for i in range(nv):
        a, b = p2[i], p2[(i + 1) % nv]
        d = b - a
        le = np.linalg.norm(d)
        nrm = np.array([d[1], -d[0]]) / le
        bp = a[None, :] + s[:, None] * d[None, :]
        mono = poly.monomials(bp, z, h, k)
        grad = poly.monomial_gradients(bp, z, h, k)
        dn = grad @ nrm
        # scalar dof index of each boundary point along the loop
        idx = [i]
        inner = [nv + i * ne_pts + j for j in range(ne_pts)]
        if edge_rev[i]:
            inner = inner[::-1]
        idx += inner + [(i + 1) % nv]
        wt = gw * le
        G[0] += wt @ mono
        B[0, idx] += wt
        B[1:, idx] += (dn * wt[:, None]).T[1:]
    monq = poly.monomials(q2, z, h, k + 1)
    H = monq.T @ (qw[:, None] * monq)
    mmap = np.linalg.cholesky(H[:m2, :m2] / area)
    L = poly.laplacian_matrix(2, k) / h ** 2
    B[1:, moff:moff + m2] -= area * L.T[1:, :m2] @ mmap
    proj_h1 = np.linalg.solve(G, B)

    rhs = np.zeros((nk1, nfd))
    rhs[:m2, moff:moff + m2] = area * mmap
    rhs[m2:] = H[m2:, :nk] @ proj_h1
    proj_l2 = _spd_solve(H, rhs)
    return FaceOps(k, nfd, center, h, area, normal, t1, t2, proj_h1, proj_l2,
                   qp, qw, monq @ proj_l2, mmap)


# ---------------------------------------------------------------------------
# local cell description


@dataclass
class LocalCell:
    """Cell entities in a geometry-determined local order."""
    index: int
    center: np.ndarray
    h: float
    volume: float
    verts: np.ndarray          # (nv, 3) coordinates relative to center
    vids: np.ndarray           # global vertex ids
    eids: np.ndarray           # global edge ids
    edges: np.ndarray          # (ne, 2) local vertex indices, global direction
    fids: np.ndarray           # global face ids
    fsign: np.ndarray          # +1 when the global face normal is outward
    floops: list               # local vertex loops (global loop order)
    fedges: list               # local edge index per loop edge
    frev: list                 # loop edge runs against the edge direction
    fnormal: np.ndarray
    ft1: np.ndarray
    ft2: np.ndarray
    fcenter: np.ndarray        # relative to cell center
    farea: np.ndarray
    fdiam: np.ndarray

    def key(self, k):
        rel = np.round(self.verts, _ROUND_KEY) + 0.0
        return (k, rel.tobytes(), self.edges.tobytes(), self.fsign.tobytes(),
                tuple(tuple(l) for l in self.floops))


_ROUND_KEY = 10


def local_cell(mesh, K):
    xK = mesh.cell_centroid[K]
    vids = mesh.cell_vertices[K]
    rel = mesh.vertices[vids] - xK
    order = sorted(range(len(vids)), key=lambda i: _lexkey(rel[i]))
    vids = vids[order]
    rel = rel[order]
    vloc = {int(v): i for i, v in enumerate(vids)}
    eids = mesh.cell_edges(K)
    mids = 0.5 * (mesh.vertices[mesh.edges[eids, 0]] + mesh.vertices[mesh.edges[eids, 1]]) - xK
    eorder = sorted(range(len(eids)), key=lambda i: _lexkey(mids[i]))
    eids = eids[eorder]
    eloc = {int(e): i for i, e in enumerate(eids)}
    edges = np.array([[vloc[int(a)], vloc[int(b)]] for a, b in mesh.edges[eids]], dtype=int)
    fids = np.asarray(mesh.cells[K])
    fs = np.asarray(mesh.cell_signs[K])
    fc = mesh.face_centroid[fids] - xK
    forder = sorted(range(len(fids)), key=lambda i: _lexkey(fc[i]))
    fids, fs, fc = fids[forder], fs[forder], fc[forder]
    floops = [[vloc[int(v)] for v in mesh.faces[f]] for f in fids]
    fedges = [[eloc[int(e)] for e in mesh.face_edges[f]] for f in fids]
    frev = [np.asarray(mesh.face_edge_rev[f]) for f in fids]
    return LocalCell(K, xK, mesh.cell_diam[K], mesh.cell_volume[K], rel, vids, eids, edges,
                     fids, fs.astype(int), floops, fedges, frev,
                     mesh.face_normal[fids], mesh.face_t1[fids], mesh.face_t2[fids], fc,
                     mesh.face_area[fids], mesh.face_diam[fids])


# ---------------------------------------------------------------------------
# element


def xwedge_basis(k, mass):
    """Basis of ``xhat ^ [P_{k-1}]^3`` grouped by homogeneous degree.

    Candidates of each degree are reduced by pivoted Gram orthogonalization
    in the L2(K) inner product given by the scalar mass matrix ``mass``
    (degree >= k).  Returns (coef array (n, 3, dim_poly(3, k)), degrees).
    """
    nk = poly.dim_poly(3, k)
    out, degs = [], []
    Mk = mass[:nk, :nk]
    for d in range(k):
        cand = poly.xwedge_candidates(d)
        C = np.zeros((len(cand), 3, nk))
        C[:, :, : cand.shape[2]] = cand
        gram = np.einsum("icp,pq,jcq->ij", C, Mk, C, optimize=True)
        sel = _pivoted_gram(gram, 1e-10)
        expect = 3 * poly.dim_poly(2, d) - poly.dim_poly(2, d - 1)
        if len(sel) != expect:
            raise ArithmeticError(f"x^P rank {len(sel)} differs from {expect} at degree {d}")
        out.append(C[sel])
        degs += [d] * len(sel)
    if out:
        return np.concatenate(out), np.array(degs)
    return np.zeros((0, 3, nk)), np.zeros(0, dtype=int)


def _pivoted_gram(gram, tol):
    """Indices selected by pivoted Cholesky of a Gram matrix."""
    n = gram.shape[0]
    G = gram.copy()
    scale = np.max(np.diag(G))
    sel = []
    L = np.zeros((n, 0))
    diag = np.diag(G).copy()
    for _ in range(n):
        j = int(np.argmax(diag))
        if diag[j] <= tol * scale:
            break
        col = (G[:, j] - L @ L[j]) / np.sqrt(diag[j])
        L = np.column_stack([L, col])
        diag = diag - col ** 2
        diag[sel + [j]] = 0.0
        sel.append(j)
    return sorted(sel)


@dataclass
class ElementOps:
    """Local operators of one cell (translation invariant).

    Polynomial coefficient blocks are component-major: index ``c*n + a``.
    """
    k: int
    n_dof: int
    n_xw: int
    n_div: int
    volume: float
    h: float
    proj_h1: np.ndarray       # (3 nPk, ndof)
    proj_l2: np.ndarray       # (3 nPk, ndof)
    proj_grad: np.ndarray     # (9 nPk-1, ndof), block (c, d) = d v_c / d x_d
    div: np.ndarray           # (nPk-1, ndof) coefficients of div v
    b_local: np.ndarray       # (nPk-1, ndof) int_K div v q_a
    a_consistency: np.ndarray
    a_stab: np.ndarray
    dofs_of_poly: np.ndarray  # (ndof, 3 nPk)
    mass: np.ndarray          # scalar monomial mass up to degree k+1
    qpts: np.ndarray          # cell quadrature points relative to center
    qwts: np.ndarray
    face_qpts: list           # relative to center
    face_qwts: list
    face_vals: list           # (3, nq, ndof) Pi^0_{k+1,f} of each component
    xw: np.ndarray = field(repr=False, default=None)
    xw_deg: np.ndarray = field(repr=False, default=None)
    pressure_basis: np.ndarray = field(repr=False, default=None)   # monomial coefs of q_a
    pressure_integrals: np.ndarray = field(repr=False, default=None)
    face_moment_maps: list = field(repr=False, default=None)

    @property
    def a_local(self):
        return self.a_consistency + self.a_stab


def dof_layout(k, nv, ne, nf):
    """Offsets of the five DOF groups in a cell with nv/ne/nf entities."""
    m2 = poly.dim_poly(2, k - 2)
    n_xw = 3 * poly.dim_poly(3, k - 3) - poly.dim_poly(3, k - 4)
    n_div = poly.dim_poly(3, k - 1) - 1
    o_e = 3 * nv
    o_f = o_e + 3 * (k - 1) * ne
    o_4 = o_f + 3 * m2 * nf
    o_5 = o_4 + n_xw
    return dict(m2=m2, n_xw=n_xw, n_div=n_div, o_e=o_e, o_f=o_f, o_4=o_4, o_5=o_5,
                n=o_5 + n_div)


def build_element_ops(lc, k, stab_sigma=1.0):
    """Compute every projector and local matrix of the cell ``lc``."""
    if k < 2:
        raise ValueError("degree k must be >= 2")
    nv, ne, nf = len(lc.verts), len(lc.edges), len(lc.fids)
    lay = dof_layout(k, nv, ne, nf)
    nd, m2 = lay["n"], lay["m2"]
    h, vol = lc.h, lc.volume
    z = np.zeros(3)
    nk, nk1, nkm1, nkm2 = (poly.dim_poly(3, d) for d in (k, k + 1, k - 1, k - 2))

    # cell quadrature on the centered cell
    tets = []
    for i in range(nf):
        pts = lc.verts[lc.floops[i]]
        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            tets.append([z, lc.fcenter[i], a, b])
    qp, qw = poly.tet_quadrature(np.array(tets), 2 * k + 1)
    monq = poly.monomials(qp, z, h, k + 1)
    mass = monq.T @ (qw[:, None] * monq)

    # faces
    fvals, fqp, fqw, fmono, fops = [], [], [], [], []
    for i in range(nf):
        loop = lc.floops[i]
        fo = build_face_ops(lc.verts[loop], lc.frev[i], lc.fnormal[i], lc.ft1[i], lc.ft2[i],
                            lc.fcenter[i], lc.farea[i], lc.fdiam[i], k)
        fops.append(fo)
        nfd = fo.n_dof
        L = np.zeros((3, nfd, nd))
        nvf = len(loop)
        for c in range(3):
            for j, v in enumerate(loop):
                L[c, j, 3 * v + c] = 1.0
            for j, le in enumerate(lc.fedges[i]):
                for p in range(k - 1):
                    L[c, nvf + j * (k - 1) + p, lay["o_e"] + 3 * ((k - 1) * le + p) + c] = 1.0
            base = lay["o_f"] + 3 * m2 * i
            for blk, vec in enumerate((lc.fnormal[i], lc.ft1[i], lc.ft2[i])):
                for b in range(m2):
                    L[c, nvf + nvf * (k - 1) + b, base + blk * m2 + b] = vec[c]
        fvals.append(np.einsum("qs,csd->cqd", fo.values_l2, L))
        fqp.append(fo.qpts)
        fqw.append(fo.qwts)
        fmono.append(poly.monomials(fo.qpts, z, h, k + 1))

    # divergence as a polynomial of degree k-1
    # pressures and divergence moments use the basis q = Lc^{-1} m of
    # P_{k-1}(K), orthonormal for (1/|K|) int_K, with q_0 = 1
    Lc = np.linalg.cholesky(mass[:nkm1, :nkm1] / vol)
    Lc_inv = np.linalg.inv(Lc)
    b_local = np.zeros((nkm1, nd))
    for i in range(nf):
        b_local[0, lay["o_f"] + 3 * m2 * i] += lc.fsign[i] * lc.farea[i]
    b_local[1:, lay["o_5"]:lay["o_5"] + lay["n_div"]] = np.eye(lay["n_div"]) * vol / h
    divc = _spd_solve(mass[:nkm1, :nkm1], Lc @ b_local)

    # boundary integrals int_{dK} (v_c * n_d) m_a for all a <= k+1
    bnd = np.zeros((3, 3, nk1, nd))
    bnd_scalar = np.zeros((3, nk1, nd))
    for i in range(nf):
        wm = fmono[i] * fqw[i][:, None]
        t = np.einsum("qa,cqd->cad", wm, fvals[i], optimize=True)
        bnd_scalar += t
        nout = lc.fsign[i] * lc.fnormal[i]
        bnd += nout[None, :, None, None] * t[:, None]

    xw, xw_deg = xwedge_basis(k, mass)
    n4 = lay["n_xw"]
    if n4:
        # orthonormalize the cell-moment test functions for (1/|K|) int_K
        Mk_ = mass[:nk, :nk]
        gram = np.einsum("icp,pq,jcq->ij", xw[:n4], Mk_, xw[:n4], optimize=True) / vol
        Lx = np.linalg.cholesky(gram)
        xw = xw.copy()
        xw[:n4] = np.einsum("ij,jcp->icp", np.linalg.inv(Lx), xw[:n4])

    def vector_moments(n, proj_h1=None):
        """Rows (c*dim(P_n) + a): int_K v . (m_a e_c)."""
        npn = poly.dim_poly(3, n)
        cols = []
        for b in range(1, poly.dim_poly(3, n + 1)):
            g = np.zeros((3, npn))
            for ax in range(3):
                g[ax] = poly.derivative_matrix(3, n + 1, ax)[:, b]
            cols.append(g.ravel())
        use = np.where(xw_deg <= n - 1)[0]
        for j in use:
            cols.append(xw[j, :, :npn].ravel())
        Q = np.array(cols).T
        Y = np.linalg.solve(Q, np.eye(3 * npn))
        ngr = poly.dim_poly(3, n + 1) - 1
        mom_basis = np.zeros((ngr + len(use), nd))
        # int v . grad_hat m_b = h (-int div v m_b + int_dK v.n m_b)
        for b in range(1, ngr + 1):
            mom_basis[b - 1] = h * (-mass[b, :nkm1] @ divc + sum(bnd[c, c, b] for c in range(3)))
        for r, j in enumerate(use):
            if xw_deg[j] <= k - 3:
                row = np.zeros(nd)
                row[lay["o_4"] + j] = vol
            else:
                gj = xw[j]
                row = sum((mass[:nk, :nk] @ gj[c]) @ proj_h1[c * nk:(c + 1) * nk] for c in range(3))
            mom_basis[ngr + r] = row
        return Y.T @ mom_basis

    vm_low = vector_moments(k - 2)
    # H1 projection of each component
    grad_q = poly.monomial_gradients(qp, z, h, k)
    G = np.einsum("q,qad,qbd->ab", qw, grad_q, grad_q, optimize=True)
    G[0] = sum(fqw[i] @ fmono[i][:, :nk] for i in range(nf))
    Lap = poly.laplacian_matrix(3, k) / h ** 2
    proj_h1 = np.zeros((3 * nk, nd))
    gnb = np.zeros((nk, 3, nd))  # int_dK (grad m_a . n) v_c
    for i in range(nf):
        gr = poly.monomial_gradients(fqp[i], z, h, k) @ (lc.fsign[i] * lc.fnormal[i])
        gnb += np.einsum("qa,cqd->acd", gr * fqw[i][:, None], fvals[i], optimize=True)
    for c in range(3):
        rhs = np.zeros((nk, nd))
        rhs[1:] = -Lap.T[1:] @ vm_low[c * nkm2:(c + 1) * nkm2] + gnb[1:, c]
        rhs[0] = bnd_scalar[c, 0]
        proj_h1[c * nk:(c + 1) * nk] = np.linalg.solve(G, rhs)

    vm_k = vector_moments(k, proj_h1)
    proj_l2 = np.zeros((3 * nk, nd))
    for c in range(3):
        proj_l2[c * nk:(c + 1) * nk] = _spd_solve(mass[:nk, :nk], vm_k[c * nk:(c + 1) * nk])

    proj_grad = np.zeros((9 * nkm1, nd))
    Mkm1 = mass[:nkm1, :nkm1]
    for c in range(3):
        for d in range(3):
            D = poly.derivative_matrix(3, k - 1, d) / h
            mom = -D.T @ vm_low[c * nkm2:(c + 1) * nkm2] + bnd[c, d, :nkm1]
            proj_grad[(3 * c + d) * nkm1:(3 * c + d + 1) * nkm1] = _spd_solve(Mkm1, mom)

    # consistency: int eps(Pi v) : eps(Pi v) with the projected gradient
    PG = proj_grad.reshape(3, 3, nkm1, nd)
    E = 0.5 * (PG + PG.transpose(1, 0, 2, 3))
    a_cons = np.einsum("cdax,ab,cdby->xy", E, Mkm1, E, optimize=True)
    a_cons = 0.5 * (a_cons + a_cons.T)

    dop = dofs_of_poly_matrix(lc, k, lay, mass, fops, xw, n4, h, vol, Lc_inv)
    I_P = np.eye(nd) - dop @ proj_h1
    dg = np.diag(a_cons).copy()
    dg = np.maximum(dg, stab_sigma * np.trace(a_cons) / nd)
    a_stab = I_P.T @ (dg[:, None] * I_P)
    a_stab = 0.5 * (a_stab + a_stab.T)

    return ElementOps(k, nd, n4, lay["n_div"], vol, h, proj_h1, proj_l2, proj_grad, divc,
                      b_local, a_cons, a_stab, dop, mass, qp, qw, fqp, fqw, fvals, xw, xw_deg,
                      Lc_inv.T.copy(), Lc_inv @ mass[:nkm1, 0], [fo.moment_map for fo in fops])


def dofs_of_poly_matrix(lc, k, lay, mass, fops, xw, n4, h, vol, Lc_inv):
    """DOF values of the vector polynomials in ``[P_k]^3`` (columns)."""
    nd = lay["n"]
    nk = poly.dim_poly(3, k)
    nkm1 = poly.dim_poly(3, k - 1)
    m2 = lay["m2"]
    z = np.zeros(3)
    D = np.zeros((nd, 3 * nk))
    mv = poly.monomials(lc.verts, z, h, k)
    for c in range(3):
        D[np.arange(len(lc.verts)) * 3 + c, c * nk:(c + 1) * nk] = mv
    if k > 1:
        s, _ = poly.gauss_lobatto01(k + 1)
        s = s[1:-1]
        for e, (a, b) in enumerate(lc.edges):
            pts = lc.verts[a] + s[:, None] * (lc.verts[b] - lc.verts[a])
            me = poly.monomials(pts, z, h, k)
            for p in range(k - 1):
                for c in range(3):
                    D[lay["o_e"] + 3 * ((k - 1) * e + p) + c, c * nk:(c + 1) * nk] = me[p]
    for i, fo in enumerate(fops):
        m3 = poly.monomials(fo.qpts, z, h, k)
        m2v = poly.monomials(face_coords(fo.qpts, fo.center, fo.t1, fo.t2), np.zeros(2), fo.h, k - 2)
        base = lay["o_f"] + 3 * m2 * i
        for blk, vec in enumerate((fo.normal, fo.t1, fo.t2)):
            t = np.linalg.solve(fo.moment_map, (m2v * fo.qwts[:, None]).T @ m3 / fo.area)
            for c in range(3):
                D[base + blk * m2:base + (blk + 1) * m2, c * nk:(c + 1) * nk] = vec[c] * t
    for j in range(n4):
        for c in range(3):
            D[lay["o_4"] + j, c * nk:(c + 1) * nk] = (mass[:nk, :nk] @ xw[j, c]) / vol
    for c in range(3):
        Dc = poly.derivative_matrix(3, k, c) / h
        D[lay["o_5"]:lay["o_5"] + lay["n_div"], c * nk:(c + 1) * nk] = (
            (Lc_inv @ mass[:nkm1, :nkm1] @ Dc)[1:] * h / vol)
    return D


class ElementCache:
    """Builds element operators, reusing them for congruent translated cells."""

    def __init__(self, mesh, k, stab_sigma=1.0, reuse=True):
        self.mesh = mesh
        self.k = k
        self.stab_sigma = stab_sigma
        self.reuse = reuse
        self._ops = {}
        self._cells = [None] * mesh.n_cells
        self._keys = [None] * mesh.n_cells
        self.hits = 0

    def cell(self, K):
        if self._cells[K] is None:
            self._cells[K] = local_cell(self.mesh, K)
        return self._cells[K]

    def ops(self, K):
        lc = self.cell(K)
        key = lc.key(self.k) if self.reuse else K
        op = self._ops.get(key)
        if op is None:
            op = build_element_ops(lc, self.k, self.stab_sigma)
            self._ops[key] = op
        else:
            self.hits += 1
        return op

    @property
    def n_unique(self):
        return len(self._ops)


# ---------------------------------------------------------------------------
# global numbering


class DofMap:
    """Global numbering: velocity DOFs entity-type-major, then pressures.

    Velocity: vertices (3 per vertex), edges (3(k-1) per edge), faces
    (3 dim P_{k-2}(2D) per face, normal block then t1 then t2), cells (x^P
    moments then divergence moments).  Pressure: dim P_{k-1} monomial
    coefficients per cell, stored after the velocity block.
    """

    def __init__(self, mesh, k):
        self.mesh, self.k = mesh, k
        lay = dof_layout(k, 0, 0, 0)
        self.m2 = lay["m2"]
        self.n_xw, self.n_div = lay["n_xw"], lay["n_div"]
        self.per_edge = 3 * (k - 1)
        self.per_face = 3 * self.m2
        self.per_cell = self.n_xw + self.n_div
        self.off_edge = 3 * mesh.n_vertices
        self.off_face = self.off_edge + self.per_edge * mesh.n_edges
        self.off_cell = self.off_face + self.per_face * mesh.n_faces
        self.n_velocity = self.off_cell + self.per_cell * mesh.n_cells
        self.n_pressure_local = poly.dim_poly(3, k - 1)
        self.n_pressure = self.n_pressure_local * mesh.n_cells
        self.n_total = self.n_velocity + self.n_pressure

    def vertex_dofs(self, v):
        v = np.atleast_1d(v)
        return (3 * v[:, None] + np.arange(3)).ravel()

    def edge_dofs(self, e):
        e = np.atleast_1d(e)
        return (self.off_edge + self.per_edge * e[:, None] + np.arange(self.per_edge)).ravel()

    def face_dofs(self, f):
        f = np.atleast_1d(f)
        return (self.off_face + self.per_face * f[:, None] + np.arange(self.per_face)).ravel()

    def face_flux_dof(self, f):
        """Index of the zero-order normal moment (flux / |f|) of face ``f``."""
        return self.off_face + self.per_face * np.asarray(f)

    def cell_dofs(self, K):
        K = np.atleast_1d(K)
        return (self.off_cell + self.per_cell * K[:, None] + np.arange(self.per_cell)).ravel()

    def pressure_dofs(self, K):
        K = np.atleast_1d(K)
        return (self.n_pressure_local * K[:, None] + np.arange(self.n_pressure_local)).ravel()

    def local_to_global(self, lc):
        return np.concatenate([
            self.vertex_dofs(lc.vids),
            self.edge_dofs(lc.eids),
            self.face_dofs(lc.fids),
            self.cell_dofs(lc.index),
        ])

    def entity_of_dof(self):
        """Per velocity DOF: (entity type 0..3, entity index)."""
        t = np.zeros(self.n_velocity, dtype=int)
        idx = np.zeros(self.n_velocity, dtype=int)
        m = self.mesh
        t[:self.off_edge] = 0
        idx[:self.off_edge] = np.arange(self.off_edge) // 3
        t[self.off_edge:self.off_face] = 1
        idx[self.off_edge:self.off_face] = np.arange(self.off_face - self.off_edge) // max(self.per_edge, 1)
        t[self.off_face:self.off_cell] = 2
        idx[self.off_face:self.off_cell] = np.arange(self.off_cell - self.off_face) // self.per_face
        t[self.off_cell:] = 3
        idx[self.off_cell:] = np.arange(self.n_velocity - self.off_cell) // self.per_cell
        assert m is not None
        return t, idx


def count_dofs(mesh, k):
    """(velocity, pressure) DOF counts."""
    d = DofMap(mesh, k)
    return d.n_velocity, d.n_pressure


# ---------------------------------------------------------------------------
# interpolation


def interpolate_local(lc, ops, k, func, qdeg=None):
    """Local DOF values of a vector field ``func(points) -> (N, 3)``."""
    lay = dof_layout(k, len(lc.verts), len(lc.edges), len(lc.fids))
    nd, m2 = lay["n"], lay["m2"]
    h, vol = lc.h, lc.volume
    xK = lc.center
    z = np.zeros(3)
    out = np.zeros(nd)
    out[:3 * len(lc.verts)] = func(lc.verts + xK).ravel()
    s, _ = poly.gauss_lobatto01(k + 1)
    s = s[1:-1]
    for e, (a, b) in enumerate(lc.edges):
        pts = lc.verts[a] + s[:, None] * (lc.verts[b] - lc.verts[a])
        val = func(pts + xK)
        out[lay["o_e"] + 3 * (k - 1) * e: lay["o_e"] + 3 * (k - 1) * (e + 1)] = val.ravel()
    qdeg = 2 * k + 2 if qdeg is None else qdeg
    nkm1 = poly.dim_poly(3, k - 1)
    div_mom = np.zeros(nkm1)
    for i in range(len(lc.fids)):
        pts = lc.verts[lc.floops[i]]
        qp, qw = poly.triangle_quadrature(poly.polygon_fan(pts, lc.fcenter[i]), qdeg)
        val = func(qp + xK)
        m2v = poly.monomials(face_coords(qp, lc.fcenter[i], lc.ft1[i], lc.ft2[i]), np.zeros(2),
                             lc.fdiam[i], k - 2)
        base = lay["o_f"] + 3 * m2 * i
        for blk, vec in enumerate((lc.fnormal[i], lc.ft1[i], lc.ft2[i])):
            out[base + blk * m2: base + (blk + 1) * m2] = np.linalg.solve(
                ops.face_moment_maps[i], (m2v.T @ (qw * (val @ vec))) / lc.farea[i])
        mono = poly.monomials(qp, z, h, k - 1)
        div_mom += mono.T @ (qw * (val @ (lc.fsign[i] * lc.fnormal[i])))
    tets = []
    for i in range(len(lc.fids)):
        pts = lc.verts[lc.floops[i]]
        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            tets.append([z, lc.fcenter[i], a, b])
    qp, qw = poly.tet_quadrature(np.array(tets), qdeg)
    val = func(qp + xK)
    grad = poly.monomial_gradients(qp, z, h, k - 1)
    div_mom -= np.einsum("q,qc,qac->a", qw, val, grad, optimize=True)
    out[lay["o_5"]:] = (ops.pressure_basis.T @ div_mom)[1:] * h / vol
    if lay["n_xw"]:
        mono = poly.monomials(qp, z, h, k)
        for j in range(lay["n_xw"]):
            gv = mono @ ops.xw[j].T
            out[lay["o_4"] + j] = (qw * np.einsum("qc,qc->q", val, gv)).sum() / vol
    return out


def face_moment_dofs(mesh, k, f, func, qdeg=None):
    """Face moment DOFs ``[normal, t1, t2]`` blocks of ``func`` on mesh face f."""
    qdeg = 2 * k + 2 if qdeg is None else qdeg
    pts = mesh.vertices[mesh.faces[f]]
    c = mesh.face_centroid[f]
    h, area = mesh.face_diam[f], mesh.face_area[f]
    qp, qw = poly.triangle_quadrature(poly.polygon_fan(pts, c), qdeg)
    t1, t2 = mesh.face_t1[f], mesh.face_t2[f]
    m2v = poly.monomials(face_coords(qp, c, t1, t2), np.zeros(2), h, k - 2)
    L = np.linalg.cholesky(m2v.T @ (qw[:, None] * m2v) / area)
    val = func(qp)
    out = []
    for vec in (mesh.face_normal[f], t1, t2):
        out.append(np.linalg.solve(L, (m2v.T @ (qw * (val @ vec))) / area))
    return np.concatenate(out)


def interpolate(mesh, k, func, cache=None, dofmap=None):
    """Global velocity DOF vector of the interpolant of ``func``."""
    cache = cache or ElementCache(mesh, k)
    dm = dofmap or DofMap(mesh, k)
    u = np.zeros(dm.n_velocity)
    for K in range(mesh.n_cells):
        lc = cache.cell(K)
        u[dm.local_to_global(lc)] = interpolate_local(lc, cache.ops(K), k, func)
    return u


def poly_field(coef, center, h, k):
    """Vector field from component-major monomial coefficients (3 nPk,)."""
    nk = poly.dim_poly(3, k)
    C = np.asarray(coef).reshape(3, nk)

    def f(x):
        return poly.monomials(x, center, h, k) @ C.T

    return f
