"""Global assembly of the discrete Stokes saddle-point system.

The bilinear forms are

    a(u, v) = int nu eps(u) : eps(v),     b(v, q) = int div(v) q,

so the strong form is ``-div(nu eps(u)) - grad p = f`` with ``div u = 0`` and
traction ``(nu eps(u) + p I) n = g`` on Neumann faces.  Pressures are
discontinuous, stored as monomial coefficients per cell.  Dirichlet DOFs are
eliminated; with a pure Dirichlet boundary the pressure mean is fixed by a
Lagrange multiplier.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import poly
from .ordering import SaddleLU
from .vem_space import DofMap, ElementCache, dof_layout, interpolate_local


def _const(val):
    def f(x):
        return np.full(len(x), float(val))
    return f


def _zero_vec(x):
    return np.zeros((len(x), 3))


@dataclass
class StokesProblem:
    """Problem data on a mesh.

    ``nu`` is a scalar or a callable of points (N, 3) -> (N,), evaluated at
    cell centroids.  ``neumann`` decides for a boundary face (centroid,
    outward normal) whether it carries a traction; all other boundary faces
    are Dirichlet with data ``dirichlet``.
    """
    mesh: object
    k: int
    nu: object = 1.0
    f: Callable = _zero_vec
    dirichlet: Callable = _zero_vec
    traction: Optional[Callable] = None     # g(points, normals) -> (N, 3)
    neumann: Optional[Callable] = None      # (centroid, normal) -> bool
    stab_sigma: float = 1.0
    name: str = "stokes"

    def nu_cells(self):
        m = self.mesh
        if callable(self.nu):
            return np.asarray(self.nu(m.cell_centroid), dtype=float)
        return np.full(m.n_cells, float(self.nu))

    def boundary_split(self):
        """(dirichlet faces, neumann faces) among boundary faces."""
        m = self.mesh
        bf = m.boundary_faces
        if self.neumann is None:
            return bf, bf[:0]
        is_n = np.array([bool(self.neumann(m.face_centroid[f], m.outward_normal(f))) for f in bf],
                        dtype=bool)
        return bf[~is_n], bf[is_n]


@dataclass
class SaddleSystem:
    """Assembled system on free velocity DOFs.

    ``A`` (nfree x nfree), ``B`` (npress x nfree), right-hand sides ``f`` and
    ``g`` (the latter collects the Dirichlet lifting).  ``mean`` is the
    pressure-mean functional when the pressure is only defined up to a
    constant, else None.
    """
    problem: StokesProblem
    dofmap: DofMap
    cache: ElementCache
    A: sp.csr_matrix
    B: sp.csr_matrix
    f: np.ndarray
    g: np.ndarray
    free: np.ndarray
    dirichlet_dofs: np.ndarray
    u_dirichlet: np.ndarray
    mean: Optional[np.ndarray]
    nu_cells: np.ndarray
    dirichlet_faces: np.ndarray
    neumann_faces: np.ndarray
    dof_coords: np.ndarray = None     # free velocity DOF locations (for ordering)
    timings: dict = field(default_factory=dict)

    @property
    def n_free(self):
        return len(self.free)

    @property
    def n_pressure(self):
        return self.B.shape[0]

    def full_velocity(self, u_free):
        u = self.u_dirichlet.copy()
        u[self.free] = u_free
        return u

    def matrix(self):
        """Complete saddle matrix (with the mean multiplier when present)."""
        blocks = [[self.A, self.B.T], [self.B, None]]
        M = sp.bmat(blocks, format="csr")
        if self.mean is not None:
            n = M.shape[0]
            col = np.zeros(n)
            col[self.n_free:] = self.mean
            c = sp.csr_matrix(col[:, None])
            M = sp.bmat([[M, c], [c.T, None]], format="csr")
        return M

    def rhs(self):
        r = np.concatenate([self.f, self.g])
        if self.mean is not None:
            r = np.concatenate([r, [0.0]])
        return r


def _cell_moments(func, pts, wts, center, h, deg):
    """int_K func_c m_a for every component c (returns (3, nP))."""
    vals = func(pts)
    mono = poly.monomials(pts, center, h, deg)
    return (mono * wts[:, None]).T @ vals


def assemble(problem, cache=None, chunk=256):
    """Assemble velocity stiffness, divergence matrix and loads."""
    import time
    t0 = time.perf_counter()
    mesh, k = problem.mesh, problem.k
    cache = cache or ElementCache(mesh, k, stab_sigma=problem.stab_sigma)
    dm = DofMap(mesh, k)
    nu = problem.nu_cells()
    nk = poly.dim_poly(3, k)
    npl = dm.n_pressure_local
    nvel = dm.n_velocity

    A = sp.csr_matrix((nvel, nvel))
    Brows, Bcols, Bvals = [], [], []
    F = np.zeros(nvel)
    mean = np.zeros(dm.n_pressure)
    rows, cols, vals = [], [], []
    xsum = np.zeros((nvel, 3))
    xcnt = np.zeros(nvel)
    for K in range(mesh.n_cells):
        op = cache.ops(K)
        lc = cache.cell(K)
        l2g = dm.local_to_global(lc)
        np.add.at(xsum, l2g, mesh.cell_centroid[K])
        np.add.at(xcnt, l2g, 1.0)
        Aloc = nu[K] * op.a_local
        rows.append(np.repeat(l2g, len(l2g)))
        cols.append(np.tile(l2g, len(l2g)))
        vals.append(Aloc.ravel())
        pd = dm.pressure_dofs(K)
        Brows.append(np.repeat(pd, len(l2g)))
        Bcols.append(np.tile(l2g, npl))
        Bvals.append(op.b_local.ravel())
        fm = _cell_moments(problem.f, op.qpts + lc.center, op.qwts, lc.center, lc.h, k)
        F[l2g] += np.einsum("ac,cad->d", fm, op.proj_l2.reshape(3, nk, -1))
        mean[pd] = op.pressure_integrals
        if len(rows) >= chunk:
            A = A + sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                  shape=(nvel, nvel))
            rows, cols, vals = [], [], []
    if rows:
        A = A + sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(nvel, nvel))
    A = 0.5 * (A + A.T)
    B = sp.csr_matrix((np.concatenate(Bvals), (np.concatenate(Brows), np.concatenate(Bcols))),
                      shape=(dm.n_pressure, nvel))
    B.eliminate_zeros()

    dfaces, nfaces = problem.boundary_split()
    # tractions
    if len(nfaces):
        if problem.traction is None:
            raise ValueError("Neumann faces present but no traction given")
        for f in nfaces:
            K = mesh.face_cells[f, 0]
            lc = cache.cell(K)
            op = cache.ops(K)
            i = int(np.where(lc.fids == f)[0][0])
            x = op.face_qpts[i] + lc.center
            nout = np.tile(lc.fsign[i] * lc.fnormal[i], (len(x), 1))
            g = problem.traction(x, nout)
            loc = np.einsum("q,qc,cqd->d", op.face_qwts[i], g, op.face_vals[i])
            F[dm.local_to_global(lc)] += loc
    # Dirichlet data
    ddofs = []
    uD = np.zeros(nvel)
    touched = set()
    for f in dfaces:
        ddofs.append(dm.vertex_dofs(mesh.faces[f]))
        ddofs.append(dm.edge_dofs(mesh.face_edges[f]))
        ddofs.append(dm.face_dofs(f))
        touched.add(int(mesh.face_cells[f, 0]))
    ddofs = np.unique(np.concatenate(ddofs)) if ddofs else np.zeros(0, dtype=int)
    if len(ddofs):
        mask = np.zeros(nvel, dtype=bool)
        mask[ddofs] = True
        for K in sorted(touched):
            lc = cache.cell(K)
            l2g = dm.local_to_global(lc)
            sel = mask[l2g]
            vals_loc = interpolate_local(lc, cache.ops(K), k, problem.dirichlet)
            uD[l2g[sel]] = vals_loc[sel]
    free = np.setdiff1d(np.arange(nvel), ddofs)
    Af = A[free][:, free].tocsr()
    Bf = B[:, free].tocsr()
    rhs_f = F[free] - A[free][:, ddofs] @ uD[ddofs] if len(ddofs) else F[free]
    rhs_g = -(B[:, ddofs] @ uD[ddofs]) if len(ddofs) else np.zeros(dm.n_pressure)
    has_neumann = len(nfaces) > 0
    sysm = SaddleSystem(problem, dm, cache, Af, Bf, rhs_f, rhs_g, free, ddofs, uD,
                        None if has_neumann else mean, nu, dfaces, nfaces,
                        dof_coords=(xsum / np.maximum(xcnt, 1.0)[:, None])[free])
    sysm.timings["assembly"] = time.perf_counter() - t0
    return sysm


def solve_direct(system):
    """Sparse LU solve of the full saddle system; returns (u_full, p)."""
    M = system.matrix().tocsc()
    x = SaddleLU(M, system.n_free, system.dof_coords).solve(system.rhs())
    nf = system.n_free
    u = system.full_velocity(x[:nf])
    p = x[nf:nf + system.n_pressure]
    return u, p


def export_matrix(system, path):
    """Write the saddle matrix in Matrix Market coordinate format."""
    import scipy.io
    scipy.io.mmwrite(path, system.matrix())


def pressure_mean(system, p):
    dm = system.dofmap
    vol = system.problem.mesh.cell_volume.sum()
    tot = 0.0
    for K in range(system.problem.mesh.n_cells):
        op = system.cache.ops(K)
        tot += op.pressure_integrals @ p[dm.pressure_dofs(K)]
    return tot / vol


def compute_errors(system, u, p, u_exact, grad_exact, p_exact, normalize_pressure=None):
    """Absolute and relative errors of the discrete solution.

    ``grad_exact(x)`` returns (N, 3, 3) with entry [c, d] = d u_c / d x_d.
    The velocity H1 error uses the projected gradient, the L2 errors the L2
    projection onto [P_k]^3.  Pressures are compared after removing means
    when the discrete pressure is only defined up to a constant.
    """
    mesh, k = system.problem.mesh, system.problem.k
    dm, cache = system.dofmap, system.cache
    nk, nkm1 = poly.dim_poly(3, k), poly.dim_poly(3, k - 1)
    if normalize_pressure is None:
        normalize_pressure = system.mean is not None
    shift_h = pressure_mean(system, p) if normalize_pressure else 0.0
    shift_e = 0.0
    if normalize_pressure:
        tot = 0.0
        for K in range(mesh.n_cells):
            op = cache.ops(K)
            lc = cache.cell(K)
            tot += op.qwts @ p_exact(op.qpts + lc.center)
        shift_e = tot / mesh.cell_volume.sum()
    eh1 = eu = ep = nh1 = nu_ = npr = 0.0
    for K in range(mesh.n_cells):
        op = cache.ops(K)
        lc = cache.cell(K)
        x = op.qpts + lc.center
        w = op.qwts
        ul = u[dm.local_to_global(lc)]
        pl = p[dm.pressure_dofs(K)]
        m_k = poly.monomials(op.qpts, np.zeros(3), lc.h, k)
        m_km1 = m_k[:, :nkm1]
        uh = m_k @ (op.proj_l2 @ ul).reshape(3, nk).T
        gh = np.einsum("qa,cda->qcd", m_km1, (op.proj_grad @ ul).reshape(3, 3, nkm1))
        ph = m_km1 @ (op.pressure_basis @ pl) - shift_h
        ue, ge, pe = u_exact(x), grad_exact(x), p_exact(x) - shift_e
        eh1 += w @ ((ge - gh) ** 2).sum(axis=(1, 2))
        nh1 += w @ (ge ** 2).sum(axis=(1, 2))
        eu += w @ ((ue - uh) ** 2).sum(axis=1)
        nu_ += w @ (ue ** 2).sum(axis=1)
        ep += w @ (pe - ph) ** 2
        npr += w @ pe ** 2
    out = {
        "h1_velocity": np.sqrt(eh1), "l2_velocity": np.sqrt(eu), "l2_pressure": np.sqrt(ep),
    }
    out["h1_velocity_rel"] = out["h1_velocity"] / max(np.sqrt(nh1), 1e-300)
    out["l2_velocity_rel"] = out["l2_velocity"] / max(np.sqrt(nu_), 1e-300)
    out["l2_pressure_rel"] = out["l2_pressure"] / max(np.sqrt(npr), 1e-300)
    return out


def local_dofs_count(k, nv, ne, nf):
    return dof_layout(k, nv, ne, nf)["n"]
