"""BDDC preconditioner for the interface saddle-point problem.

Primal constraints live on interface classes:

* vertex classes: every velocity component
* face classes: the net flux through the macro face
* edge classes: averages of ``v . n_F`` along the edge for each incident
  macro face ``F`` (optionally also tangential and binormal averages)

Per class the constraint rows are orthonormalized by SVD (dropping dependent
rows) and turned into explicit coordinates by a pivoted change of basis:
with pivot columns ``P`` chosen by column-pivoted QR, the new coordinates are
the constraint values on ``P`` and the original DOFs elsewhere.  The dual
space (all constraints zero) does not depend on this choice.

Because the flux through a mesh face only depends on its zero-order normal
moment, dual functions have zero flux through every macro face, hence zero
net flux out of each subdomain: the dual space is benign.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import poly
from .ordering import SaddleLU
from .vem_space import face_moment_dofs


# ---------------------------------------------------------------------------
# constraint functionals


class _ClassIndex:
    """Maps free DOF indices to positions inside one class."""

    def __init__(self, cls):
        self.dofs = cls.dofs

    def __call__(self, free_idx):
        free_idx = np.atleast_1d(free_idx)
        pos = np.searchsorted(self.dofs, free_idx)
        ok = (pos < len(self.dofs)) & (self.dofs[np.minimum(pos, len(self.dofs) - 1)] == free_idx)
        return pos, ok


def _free_pos(decomp):
    return decomp.system._free_pos


def face_flux_row(decomp, cls):
    """Net flux through a macro face, oriented out of ``cls.sharing[0]``."""
    system = decomp.system
    mesh, dm = system.problem.mesh, system.dofmap
    fp = _free_pos(decomp)
    idx = _ClassIndex(cls)
    row = np.zeros(cls.size)
    part = decomp.partition.cell_part
    for f in cls.faces:
        K = mesh.face_cells[f, 0] if part[mesh.face_cells[f, 0]] == cls.sharing[0] else mesh.face_cells[f, 1]
        s = mesh.cell_signs[K][int(np.where(mesh.cells[K] == f)[0][0])]
        j = fp[dm.face_flux_dof(f)]
        pos, ok = idx(j)
        if ok[0]:
            row[pos[0]] += s * mesh.face_area[f]
    return row


def macro_normal(decomp, cls):
    """Area-weighted unit normal of a macro face, out of ``cls.sharing[0]``."""
    mesh = decomp.system.problem.mesh
    part = decomp.partition.cell_part
    n = np.zeros(3)
    for f in cls.faces:
        K = mesh.face_cells[f, 0] if part[mesh.face_cells[f, 0]] == cls.sharing[0] else mesh.face_cells[f, 1]
        s = mesh.cell_signs[K][int(np.where(mesh.cells[K] == f)[0][0])]
        n += s * mesh.face_area[f] * mesh.face_normal[f]
    return n / np.linalg.norm(n)


def edge_average_rows(decomp, cls, directions):
    """Rows ``int_E v . d`` over the class's mesh edges for each direction d.

    Gauss-Lobatto quadrature on each mesh edge uses exactly the vertex and
    edge-point DOFs; endpoints outside the class are skipped.
    """
    system = decomp.system
    mesh, dm, k = system.problem.mesh, system.dofmap, system.problem.k
    fp = _free_pos(decomp)
    idx = _ClassIndex(cls)
    s, w = poly.gauss_lobatto01(k + 1)
    rows = np.zeros((len(directions), cls.size))
    edges = cls.edges
    for e in edges:
        a, b = mesh.edges[e]
        L = mesh.edge_length[e]
        pts_dofs = [dm.vertex_dofs(a)]
        ed = dm.edge_dofs(e).reshape(k - 1, 3)
        pts_dofs += [ed[j] for j in range(k - 1)]
        pts_dofs.append(dm.vertex_dofs(b))
        for q, gd in enumerate(pts_dofs):
            pos, ok = idx(fp[gd])
            for r, d in enumerate(directions):
                for c in range(3):
                    if ok[c]:
                        rows[r, pos[c]] += w[q] * L * d[c]
    if not edges:
        # isolated vertices in an edge-type class: point values
        for v in cls.vertices:
            pos, ok = idx(fp[dm.vertex_dofs(v)])
            for r, d in enumerate(directions):
                for c in range(3):
                    if ok[c]:
                        rows[r, pos[c]] += d[c]
    return rows


def edge_tangent(decomp, cls):
    mesh = decomp.system.problem.mesh
    if cls.edges:
        pts = mesh.vertices[np.unique(mesh.edges[cls.edges].ravel())]
    else:
        pts = mesh.vertices[cls.vertices]
    if len(pts) < 2:
        return np.array([1.0, 0.0, 0.0])
    c = pts - pts.mean(axis=0)
    t = np.linalg.svd(c, full_matrices=False)[2][0]
    return t / np.linalg.norm(t)


def incident_faces(decomp):
    """For each edge/vertex class, the face classes touching it geometrically."""
    mesh = decomp.system.problem.mesh
    by_vertex = {}
    for ci, c in enumerate(decomp.classes):
        if c.kind != "face":
            continue
        verts = set()
        for f in c.faces:
            verts.update(int(v) for v in mesh.faces[f])
        for v in verts:
            by_vertex.setdefault(v, set()).add(ci)
    out = {}
    for ci, c in enumerate(decomp.classes):
        if c.kind == "face":
            continue
        verts = set(c.vertices)
        for e in c.edges:
            verts.update(int(v) for v in mesh.edges[e])
        cand = set()
        for v in verts:
            cand |= by_vertex.get(v, set())
        sh = set(c.sharing)
        out[ci] = sorted(f for f in cand if set(decomp.classes[f].sharing) <= sh)
    return out


def closure_classes(decomp):
    """For each face class, the vertex/edge classes on its closure."""
    mesh = decomp.system.problem.mesh
    out = {}
    ent_class = {}
    for ci, c in enumerate(decomp.classes):
        for v in c.vertices:
            ent_class[("v", v)] = ci
        for e in c.edges:
            ent_class[("e", e)] = ci
    for ci, c in enumerate(decomp.classes):
        if c.kind != "face":
            continue
        s = set()
        for f in c.faces:
            for v in mesh.faces[f]:
                x = ent_class.get(("v", int(v)))
                if x is not None and x != ci:
                    s.add(x)
            for e in mesh.face_edges[f]:
                x = ent_class.get(("e", int(e)))
                if x is not None and x != ci:
                    s.add(x)
        out[ci] = sorted(s)
    return out


def rigid_mode_values(decomp):
    """Interface DOF values (n_gamma, 6) of translations and rotations."""
    system = decomp.system
    mesh, dm, k = system.problem.mesh, system.dofmap, system.problem.k
    fp = _free_pos(decomp)
    gp = decomp.gamma_pos
    lo, hi = mesh.bounding_box()
    ctr = 0.5 * (lo + hi)
    fields = []
    for c in range(3):
        e = np.zeros(3)
        e[c] = 1.0
        fields.append(lambda x, e=e: np.tile(e, (len(x), 1)))
    for c in range(3):
        e = np.zeros(3)
        e[c] = 1.0
        fields.append(lambda x, e=e: np.cross(e, x - ctr))
    R = np.zeros((decomp.n_gamma, 6))
    s, _ = poly.gauss_lobatto01(k + 1)
    s = s[1:-1]
    for cls in decomp.classes:
        for v in cls.vertices:
            g = gp[fp[dm.vertex_dofs(v)]]
            for j, fn in enumerate(fields):
                val = fn(mesh.vertices[v][None])[0]
                R[g[g >= 0], j] = val[g >= 0]
        for e in cls.edges:
            a, b = mesh.edges[e]
            pts = mesh.vertices[a] + s[:, None] * (mesh.vertices[b] - mesh.vertices[a])
            g = gp[fp[dm.edge_dofs(e)]]
            for j, fn in enumerate(fields):
                val = fn(pts).ravel()
                R[g[g >= 0], j] = val[g >= 0]
        for f in cls.faces:
            g = gp[fp[dm.face_dofs(f)]]
            for j, fn in enumerate(fields):
                val = face_moment_dofs(mesh, k, f, fn)
                R[g[g >= 0], j] = val[g >= 0]
    return R


def _orthonormal_rows(C, tol=1e-10):
    if C.shape[0] == 0:
        return C
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return Vt[:r]


@dataclass
class PrimalSpace:
    """Orthonormal constraint rows per interface class (class-local columns)."""
    rows: list
    mode: str
    raw_count: int
    warnings: list = field(default_factory=list)

    @property
    def n_primal(self):
        return int(sum(r.shape[0] for r in self.rows))


def build_primal_space(decomp, mode="minimal", extra=None, drop=()):
    """Constraint rows for every class.

    ``mode`` is 'minimal', 'fully_primal' or 'all' (every interface DOF
    primal).  ``extra`` maps class id to additional rows (adaptive
    enrichment); ``drop`` may contain 'face' or 'edge' to omit those
    constraints (used for negative controls).
    """
    classes = decomp.classes
    inc = incident_faces(decomp)
    normals = {ci: macro_normal(decomp, c) for ci, c in enumerate(classes) if c.kind == "face"}
    raw = []
    for ci, c in enumerate(classes):
        if mode == "all" or c.kind == "vertex":
            C = np.eye(c.size)
        elif c.kind == "face":
            C = face_flux_row(decomp, c)[None] if "face" not in drop else np.zeros((0, c.size))
        else:
            dirs = [normals[f] for f in inc.get(ci, [])] if "edge" not in drop else []
            C = edge_average_rows(decomp, c, dirs) if dirs else np.zeros((0, c.size))
        raw.append(C)
    raw_count = int(sum(r.shape[0] for r in raw))
    msgs = []
    if mode == "fully_primal":
        raw, msgs = _make_fully_primal(decomp, raw, normals, inc)
    if extra:
        for ci, rws in extra.items():
            raw[ci] = np.vstack([raw[ci], rws])
    rows = [_orthonormal_rows(C) for C in raw]
    for m in msgs:
        warnings.warn(m)
    return PrimalSpace(rows, mode, raw_count, msgs)


def _make_fully_primal(decomp, raw, normals, inc, tol=1e-8):
    """Add tangential, then binormal, edge averages until each macro face
    controls the six rigid modes."""
    R = rigid_mode_values(decomp)
    clos = closure_classes(decomp)
    classes = decomp.classes
    raw = list(raw)
    msgs = []

    def face_rank(fi):
        blocks = []
        for ci in [fi] + clos[fi]:
            c = classes[ci]
            if raw[ci].shape[0]:
                blocks.append(raw[ci] @ R[c.positions])
        if not blocks:
            return 0
        M = np.vstack(blocks)
        if not np.any(M):
            return 0
        s = np.linalg.svd(M, compute_uv=False)
        return int(np.sum(s > tol * s[0]))

    for fi, c in enumerate(classes):
        if c.kind != "face":
            continue
        if face_rank(fi) >= 6:
            continue
        for stage in ("tangent", "binormal"):
            for ei in clos[fi]:
                e = classes[ei]
                if e.kind != "edge":
                    continue
                t = edge_tangent(decomp, e)
                if stage == "tangent":
                    dirs = [t]
                else:
                    dirs = [np.cross(normals[f], t) for f in inc.get(ei, [])]
                dirs = [d / np.linalg.norm(d) for d in dirs if np.linalg.norm(d) > 1e-12]
                if dirs:
                    raw[ei] = np.vstack([raw[ei], edge_average_rows(decomp, e, dirs)])
            if face_rank(fi) >= 6:
                break
        r = face_rank(fi)
        if r < 6:
            msgs.append(f"macro face class {fi} (subdomains {c.sharing}) controls only {r} rigid modes")
    return raw, msgs


# ---------------------------------------------------------------------------
# change of basis


@dataclass
class ClassBasis:
    T: np.ndarray           # (n, n): original = T @ transformed
    primal: np.ndarray      # class-local positions holding constraint values
    dual: np.ndarray        # remaining positions
    cond: float


def change_of_basis(C, name="class"):
    """Pivoted change of basis making the rows of ``C`` explicit coordinates.

    With pivots ``P`` (column-pivoted QR) and rest ``R``:
    ``w_P = C_P^{-1} (w_hat_P - C_R w_R)``, ``w_R = w_hat_R``.
    """
    n = C.shape[1]
    r = C.shape[0]
    if r == 0:
        return ClassBasis(np.eye(n), np.zeros(0, dtype=int), np.arange(n), 1.0)
    _, _, piv = sla.qr(C, mode="economic", pivoting=True)
    P = np.sort(piv[:r])
    Rm = np.setdiff1d(np.arange(n), P)
    CP = C[:, P]
    cond = float(np.linalg.cond(CP))
    if cond > 1e8:
        warnings.warn(f"ill-conditioned change of basis on {name} (cond {cond:.2e})")
    CPi = np.linalg.inv(CP)
    T = np.zeros((n, n))
    T[np.ix_(P, P)] = CPi
    T[np.ix_(P, Rm)] = -CPi @ C[:, Rm]
    T[Rm, Rm] = 1.0
    return ClassBasis(T, P, Rm, cond)


# ---------------------------------------------------------------------------
# preconditioner


class SchurBlockSolver:
    """Solver for the local matrix ``K_rr`` by block elimination.

    ``K_rr`` couples the subdomain interior block (velocity, pressure and
    multiplier, factorized by the decomposition) with the dual interface
    coordinates.  Eliminating the interior leaves ``T_D^T S T_D`` with the
    dense interface Schur complement ``S``, so no second sparse factorization
    is needed.  Unknowns are ordered ``[u_I, u_Delta, p, (lambda)]``.
    """

    def __init__(self, sub, Tg, d_loc, S):
        self.sub = sub
        self.nI, self.nD = sub.n_i, len(d_loc)
        Td = sp.csr_matrix(Tg)[:, d_loc]
        self.kid = (sub.kig @ Td).tocsr()
        Sdd = np.asarray(Td.T @ (Td.T @ S).T)
        Sdd = 0.5 * (Sdd + Sdd.T)
        self.shape = (sub.lu.shape[0] + self.nD,) * 2
        try:
            self._fac = ("chol", sla.cho_factor(Sdd))
        except np.linalg.LinAlgError:
            lu = sla.lu_factor(Sdd)
            piv = np.abs(np.diag(lu[0]))
            if len(piv) and piv.min() <= 1e-13 * piv.max():
                raise ArithmeticError(f"singular local problem in subdomain {sub.index}")
            self._fac = ("lu", lu)

    def _dual_solve(self, b):
        kind, fac = self._fac
        return sla.cho_solve(fac, b) if kind == "chol" else sla.lu_solve(fac, b)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        nI, nD = self.nI, self.nD
        bi = np.concatenate([b[:nI], b[nI + nD:]])
        y = self.sub.lu.solve(bi)
        xd = self._dual_solve(b[nI:nI + nD] - self.kid.T @ y)
        xi = y - self.sub.lu.solve(np.asarray(self.kid @ xd))
        return np.concatenate([xi[:nI], xd, xi[nI:]])


@dataclass
class _Local:
    nI: int
    nD: int
    n_r: int
    pi_loc: np.ndarray       # gamma-local positions of primal coordinates
    d_loc: np.ndarray        # gamma-local positions of dual coordinates
    d_glob: np.ndarray       # interface positions of dual coordinates
    c_glob: np.ndarray       # coarse indices
    T: sp.csr_matrix         # gamma-local transformation
    lu: object
    phi: np.ndarray
    scale_blocks: list       # (slice in local dual vector, weight matrix or vector)


class BDDC:
    """BDDC preconditioner on a :class:`Decomposition`.

    ``scaling`` is 'multiplicity' or 'deluxe' (deluxe on face classes,
    multiplicity on the others).  ``primal`` may be passed to reuse or
    enrich a primal space.
    """

    def __init__(self, decomp, mode="minimal", scaling="multiplicity", primal=None, drop=(),
                 edge_deluxe=False, solvers=True, local_solver="schur"):
        if local_solver not in ("schur", "sparse"):
            raise ValueError(f"unknown local solver {local_solver!r}")
        self.decomp = decomp
        self.scaling = scaling
        self.edge_deluxe = edge_deluxe
        self.local_solver = local_solver
        self.primal = primal or build_primal_space(decomp, mode, drop=drop)
        self.mode = self.primal.mode
        self._setup(solvers)

    # -- setup -----------------------------------------------------------------
    def _setup(self, solvers=True):
        """Bases and scaling; with ``solvers`` also local and coarse factorizations."""
        d = self.decomp
        self.bases = [change_of_basis(C, f"class {ci} ({d.classes[ci].kind} {d.classes[ci].sharing})")
                      for ci, C in enumerate(self.primal.rows)]
        rows, cols, vals = [], [], []
        primal_pos, dual_pos = [], []
        for c, b in zip(d.classes, self.bases):
            r, cc = np.nonzero(b.T)
            rows.append(r + c.start)
            cols.append(cc + c.start)
            vals.append(b.T[r, cc])
            primal_pos.append(b.primal + c.start)
            dual_pos.append(b.dual + c.start)
        n = d.n_gamma
        if n:
            self.T = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                   shape=(n, n))
            self.primal_pos = np.concatenate(primal_pos).astype(int)
            self.dual_pos = np.concatenate(dual_pos).astype(int)
        else:
            self.T = sp.csr_matrix((0, 0))
            self.primal_pos = np.zeros(0, dtype=int)
            self.dual_pos = np.zeros(0, dtype=int)
        self.n_primal = len(self.primal_pos)
        self.primal_index = -np.ones(n, dtype=int)
        self.primal_index[self.primal_pos] = np.arange(self.n_primal)
        self.n_coarse = self.n_primal + d.n_p0
        self.max_cond = max([b.cond for b in self.bases], default=1.0)
        self._weights = self._build_scaling()
        self.locals = None
        if solvers:
            self.locals = d._map(self._setup_local)
            self._setup_coarse()

    def local_transform(self, s):
        """Block-diagonal change of basis on the interface of subdomain ``s``."""
        blocks = [sp.csr_matrix(self.bases[ci].T) for ci in s.classes]
        return sp.block_diag(blocks, format="csr") if blocks else sp.csr_matrix((0, 0))

    def dense_schur(self, i):
        return self.decomp.dense_schur(i)

    def _gamma_offsets(self, s):
        d = self.decomp
        off = {}
        pos = 0
        for ci in s.classes:
            off[ci] = pos
            pos += d.classes[ci].size
        return off

    def _build_scaling(self):
        """Weights per (subdomain, class) on the class's dual coordinates."""
        d = self.decomp
        W = {}
        for ci, (c, b) in enumerate(zip(d.classes, self.bases)):
            nd = len(b.dual)
            deluxe = self.scaling == "deluxe" and (c.kind == "face" or self.edge_deluxe)
            if deluxe and len(c.sharing) >= 2 and nd:
                Sh = []
                for i in c.sharing:
                    s = d.subdomains[i]
                    o = self._gamma_offsets(s)[ci]
                    Sff = self.dense_schur(i)[o:o + c.size, o:o + c.size]
                    Td = b.T[:, b.dual]
                    Sh.append(Td.T @ Sff @ Td)
                tot = sum(Sh)
                try:
                    fac = sla.cho_factor(tot)
                except np.linalg.LinAlgError as exc:
                    raise ArithmeticError(f"singular deluxe sum on {c.kind} class {ci}") from exc
                for i, Si in zip(c.sharing, Sh):
                    W[(i, ci)] = sla.cho_solve(fac, Si)
            else:
                for i in c.sharing:
                    W[(i, ci)] = np.full(nd, 1.0 / len(c.sharing))
        return W

    def _setup_local(self, s):
        d = self.decomp
        nI = s.n_i
        pi_loc, d_loc, c_glob, scale = [], [], [], []
        dpos = 0
        off = 0
        for ci in s.classes:
            c, b = d.classes[ci], self.bases[ci]
            pi_loc.append(b.primal + off)
            d_loc.append(b.dual + off)
            c_glob.append(self.primal_index[b.primal + c.start])
            nd = len(b.dual)
            scale.append((slice(dpos, dpos + nd), self._weights[(s.index, ci)]))
            dpos += nd
            off += c.size
        Tg = self.local_transform(s)
        pi_loc = np.concatenate(pi_loc).astype(int) if pi_loc else np.zeros(0, dtype=int)
        d_loc = np.concatenate(d_loc).astype(int) if d_loc else np.zeros(0, dtype=int)
        c_glob = np.concatenate(c_glob).astype(int) if c_glob else np.zeros(0, dtype=int)
        if s.closed:
            c_glob = np.concatenate([c_glob, [self.n_primal + s.p0_index]])
        Tf = sp.block_diag([sp.identity(nI, format="csr"), Tg], format="csr")
        Ah = (Tf.T @ s.A @ Tf).tocsr()
        Bh = (s.B @ Tf).tocsr()
        rsel = np.concatenate([np.arange(nI), nI + d_loc])
        csel = nI + pi_loc
        Arr = Ah[rsel][:, rsel]
        Brr = Bh[:, rsel]
        Arc = Ah[rsel][:, csel]
        Brc = Bh[:, csel]
        Acc = Ah[csel][:, csel].toarray()
        np_ = s.n_p
        K = sp.bmat([[Arr, Brr.T], [Brr, None]], format="csc")
        nr = K.shape[0]
        Krc = sp.vstack([Arc, Brc], format="csr").toarray()
        Kcc = Acc
        if s.closed:
            w = np.zeros(nr)
            w[len(rsel):] = s.mean
            K = sp.bmat([[K, sp.csc_matrix(w[:, None])], [sp.csc_matrix(w[None, :]), None]], format="csc")
            b0r = s.const @ Brr.toarray()
            b0c = s.const @ Brc.toarray()
            col = np.zeros((nr + 1, 1))
            col[:len(rsel), 0] = b0r
            Krc = np.vstack([Krc, np.zeros((1, Krc.shape[1]))])
            Krc = np.hstack([Krc, col])
            Kcc = np.block([[Acc, b0c[:, None]], [b0c[None, :], np.zeros((1, 1))]])
        if self.local_solver == "sparse":
            lu = SaddleLU(K, len(rsel), s.coords[rsel])
        else:
            lu = SchurBlockSolver(s, Tg, d_loc, self.dense_schur(s.index))
        phi = -lu.solve(Krc) if Krc.shape[1] else np.zeros((K.shape[0], 0))
        scc = Kcc + Krc.T @ phi
        loc = _Local(nI, len(d_loc), K.shape[0], pi_loc, d_loc, s.gamma[d_loc] if len(d_loc) else
                     np.zeros(0, dtype=int), c_glob, Tg, lu, phi, scale)
        loc.scc = 0.5 * (scc + scc.T)
        loc.np = np_
        return loc

    def _setup_coarse(self):
        d = self.decomp
        nc = self.n_coarse
        S = np.zeros((nc, nc))
        for loc in self.locals:
            S[np.ix_(loc.c_glob, loc.c_glob)] += loc.scc
        self.gauge = d.all_closed and d.n_p0 > 0
        if self.gauge:
            v = np.zeros(nc + 1)
            for s in d.subdomains:
                if s.closed:
                    v[self.n_primal + s.p0_index] = d.subdomain_volume(s)
            S = np.block([[S, v[:nc, None]], [v[None, :nc], np.zeros((1, 1))]])
        self.coarse_matrix = S
        if S.shape[0]:
            self._coarse_lu = sla.lu_factor(S)
            # a singular coarse matrix shows up as a zero pivot
            piv = np.abs(np.diag(self._coarse_lu[0]))
            if piv.min() <= 1e-13 * piv.max():
                raise ArithmeticError("singular coarse problem: primal constraints insufficient")
        else:
            self._coarse_lu = None

    # -- scaling helpers -----------------------------------------------------
    @staticmethod
    def _weight(blocks, x, transpose):
        y = np.empty_like(x)
        for sl, W in blocks:
            if W.ndim == 1:
                y[sl] = W * x[sl]
            else:
                y[sl] = (W.T if transpose else W) @ x[sl]
        return y

    # -- application -----------------------------------------------------------
    def coarse_solve(self, g):
        if self._coarse_lu is None:
            return g
        if self.gauge:
            g = np.concatenate([g, [0.0]])
            return sla.lu_solve(self._coarse_lu, g)[:-1]
        return sla.lu_solve(self._coarse_lu, g)

    def apply(self, r):
        """``z = T R_D^T S~^{-1} R_D T^T r`` for ``r = (r_Gamma, r_0)``."""
        d = self.decomp
        ng = d.n_gamma
        rh = self.T.T @ r[:ng]
        gc = np.zeros(self.n_coarse)
        gc[:self.n_primal] = rh[self.primal_pos]
        gc[self.n_primal:] = r[ng:]

        def local_solve(loc):
            b = np.zeros(loc.n_r)
            b[loc.nI:loc.nI + loc.nD] = self._weight(loc.scale_blocks, rh[loc.d_glob], True)
            y = loc.lu.solve(b)
            return b, y

        res = d._map(local_solve, self.locals)
        for loc, (b, _) in zip(self.locals, res):
            np.add.at(gc, loc.c_glob, loc.phi.T @ b)
        xc = self.coarse_solve(gc)
        uh = np.zeros(ng)
        for loc, (_, y) in zip(self.locals, res):
            xr = y + loc.phi @ xc[loc.c_glob]
            np.add.at(uh, loc.d_glob, self._weight(loc.scale_blocks, xr[loc.nI:loc.nI + loc.nD], False))
        uh[self.primal_pos] = xc[:self.n_primal]
        out = np.zeros(d.size)
        out[:ng] = self.T @ uh
        out[ng:] = xc[self.n_primal:]
        return out

    __call__ = apply

    # -- averaging operator and checks ----------------------------------------
    def average(self, locals_dual):
        """E_D on dual parts: weighted sum of local dual vectors, restricted back."""
        uh = np.zeros(self.decomp.n_gamma)
        for loc, w in zip(self.locals, locals_dual):
            np.add.at(uh, loc.d_glob, self._weight(loc.scale_blocks, w, False))
        return [uh[loc.d_glob] for loc in self.locals]

    def verify_benign(self, n_vectors=100, seed=0):
        """Max relative flux violation of random dual vectors and their averages."""
        d = self.decomp
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_vectors):
            loc_vecs = [rng.standard_normal(loc.nD) for loc in self.locals]
            for variant in (loc_vecs, self.average(loc_vecs)):
                for s, loc, w in zip(d.subdomains, self.locals, variant):
                    if loc.nD == 0:
                        continue
                    ug = np.zeros(s.n_g)
                    ug[loc.d_loc] = w
                    u = loc.T @ ug
                    viol = abs(s.flux_g @ u) / max(np.linalg.norm(u), 1e-300)
                    worst = max(worst, viol)
        return worst

    def dense_oracle(self):
        """Dense ``M^{-1}`` from explicitly assembled partially assembled Schur
        complement (independent of the local/coarse splitting)."""
        d = self.decomp
        nprim, n0 = self.n_primal, d.n_p0
        nd_tot = sum(loc.nD for loc in self.locals)
        N = nd_tot + nprim + n0
        St = np.zeros((N, N))
        off = 0
        offs = []
        for s, loc in zip(d.subdomains, self.locals):
            Tg = loc.T.toarray()
            Sh = Tg.T @ self.dense_schur(s.index) @ Tg
            dl = np.arange(off, off + loc.nD)
            offs.append(dl)
            cg = loc.c_glob[:len(loc.pi_loc)] + nd_tot
            St[np.ix_(dl, dl)] += Sh[np.ix_(loc.d_loc, loc.d_loc)]
            St[np.ix_(dl, cg)] += Sh[np.ix_(loc.d_loc, loc.pi_loc)]
            St[np.ix_(cg, dl)] += Sh[np.ix_(loc.pi_loc, loc.d_loc)]
            St[np.ix_(cg, cg)] += Sh[np.ix_(loc.pi_loc, loc.pi_loc)]
            if s.closed:
                b0 = s.b0g @ Tg
                j = nd_tot + nprim + s.p0_index
                St[dl, j] += b0[loc.d_loc]
                St[j, dl] += b0[loc.d_loc]
                St[cg, j] += b0[loc.pi_loc]
                St[j, cg] += b0[loc.pi_loc]
            off += loc.nD
        if self.gauge:
            v = np.zeros(N)
            for s in d.subdomains:
                if s.closed:
                    v[nd_tot + nprim + s.p0_index] = d.subdomain_volume(s)
            Sb = np.block([[St, v[:, None]], [v[None, :], np.zeros((1, 1))]])
            Sinv = np.linalg.inv(Sb)[:N, :N]
        else:
            Sinv = np.linalg.inv(St)
        # R_D: (gamma, p0) -> partially assembled coordinates
        ng = d.n_gamma
        RD = np.zeros((N, ng + n0))
        That = self.T.toarray()
        for loc, dl in zip(self.locals, offs):
            Wt = np.zeros((loc.nD, loc.nD))
            for sl, W in loc.scale_blocks:
                Wt[sl, sl] = np.diag(W) if W.ndim == 1 else W
            # rows: W^T (T^T r)[dual positions]
            RD[dl, :ng] = Wt.T @ That.T[loc.d_glob]
        RD[nd_tot + np.arange(nprim), :ng] = That.T[self.primal_pos]
        RD[nd_tot + nprim + np.arange(n0), ng + np.arange(n0)] = 1.0
        return RD.T @ Sinv @ RD

    def info(self):
        return {
            "mode": self.mode,
            "scaling": self.scaling,
            "n_primal": self.n_primal,
            "n_coarse": self.n_coarse,
            "raw_constraints": self.primal.raw_count,
            "max_basis_cond": self.max_cond,
        }
