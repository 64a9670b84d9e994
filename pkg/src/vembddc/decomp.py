"""Non-overlapping decomposition and the reduced interface problem.

Cells are grouped into subdomains; every free velocity DOF is either interior
to one subdomain or an interface DOF shared by several.  Interface DOFs are
split into classes (vertex, edge, face) by the set of subdomains sharing
them, whether they lie on the domain boundary, and connectivity.

For each subdomain the pressure is split into a constant ``p_0`` and a
zero-mean part ``p_I``.  Subdomains touching a traction boundary keep their
whole pressure interior and have no ``p_0``.  The zero-mean condition is
imposed with a multiplier, which keeps the interior saddle matrices sparse.
Eliminating interior velocities and ``p_I`` leaves the interface problem in
the unknowns ``(u_Gamma, p_0)``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ordering import SaddleLU


# ---------------------------------------------------------------------------
# partition


@dataclass
class Partition:
    cell_part: np.ndarray
    n_sub: int
    shape: tuple = None
    jagged: bool = False

    def cells(self, i):
        return np.where(self.cell_part == i)[0]


def partition_box(mesh, shape):
    """Assign cells to a ``shape`` grid of boxes by centroid; empty boxes are an error.

    Cells whose centroid lies exactly on a box plane go to the upper box.
    ``jagged`` reports whether any cell crosses a box plane, i.e. subdomain
    interfaces are not planar.
    """
    shape = tuple(int(s) for s in (shape if np.ndim(shape) else (shape,) * 3))
    lo, hi = mesh.bounding_box()
    rel = (mesh.cell_centroid - lo) / (hi - lo)
    idx = np.clip(np.floor(rel * np.array(shape) + 1e-12).astype(int), 0, np.array(shape) - 1)
    part = (idx[:, 0] * shape[1] + idx[:, 1]) * shape[2] + idx[:, 2]
    jag = False
    tol = 1e-10
    for d in range(3):
        for j in range(1, shape[d]):
            x = lo[d] + (hi[d] - lo[d]) * j / shape[d]
            for K in range(mesh.n_cells):
                v = mesh.vertices[mesh.cell_vertices[K], d]
                if v.min() < x - tol and v.max() > x + tol:
                    jag = True
                    break
            if jag:
                break
    counts = np.bincount(part, minlength=int(np.prod(shape)))
    if (counts == 0).any():
        raise ValueError(f"invalid partition: {int((counts == 0).sum())} of {counts.size} "
                         f"subdomains in a {shape} grid are empty")
    return Partition(part, counts.size, shape, jag)


# ---------------------------------------------------------------------------
# interface classes


@dataclass
class InterfaceClass:
    kind: str                 # 'vertex', 'edge' or 'face'
    sharing: tuple
    on_boundary: bool
    vertices: list
    edges: list
    faces: list
    dofs: np.ndarray = None   # free DOF indices (sorted)
    start: int = 0            # first position in interface numbering

    @property
    def size(self):
        return len(self.dofs)

    @property
    def positions(self):
        return np.arange(self.start, self.start + self.size)


def _sharing_sets(mesh, part):
    nV, nE, nF = mesh.n_vertices, mesh.n_edges, mesh.n_faces
    vs = [set() for _ in range(nV)]
    es = [set() for _ in range(nE)]
    fs = [set() for _ in range(nF)]
    for K in range(mesh.n_cells):
        s = int(part[K])
        for v in mesh.cell_vertices[K]:
            vs[v].add(s)
        for e in mesh.cell_edges(K):
            es[e].add(s)
        for f in mesh.cells[K]:
            fs[f].add(s)
    tup = lambda L: [tuple(sorted(x)) for x in L]  # noqa: E731
    return tup(vs), tup(es), tup(fs)


def classify_interface(system, partition):
    """Interface classes and DOF sharing data.

    Returns ``(classes, sharing)`` where ``sharing[j]`` is the tuple of
    subdomains sharing free DOF ``j``.
    """
    mesh = system.problem.mesh
    dm = system.dofmap
    part = partition.cell_part
    vs, es, fs = _sharing_sets(mesh, part)
    bverts, bedges = set(), set()
    for f in mesh.boundary_faces:
        bverts.update(int(v) for v in mesh.faces[f])
        bedges.update(int(e) for e in mesh.face_edges[f])
    free_pos = -np.ones(dm.n_velocity, dtype=int)
    free_pos[system.free] = np.arange(system.n_free)

    def free_of(kind, idx):
        g = {"v": dm.vertex_dofs, "e": dm.edge_dofs, "f": dm.face_dofs}[kind](idx)
        p = free_pos[g]
        return p[p >= 0]

    groups = {}
    for v in range(mesh.n_vertices):
        if len(vs[v]) > 1 and len(free_of("v", v)):
            groups.setdefault((vs[v], v in bverts), []).append(("v", v))
    for e in range(mesh.n_edges):
        if len(es[e]) > 1 and len(free_of("e", e)):
            groups.setdefault((es[e], e in bedges), []).append(("e", e))
    for f in range(mesh.n_faces):
        if len(fs[f]) > 1 and len(free_of("f", f)):
            groups.setdefault((fs[f], False), []).append(("f", f))

    classes = []
    for (share, onb), ents in sorted(groups.items()):
        # connected components through vertex-edge and edge-face incidence
        ident = {x: i for i, x in enumerate(ents)}
        parent = list(range(len(ents)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        for x in ents:
            if x[0] == "e":
                for v in mesh.edges[x[1]]:
                    y = ("v", int(v))
                    if y in ident:
                        union(ident[x], ident[y])
            elif x[0] == "f":
                for e in mesh.face_edges[x[1]]:
                    y = ("e", int(e))
                    if y in ident:
                        union(ident[x], ident[y])
                for v in mesh.faces[x[1]]:
                    y = ("v", int(v))
                    if y in ident:
                        union(ident[x], ident[y])
        comps = {}
        for x in ents:
            comps.setdefault(find(ident[x]), []).append(x)
        for comp in comps.values():
            V = sorted(i for t, i in comp if t == "v")
            E = sorted(i for t, i in comp if t == "e")
            F = sorted(i for t, i in comp if t == "f")
            if F:
                kind = "face"
            elif len(V) == 1 and not E:
                kind = "vertex"
            else:
                kind = "edge"
            dofs = np.sort(np.concatenate(
                [free_of("v", v) for v in V] + [free_of("e", e) for e in E] +
                [free_of("f", f) for f in F]))
            classes.append(InterfaceClass(kind, share, onb, V, E, F, dofs))
    # deterministic order: vertices, edges, faces, then by sharing
    order = {"vertex": 0, "edge": 1, "face": 2}
    classes.sort(key=lambda c: (order[c.kind], c.sharing, c.dofs[0]))
    pos = 0
    for c in classes:
        c.start = pos
        pos += c.size
    sharing = [None] * system.n_free
    for c in classes:
        for j in c.dofs:
            sharing[j] = c.sharing
    # interior DOFs: owned by the subdomain of their cells
    etype, eidx = dm.entity_of_dof()
    gl = system.free
    for j in range(system.n_free):
        if sharing[j] is None:
            t, i = etype[gl[j]], eidx[gl[j]]
            sh = {0: vs, 1: es, 2: fs}.get(t)
            sharing[j] = sh[i] if sh is not None else (int(part[i]),)
    return classes, sharing


# ---------------------------------------------------------------------------
# subdomain operators


def assemble_cells(system, cells, local_index, n_local):
    """Velocity stiffness of a set of cells in a local free-DOF numbering."""
    dm, cache = system.dofmap, system.cache
    free_pos = system._free_pos
    rows, cols, vals = [], [], []
    for K in cells:
        lc = cache.cell(K)
        g = free_pos[dm.local_to_global(lc)]
        keep = g >= 0
        loc = local_index[g[keep]]
        Aloc = system.nu_cells[K] * cache.ops(K).a_local[np.ix_(keep, keep)]
        rows.append(np.repeat(loc, len(loc)))
        cols.append(np.tile(loc, len(loc)))
        vals.append(Aloc.ravel())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_local, n_local))
    return 0.5 * (A + A.T)


@dataclass
class Subdomain:
    index: int
    cells: np.ndarray
    interior: np.ndarray       # free DOF indices
    gamma: np.ndarray          # interface positions (global interface numbering)
    gamma_free: np.ndarray     # the same DOFs as free indices
    classes: list              # class ids touching this subdomain
    pressure: np.ndarray       # pressure indices
    closed: bool               # owns a constant pressure p_0
    A: sp.csr_matrix           # local stiffness on [interior, gamma]
    B: sp.csr_matrix           # pressure rows on [interior, gamma]
    mean: np.ndarray           # pressure mean functional (int_K q_a)
    const: np.ndarray          # coefficients of the constant pressure 1
    coords: np.ndarray = None  # locations of [interior, gamma] velocity DOFs
    p0_index: int = -1
    lu: object = None
    kig: sp.csr_matrix = None
    info: dict = field(default_factory=dict)

    @property
    def n_i(self):
        return len(self.interior)

    @property
    def n_g(self):
        return len(self.gamma)

    @property
    def n_p(self):
        return len(self.pressure)

    def interior_matrix(self):
        """[[A_II, B_I^T, 0], [B_I, 0, w], [0, w^T, 0]] (multiplier if closed)."""
        ni = self.n_i
        AII = self.A[:ni, :ni]
        BI = self.B[:, :ni]
        blocks = [[AII, BI.T], [BI, None]]
        M = sp.bmat(blocks, format="csc")
        if self.closed:
            c = np.zeros(M.shape[0])
            c[ni:] = self.mean
            c = sp.csc_matrix(c[:, None])
            M = sp.bmat([[M, c], [c.T, None]], format="csc")
        return M

    def coupling(self):
        """K_{I Gamma}: interior rows (velocity, pressure, multiplier) x gamma."""
        ni = self.n_i
        rows = [self.A[:ni, ni:], self.B[:, ni:]]
        if self.closed:
            rows.append(sp.csr_matrix((1, self.n_g)))
        return sp.vstack(rows, format="csr")

    def factorize(self):
        self.lu = SaddleLU(self.interior_matrix(), self.n_i, self.coords[:self.n_i])
        self.kig = self.coupling()
        self.agg = self.A[self.n_i:, self.n_i:].tocsr()
        # net flux of interface velocities out of the subdomain
        self.flux_g = self.const @ self.B[:, self.n_i:].toarray()
        self.b0g = self.flux_g if self.closed else None
        return self

    def schur_apply(self, ug):
        y = self.lu.solve(np.asarray(self.kig @ ug))
        return self.agg @ ug - self.kig.T @ y

    def schur_dense(self, batch=256):
        """Dense S_Gamma = A_GG - K_GI K_II^{-1} K_IG.

        The full local matrix is factorized with the interface last; when no
        pivot crosses from the interior into the interface rows the trailing
        LU blocks give ``S`` directly, otherwise we fall back to column solves.
        """
        S = self._schur_trailing()
        if S is None:
            S = self._schur_columns(batch)
        return 0.5 * (S + S.T)

    def _schur_trailing(self):
        K = self.interior_matrix()
        ni = K.shape[0]
        M = sp.bmat([[K, self.kig], [self.kig.T, self.agg]], format="csc")
        perm = np.concatenate([self.lu.perm, ni + np.arange(self.n_g)])
        try:
            lu = spla.splu(M[perm][:, perm].tocsc(), permc_spec="NATURAL", diag_pivot_thresh=1e-2)
        except RuntimeError:
            return None
        pr = lu.perm_r
        if not (pr[:ni] < ni).all():
            return None
        L22 = lu.L[ni:, ni:].toarray()
        U22 = lu.U[ni:, ni:].toarray()
        # row j of M sits at row pr[j] of the factorized matrix
        return (L22 @ U22)[pr[ni:] - ni]

    def _schur_columns(self, batch):
        n = self.n_g
        S = self.agg.toarray()
        kig = self.kig.tocsc()
        for a in range(0, n, batch):
            cols = kig[:, a:a + batch].toarray()
            X = self.lu.solve(cols) if cols.shape[1] > 0 else cols
            S[:, a:a + batch] -= self.kig.T @ X
        return S


class Decomposition:
    """Subdomains, interface classes and the reduced interface operator.

    The interface unknown is ``x = (u_Gamma, p_0)`` with ``u_Gamma`` in the
    interface numbering (class by class) and ``p_0`` one constant per closed
    subdomain.
    """

    def __init__(self, system, partition, threads=1):
        self.system = system
        self.partition = partition
        self.threads = max(1, int(threads))
        mesh = system.problem.mesh
        dm = system.dofmap
        free_pos = -np.ones(dm.n_velocity, dtype=int)
        free_pos[system.free] = np.arange(system.n_free)
        system._free_pos = free_pos
        self.classes, self.sharing = classify_interface(system, partition)
        self.n_gamma = sum(c.size for c in self.classes)
        self.iface_free = (np.concatenate([c.dofs for c in self.classes])
                           if self.classes else np.zeros(0, dtype=int))
        self.gamma_pos = -np.ones(system.n_free, dtype=int)
        self.gamma_pos[self.iface_free] = np.arange(self.n_gamma)
        self.multiplicity = np.array([len(self.sharing[j]) for j in self.iface_free])
        # Neumann-touching subdomains have no constant pressure
        neumann_cells = set(int(mesh.face_cells[f, 0]) for f in system.neumann_faces)
        self.subdomains = []
        n0 = 0
        for i in range(partition.n_sub):
            cells = partition.cells(i)
            cls = [c_id for c_id, c in enumerate(self.classes) if i in c.sharing]
            gamma = (np.concatenate([self.classes[c].positions for c in cls])
                     if cls else np.zeros(0, dtype=int))
            self.subdomains.append(dict(cells=cells, classes=cls, gamma=gamma,
                                        closed=not any(int(K) in neumann_cells for K in cells)))
        # interior DOFs by owner
        owner_lists = [[] for _ in range(partition.n_sub)]
        for j in range(system.n_free):
            if self.gamma_pos[j] < 0:
                owner_lists[self.sharing[j][0]].append(j)
        subs = []
        for i, d in enumerate(self.subdomains):
            interior = np.array(owner_lists[i], dtype=int)
            gamma_free = self.iface_free[d["gamma"]]
            loc_ids = np.concatenate([interior, gamma_free])
            local_index = -np.ones(system.n_free, dtype=int)
            local_index[loc_ids] = np.arange(len(loc_ids))
            A = assemble_cells(system, d["cells"], local_index, len(loc_ids))
            P = dm.pressure_dofs(d["cells"])
            Bsub = system.B[P][:, loc_ids].tocsr()
            mean = np.zeros(len(P))
            const = np.zeros(len(P))
            npl = dm.n_pressure_local
            for r, K in enumerate(d["cells"]):
                op = system.cache.ops(K)
                mean[r * npl:(r + 1) * npl] = op.pressure_integrals
                # q_0 = 1 in every cell
                const[r * npl] = 1.0
            sd = Subdomain(i, d["cells"], interior, d["gamma"], gamma_free, d["classes"], P,
                           d["closed"], A, Bsub, mean, const, system.dof_coords[loc_ids])
            if sd.closed:
                sd.p0_index = n0
                n0 += 1
            subs.append(sd)
        self.subdomains = subs
        self.n_p0 = n0
        self.all_closed = len(system.neumann_faces) == 0
        self._map(lambda s: s.factorize())

    # -- helpers -------------------------------------------------------------
    def _map(self, fn, items=None):
        items = self.subdomains if items is None else items
        if self.threads == 1:
            return [fn(s) for s in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))

    @property
    def size(self):
        return self.n_gamma + self.n_p0

    @property
    def n_sub(self):
        return len(self.subdomains)

    def dense_schur(self, i):
        """Dense local Schur complement of subdomain ``i`` (cached)."""
        cache = self.__dict__.setdefault("_schur_cache", {})
        if i not in cache:
            cache[i] = self.subdomains[i].schur_dense()
        return cache[i]

    def subdomain_volume(self, s):
        return float(self.system.problem.mesh.cell_volume[s.cells].sum())

    # -- reduced operator --------------------------------------------------------
    def apply(self, x):
        """Interface operator applied to ``x = (u_Gamma, p_0)``."""
        ug, p0 = x[:self.n_gamma], x[self.n_gamma:]

        def local(s):
            u = ug[s.gamma]
            r = s.schur_apply(u)
            r0 = 0.0
            if s.closed:
                r = r + s.b0g * p0[s.p0_index]
                r0 = s.b0g @ u
            return r, r0

        out = np.zeros(self.size)
        for s, (r, r0) in zip(self.subdomains, self._map(local)):
            np.add.at(out, s.gamma, r)
            if s.closed:
                out[self.n_gamma + s.p0_index] += r0
        return out

    def _interior_rhs(self, s):
        sys_ = self.system
        r = [sys_.f[s.interior], sys_.g[s.pressure]]
        if s.closed:
            r.append([0.0])
        return np.concatenate(r)

    def rhs(self):
        """Reduced right-hand side (g_Gamma, g_0)."""
        sys_ = self.system
        out = np.zeros(self.size)
        out[:self.n_gamma] = sys_.f[self.iface_free]
        for s in self.subdomains:
            y = s.lu.solve(self._interior_rhs(s))
            np.add.at(out, s.gamma, -(s.kig.T @ y))
            if s.closed:
                out[self.n_gamma + s.p0_index] = s.const @ sys_.g[s.pressure]
        return out

    def recover(self, x):
        """Full free velocity and pressure from the interface solution."""
        sys_ = self.system
        ug, p0 = x[:self.n_gamma], x[self.n_gamma:]
        u = np.zeros(sys_.n_free)
        p = np.zeros(sys_.n_pressure)
        u[self.iface_free] = ug
        for s in self.subdomains:
            y = s.lu.solve(self._interior_rhs(s) - s.kig @ ug[s.gamma])
            u[s.interior] = y[:s.n_i]
            ps = y[s.n_i:s.n_i + s.n_p]
            if s.closed:
                ps = ps + s.const * p0[s.p0_index]
            p[s.pressure] = ps
        if self.all_closed and self.n_p0:
            # fix the global constant: zero mean pressure
            tot = sum(s.mean @ p[s.pressure] for s in self.subdomains)
            vol = sum(self.subdomain_volume(s) for s in self.subdomains)
            for s in self.subdomains:
                p[s.pressure] -= s.const * (tot / vol)
        return u, p

    def dense(self):
        """Dense interface operator assembled from dense local Schur complements."""
        n = self.size
        S = np.zeros((n, n))
        for s in self.subdomains:
            Sl = self.dense_schur(s.index)
            S[np.ix_(s.gamma, s.gamma)] += Sl
            if s.closed:
                j = self.n_gamma + s.p0_index
                S[j, s.gamma] += s.b0g
                S[s.gamma, j] += s.b0g
        return S

    def flux_residual(self, ug):
        """``B_0Gamma u_Gamma`` per closed subdomain."""
        return np.array([s.b0g @ ug[s.gamma] for s in self.subdomains if s.closed])

    def stats(self):
        kinds = {"vertex": 0, "edge": 0, "face": 0}
        for c in self.classes:
            kinds[c.kind] += 1
        return {
            "subdomains": self.n_sub,
            "interface_dofs": self.n_gamma,
            "p0": self.n_p0,
            "classes": kinds,
            "jagged": self.partition.jagged,
            "max_interior": max(s.n_i for s in self.subdomains),
            "max_gamma": max(s.n_g for s in self.subdomains),
        }
