"""Polyhedral meshes of a box: generation, validation, I/O and quality checks.

A mesh stores vertices, oriented edges, faces as vertex loops and cells as
lists of faces with orientation signs (+1 when the face normal points out of
the cell).  Orientation conventions depend on geometry only, so translated
copies of a cell are described identically; the element layer relies on this
to reuse local matrices.

* an edge points from the lexicographically smaller endpoint to the larger one
* a face loop starts at its lexicographically smallest vertex and is oriented
  so that its normal has positive component along a fixed generic direction
* the face tangent frame is ``t1`` = direction of the first loop edge,
  ``t2 = n x t1``
"""
import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Delaunay, HalfspaceIntersection, cKDTree

_REF_DIR = np.array([0.8729, 0.4233, 0.2425])
_ROUND = 9


class MeshError(ValueError):
    """Raised for invalid mesh input; message names the offending entity."""


def _lexkey(p):
    return tuple(np.round(p, _ROUND) + 0.0)


class PolyMesh:
    """Conforming polyhedral mesh with precomputed geometry.

    Parameters
    ----------
    vertices : (nV, 3) array
    face_loops : list of vertex-index sequences
    cell_faces : list of lists of signed 1-based face indices; the sign is
        +1 when the loop normal points out of the cell.
    name : label used in reports.
    """

    def __init__(self, vertices, face_loops, cell_faces, name="mesh", validate=True):
        self.name = name
        self.vertices = np.asarray(vertices, dtype=float)
        loops = [np.asarray(f, dtype=int) for f in face_loops]
        cells = []
        signs = []
        for c in cell_faces:
            c = np.asarray(c, dtype=int)
            if np.any(c == 0):
                raise MeshError("cell face references must be signed 1-based indices")
            cells.append(np.abs(c) - 1)
            signs.append(np.sign(c))
        self._canonicalize(loops, cells, signs)
        self._build_edges()
        self._compute_geometry()
        if validate:
            self.validate()

    # -- construction ------------------------------------------------------
    def _canonicalize(self, loops, cells, signs):
        V = self.vertices
        flip = np.zeros(len(loops), dtype=bool)
        for i, lp in enumerate(loops):
            if len(lp) < 3:
                raise MeshError(f"face {i} has fewer than 3 vertices")
            if len(set(lp.tolist())) != len(lp):
                raise MeshError(f"face {i} repeats a vertex")
            if lp.max() >= len(V) or lp.min() < 0:
                raise MeshError(f"face {i} references a missing vertex")
            pts = V[lp]
            area_vec = 0.5 * np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)
            if area_vec @ _REF_DIR < 0:
                lp = lp[::-1]
                flip[i] = True
            keys = [_lexkey(V[j]) for j in lp]
            start = min(range(len(lp)), key=lambda j: keys[j])
            loops[i] = np.roll(lp, -start)
        self.faces = loops
        self.cells = cells
        self.cell_signs = [np.where(flip[c], -s, s) for c, s in zip(cells, signs)]
        nf = len(loops)
        fc = -np.ones((nf, 2), dtype=int)
        for k, c in enumerate(cells):
            for f in c:
                if f >= nf or f < 0:
                    raise MeshError(f"cell {k} references missing face {f}")
                slot = 0 if fc[f, 0] < 0 else 1
                if fc[f, slot] >= 0:
                    raise MeshError(f"face {f} is shared by more than two cells")
                fc[f, slot] = k
        for f in range(nf):
            if fc[f, 0] < 0:
                raise MeshError(f"face {f} belongs to no cell")
        self.face_cells = fc

    def _build_edges(self):
        V = self.vertices
        emap = {}
        edges = []
        self.face_edges = []
        self.face_edge_rev = []
        for lp in self.faces:
            fe, fr = [], []
            for a, b in zip(lp, np.roll(lp, -1)):
                a, b = int(a), int(b)
                key = (min(a, b), max(a, b))
                if key not in emap:
                    lo, hi = (a, b) if _lexkey(V[a]) < _lexkey(V[b]) else (b, a)
                    emap[key] = len(edges)
                    edges.append((lo, hi))
                e = emap[key]
                fe.append(e)
                fr.append(edges[e][0] != a)
            self.face_edges.append(np.array(fe, dtype=int))
            self.face_edge_rev.append(np.array(fr, dtype=bool))
        self.edges = np.array(edges, dtype=int).reshape(-1, 2)

    def _compute_geometry(self):
        V = self.vertices
        nf = len(self.faces)
        self.face_area = np.zeros(nf)
        self.face_normal = np.zeros((nf, 3))
        self.face_centroid = np.zeros((nf, 3))
        self.face_diam = np.zeros(nf)
        self.face_t1 = np.zeros((nf, 3))
        self.face_t2 = np.zeros((nf, 3))
        for i, lp in enumerate(self.faces):
            pts = V[lp]
            area_vec = 0.5 * np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)
            a = np.linalg.norm(area_vec)
            if a <= 0:
                raise MeshError(f"face {i} has zero area")
            n = area_vec / a
            mid = pts.mean(axis=0)
            tri = np.cross(pts - mid, np.roll(pts, -1, axis=0) - mid) @ n * 0.5
            cen = (tri[:, None] * (mid + pts + np.roll(pts, -1, axis=0)) / 3.0).sum(axis=0) / tri.sum()
            t1 = pts[1] - pts[0]
            t1 = t1 - (t1 @ n) * n
            t1 /= np.linalg.norm(t1)
            self.face_area[i] = a
            self.face_normal[i] = n
            self.face_centroid[i] = cen
            self.face_diam[i] = _diameter(pts)
            self.face_t1[i] = t1
            self.face_t2[i] = np.cross(n, t1)
        ncell = len(self.cells)
        self.cell_volume = np.zeros(ncell)
        self.cell_centroid = np.zeros((ncell, 3))
        self.cell_diam = np.zeros(ncell)
        self.cell_vertices = []
        for k, (c, s) in enumerate(zip(self.cells, self.cell_signs)):
            vids = np.unique(np.concatenate([self.faces[f] for f in c]))
            self.cell_vertices.append(vids)
            apex = V[vids].mean(axis=0)
            vol = 0.0
            mom = np.zeros(3)
            for f, sg in zip(c, s):
                pts = V[self.faces[f]]
                fcn = self.face_centroid[f]
                nxt = np.roll(pts, -1, axis=0)
                v6 = (np.cross(pts - fcn, nxt - fcn) @ (fcn - apex)) * sg
                tv = v6 / 6.0
                vol += tv.sum()
                mom += (tv[:, None] * (apex + fcn + pts + nxt) / 4.0).sum(axis=0)
            if vol <= 0:
                raise MeshError(f"cell {k} has non-positive volume {vol:.3e}")
            self.cell_volume[k] = vol
            self.cell_centroid[k] = mom / vol
            self.cell_diam[k] = _diameter(V[vids])
        self.edge_length = np.linalg.norm(V[self.edges[:, 1]] - V[self.edges[:, 0]], axis=1)
        self.boundary_faces = np.where(self.face_cells[:, 1] < 0)[0]

    # -- sizes -------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def h(self):
        return float(self.cell_diam.max())

    def cell_edges(self, k):
        return np.unique(np.concatenate([self.face_edges[f] for f in self.cells[k]]))

    def outward_normal(self, f):
        """Unit normal of face ``f`` pointing out of its first cell."""
        K = self.face_cells[f, 0]
        s = self.cell_signs[K][int(np.where(self.cells[K] == f)[0][0])]
        return s * self.face_normal[f]

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    # -- checks ------------------------------------------------------------
    def validate(self, planarity_tol=1e-10, closure_tol=1e-10):
        V = self.vertices
        for i, lp in enumerate(self.faces):
            pts = V[lp]
            dev = np.abs((pts - self.face_centroid[i]) @ self.face_normal[i]).max()
            if dev > planarity_tol * self.face_diam[i]:
                raise MeshError(f"face {i} is not planar (deviation {dev:.3e})")
            if not _is_simple_polygon(pts, self.face_normal[i], self.face_t1[i], self.face_t2[i]):
                raise MeshError(f"face {i} is not a simple polygon")
        for k, (c, s) in enumerate(zip(self.cells, self.cell_signs)):
            tot = (self.face_area[c, None] * self.face_normal[c] * s[:, None]).sum(axis=0)
            if np.linalg.norm(tot) > closure_tol * self.cell_diam[k] ** 2:
                raise MeshError(f"cell {k} is not closed (area-vector sum {np.linalg.norm(tot):.3e})")
            # each cell edge must be shared by exactly two of its faces
            cnt = {}
            for f in c:
                for e in self.face_edges[f]:
                    cnt[e] = cnt.get(e, 0) + 1
            bad = [e for e, m in cnt.items() if m != 2]
            if bad:
                raise MeshError(f"cell {k} is not watertight at edge {bad[0]}")
        for f in range(self.n_faces):
            c0, c1 = self.face_cells[f]
            if c1 >= 0:
                s0 = self.cell_signs[c0][list(self.cells[c0]).index(f)]
                s1 = self.cell_signs[c1][list(self.cells[c1]).index(f)]
                if s0 == s1:
                    raise MeshError(f"face {f} has inconsistent orientation in cells {c0} and {c1}")
        return True

    def summary(self):
        return {
            "name": self.name,
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "faces": self.n_faces,
            "cells": self.n_cells,
            "h": self.h,
            "volume": float(self.cell_volume.sum()),
        }


def _diameter(pts):
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d ** 2).sum(axis=2).max()))


def _is_simple_polygon(pts, n, t1, t2):
    q = np.column_stack([pts @ t1, pts @ t2])
    m = len(q)
    if m <= 3:
        return True
    for i in range(m):
        a, b = q[i], q[(i + 1) % m]
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            c, d = q[j], q[(j + 1) % m]
            if _segments_cross(a, b, c, d):
                return False
    return True


def _segments_cross(a, b, c, d):
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


# ---------------------------------------------------------------------------
# builders


def mesh_from_cell_loops(vertices, cell_loops, name="mesh", validate=True):
    """Build a mesh from cells given as lists of (unoriented) vertex loops.

    Faces with the same vertex set are merged.  Each cell must be convex (the
    outward sign is decided against the cell's vertex mean).
    """
    V = np.asarray(vertices, dtype=float)
    fmap = {}
    loops = []
    cell_faces = []
    for k, cl in enumerate(cell_loops):
        cv = V[np.unique(np.concatenate([np.asarray(l) for l in cl]))].mean(axis=0)
        signed = []
        for lp in cl:
            lp = np.asarray(lp, dtype=int)
            key = tuple(sorted(lp.tolist()))
            if key not in fmap:
                fmap[key] = len(loops)
                loops.append(lp)
            f = fmap[key]
            ref = loops[f]
            pts = V[ref]
            av = 0.5 * np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)
            s = 1 if av @ (pts.mean(axis=0) - cv) > 0 else -1
            signed.append(s * (f + 1))
        cell_faces.append(signed)
    return PolyMesh(V, loops, cell_faces, name=name, validate=validate)


def hex_mesh(n, box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))):
    """Structured mesh of ``n**3`` hexahedra (``n`` may be a 3-tuple)."""
    nx, ny, nz = (n, n, n) if np.isscalar(n) else n
    if min(nx, ny, nz) < 1:
        raise ValueError(f"hex_mesh needs at least one cell per axis, got {n}")
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    xs = [np.linspace(lo[d], hi[d], m + 1) for d, m in enumerate((nx, ny, nz))]
    X, Y, Z = np.meshgrid(*xs, indexing="ij")
    V = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    cells = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                c = [vid(i + a, j + b, k + d) for a in (0, 1) for b in (0, 1) for d in (0, 1)]
                # c index = 4a + 2b + d
                cells.append([
                    [c[0], c[2], c[3], c[1]],
                    [c[4], c[5], c[7], c[6]],
                    [c[0], c[1], c[5], c[4]],
                    [c[2], c[6], c[7], c[3]],
                    [c[0], c[4], c[6], c[2]],
                    [c[1], c[3], c[7], c[5]],
                ])
    return mesh_from_cell_loops(V, cells, name=f"cube{nx}")


def voronoi_mesh(seeds, box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), name="voronoi", merge_tol=1e-9,
                 validate=True):
    """Voronoi tessellation of ``seeds`` clipped to an axis-aligned box."""
    seeds = np.asarray(seeds, dtype=float)
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    tri = Delaunay(seeds)
    indptr, nbr = tri.vertex_neighbor_vertices
    box_hs = []
    for d in range(3):
        e = np.zeros(3)
        e[d] = 1.0
        box_hs.append(np.concatenate([-e, [lo[d]]]))   # -x + lo <= 0
        box_hs.append(np.concatenate([e, [-hi[d]]]))   # x - hi <= 0
    all_pts = []
    cell_polys = []
    scale = np.linalg.norm(hi - lo)
    for i, s in enumerate(seeds):
        nb = nbr[indptr[i]:indptr[i + 1]]
        hs = []
        for j in nb:
            d = seeds[j] - s
            mid = 0.5 * (seeds[j] + s)
            hs.append(np.concatenate([d, [-d @ mid]]))
        hs = np.array(hs + box_hs)
        A, b = hs[:, :3], hs[:, 3]
        norms = np.linalg.norm(A, axis=1)
        # Chebyshev center gives a strictly interior point
        res = linprog(np.r_[0, 0, 0, -1.0], A_ub=np.column_stack([A, norms]), b_ub=-b,
                      bounds=[(None, None)] * 3 + [(0, None)], method="highs")
        if not res.success or res.x[3] <= 0:
            raise MeshError(f"seed {i} produces an empty Voronoi cell")
        hsi = HalfspaceIntersection(hs, res.x[:3])
        pts = hsi.intersections
        faces = []
        for row, nrm in zip(hs, norms):
            dist = np.abs(pts @ row[:3] + row[3]) / nrm
            on = pts[dist < 1e-9 * scale]
            if len(on) < 3:
                continue
            on = _unique_points(on, 1e-11 * scale)
            if len(on) < 3:
                continue
            n = row[:3] / nrm
            c = on.mean(axis=0)
            t1 = on[0] - c
            t1 /= np.linalg.norm(t1)
            t2 = np.cross(n, t1)
            ang = np.arctan2((on - c) @ t2, (on - c) @ t1)
            on = on[np.argsort(ang)]
            # area test discards degenerate slivers from touching planes
            av = 0.5 * np.cross(on, np.roll(on, -1, axis=0)).sum(axis=0)
            if np.linalg.norm(av) < 1e-12 * scale ** 2:
                continue
            faces.append(on)
        cell_polys.append(faces)
        for f in faces:
            all_pts.append(f)
    P = np.vstack(all_pts)
    tree = cKDTree(P)
    pairs = tree.query_pairs(merge_tol * scale, output_type="ndarray")
    parent = np.arange(len(P))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(len(P))])
    uniq, inv = np.unique(roots, return_inverse=True)
    V = P[uniq]
    cells = []
    pos = 0
    for faces in cell_polys:
        loops = []
        for f in faces:
            ids = inv[pos:pos + len(f)]
            pos += len(f)
            # collapse repeated ids produced by the merge
            keep = [ids[0]]
            for x in ids[1:]:
                if x != keep[-1]:
                    keep.append(x)
            if len(keep) > 1 and keep[-1] == keep[0]:
                keep.pop()
            if len(keep) >= 3:
                loops.append(keep)
        cells.append(loops)
    return mesh_from_cell_loops(V, cells, name=name, validate=validate)


def _unique_points(pts, tol):
    out = []
    for p in pts:
        if not any(np.linalg.norm(p - q) < tol for q in out):
            out.append(p)
    return np.array(out)


def octa_mesh(n, box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))):
    """Truncated-octahedra mesh: Voronoi cells of a BCC lattice clipped to the box.

    Seeds are the ``(n+1)**3`` grid points plus the ``n**3`` cell centres of a
    uniform ``n``-grid, giving ``(n+1)**3 + n**3`` cells.
    """
    if n < 1:
        raise ValueError(f"octa_mesh needs n >= 1, got {n}")
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    g = np.linspace(0, 1, n + 1)
    c = (np.arange(n) + 0.5) / n
    G = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    C = np.stack(np.meshgrid(c, c, c, indexing="ij"), -1).reshape(-1, 3)
    seeds = lo + np.vstack([G, C]) * (hi - lo)
    return voronoi_mesh(seeds, box, name=f"octa{n}")


def random_voronoi_mesh(n_cells, seed=0, lloyd_steps=0, box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
                        max_extra_steps=20):
    """Voronoi mesh of random seeds, optionally smoothed by Lloyd iterations.

    A few Lloyd steps approximate a centroidal Voronoi tessellation; large
    CVT meshes are expected to be imported from a file instead.  Nearly
    co-spherical seeds can leave tiny faces whose round-off fails validation;
    further Lloyd steps (at most ``max_extra_steps``) are taken until the
    mesh validates.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    pts = lo + rng.random((n_cells, 3)) * (hi - lo)
    name = f"cvt{n_cells}"
    mesh = voronoi_mesh(pts, box, name=name, validate=False)
    for _ in range(lloyd_steps):
        mesh = voronoi_mesh(mesh.cell_centroid, box, name=name, validate=False)
    for extra in range(max_extra_steps + 1):
        try:
            mesh.validate()
            return mesh
        except MeshError:
            if extra == max_extra_steps:
                raise
        mesh = voronoi_mesh(mesh.cell_centroid, box, name=name, validate=False)


def generate_mesh(kind, n, **kw):
    """Generator dispatch: ``kind`` in {'cube', 'octa', 'cvt'}."""
    kind = kind.lower()
    if kind in ("cube", "hex"):
        return hex_mesh(n, **kw)
    if kind == "octa":
        return octa_mesh(n, **kw)
    if kind in ("cvt", "voronoi"):
        return random_voronoi_mesh(n, **kw)
    raise ValueError(f"unknown mesh kind {kind!r}")


# ---------------------------------------------------------------------------
# text I/O


def save_mesh(mesh, path):
    """Write the plain-text polyhedral format (1-based signed face references)."""
    with open(path, "w") as fh:
        fh.write("# polyhedral mesh: vertices, faces as vertex loops, cells as signed faces\n")
        fh.write(f"vertices {mesh.n_vertices}\n")
        for p in mesh.vertices:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        fh.write(f"faces {mesh.n_faces}\n")
        for lp in mesh.faces:
            fh.write(f"{len(lp)} " + " ".join(str(int(v)) for v in lp) + "\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for c, s in zip(mesh.cells, mesh.cell_signs):
            fh.write(f"{len(c)} " + " ".join(str(int(sg * (f + 1))) for f, sg in zip(c, s)) + "\n")


def load_mesh(path, name=None):
    """Read and validate a mesh written by :func:`save_mesh`."""
    with open(path) as fh:
        lines = [ln.split("#", 1)[0].strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    it = iter(lines)

    def section(label):
        head = next(it).split()
        if head[0] != label:
            raise MeshError(f"expected section {label!r}, found {head[0]!r}")
        return int(head[1])

    try:
        nv = section("vertices")
        V = np.array([[float(x) for x in next(it).split()] for _ in range(nv)])
        nf = section("faces")
        F = []
        for i in range(nf):
            tok = [int(x) for x in next(it).split()]
            if tok[0] != len(tok) - 1:
                raise MeshError(f"face {i}: count {tok[0]} does not match entries")
            F.append(tok[1:])
        nc = section("cells")
        C = []
        for i in range(nc):
            tok = [int(x) for x in next(it).split()]
            if tok[0] != len(tok) - 1:
                raise MeshError(f"cell {i}: count {tok[0]} does not match entries")
            C.append(tok[1:])
    except StopIteration:
        raise MeshError("unexpected end of mesh file") from None
    if V.ndim != 2 or V.shape[1] != 3:
        raise MeshError("vertices must have three coordinates")
    import os
    return PolyMesh(V, F, C, name=name or os.path.splitext(os.path.basename(path))[0])


# ---------------------------------------------------------------------------
# quality


def subtessellate(mesh, k):
    """Tetrahedra (T, 4, 3) of the face-fan decomposition of cell ``k``.

    Each tetrahedron joins the cell centroid, a face centroid and one face
    edge; orientation is irrelevant for quadrature.
    """
    V = mesh.vertices
    xc = mesh.cell_centroid[k]
    tets = []
    for f in mesh.cells[k]:
        pts = V[mesh.faces[f]]
        nxt = np.roll(pts, -1, axis=0)
        for a, b in zip(pts, nxt):
            tets.append([xc, mesh.face_centroid[f], a, b])
    return np.array(tets)


def regularity_report(mesh, gamma=0.05):
    """Shape-regularity proxies per cell.

    ``ball_ratio`` is the inscribed-ball radius about the centroid over h_K,
    ``disk_ratio`` the smallest in-face disk radius about a face centroid over
    h_K and ``edge_ratio`` the shortest cell edge over h_K.  The ball proxy is
    exact for convex cells; non-convex cells are flagged.
    """
    V = mesh.vertices
    nK = mesh.n_cells
    ball = np.zeros(nK)
    disk = np.zeros(nK)
    edge = np.zeros(nK)
    convex = np.ones(nK, dtype=bool)
    face_disk = np.zeros(mesh.n_faces)
    for f, lp in enumerate(mesh.faces):
        pts = V[lp]
        nxt = np.roll(pts, -1, axis=0)
        c = mesh.face_centroid[f]
        d = nxt - pts
        cr = np.linalg.norm(np.cross(d, c - pts), axis=1) / np.linalg.norm(d, axis=1)
        face_disk[f] = cr.min()
    for k in range(nK):
        xc = mesh.cell_centroid[k]
        hk = mesh.cell_diam[k]
        dists = []
        for f, s in zip(mesh.cells[k], mesh.cell_signs[k]):
            n = s * mesh.face_normal[f]
            dist = (mesh.face_centroid[f] - xc) @ n
            dists.append(dist)
            vv = V[mesh.cell_vertices[k]]
            if np.any((vv - mesh.face_centroid[f]) @ n > 1e-10 * hk):
                convex[k] = False
        ball[k] = max(min(dists), 0.0) / hk
        disk[k] = face_disk[mesh.cells[k]].min() / hk
        edge[k] = mesh.edge_length[mesh.cell_edges(k)].min() / hk
    worst = np.minimum(np.minimum(ball, disk), edge)
    return {
        "ball_ratio": ball,
        "disk_ratio": disk,
        "edge_ratio": edge,
        "convex": convex,
        "min_ball_ratio": float(ball.min()),
        "min_disk_ratio": float(disk.min()),
        "min_edge_ratio": float(edge.min()),
        "worst_cell": int(np.argmin(worst)),
        "gamma": gamma,
        "passed": bool(worst.min() >= gamma),
    }
