import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vembddc.mesh import (MeshError, PolyMesh, generate_mesh, hex_mesh, load_mesh, octa_mesh,
                          random_voronoi_mesh, regularity_report, save_mesh, subtessellate)


def divergence_volume(mesh, K):
    """|K| = 1/3 sum_f (x_f . n_f) |f| with outward normals."""
    return sum(s * mesh.face_area[f] * (mesh.face_centroid[f] @ mesh.face_normal[f])
               for f, s in zip(mesh.cells[K], mesh.cell_signs[K])) / 3.0


def test_single_cube_counts():
    m = hex_mesh(1)
    assert (m.n_cells, m.n_faces, m.n_edges, m.n_vertices) == (1, 6, 12, 8)


def test_hex_counts_and_volume():
    m = hex_mesh(2)
    assert m.n_cells == 8 and m.n_faces == 36
    assert abs(m.cell_volume.sum() - 1.0) < 1e-12
    n = 3
    m = hex_mesh(n)
    assert m.n_faces == 3 * n * n * (n + 1)
    assert m.n_edges == 3 * n * (n + 1) ** 2
    assert m.n_vertices == (n + 1) ** 3


def test_hex_rejects_zero():
    with pytest.raises((ValueError, MeshError)):
        hex_mesh(0)


@pytest.mark.parametrize("mesh", [hex_mesh(3), octa_mesh(2), random_voronoi_mesh(30, seed=3)],
                         ids=["cube", "octa", "cvt"])
def test_mesh_invariants(mesh):
    assert abs(mesh.cell_volume.sum() - 1.0) < 1e-10
    assert np.all(mesh.cell_volume > 0)
    for K in range(mesh.n_cells):
        av = sum(s * mesh.face_area[f] * mesh.face_normal[f]
                 for f, s in zip(mesh.cells[K], mesh.cell_signs[K]))
        assert np.linalg.norm(av) <= 1e-12 * mesh.cell_diam[K] ** 2
        assert abs(divergence_volume(mesh, K) - mesh.cell_volume[K]) < 1e-12 * mesh.cell_volume[K]
    ncell = (mesh.face_cells >= 0).sum(axis=1)
    assert set(ncell[mesh.boundary_faces]) == {1}
    inner = np.setdiff1d(np.arange(mesh.n_faces), mesh.boundary_faces)
    assert np.all(ncell[inner] == 2)
    assert mesh.validate()


def test_octa_interior_cells_are_truncated_octahedra():
    m = octa_mesh(4)
    lo = m.cell_centroid.min(axis=0)
    interior = [K for K in range(m.n_cells)
                if np.all(np.abs(m.vertices[m.cell_vertices[K]] - 0.5).max(axis=0) < 0.5 - 1e-9)]
    assert interior
    for K in interior:
        nf = len(m.cells[K])
        assert nf == 14
        sizes = sorted(len(m.faces[f]) for f in m.cells[K])
        assert sizes == [4] * 6 + [6] * 8
    assert lo.min() >= 0


def test_octa_cell_count():
    m = octa_mesh(2)
    assert m.n_cells == 3 ** 3 + 2 ** 3


def test_random_voronoi_deterministic():
    a = random_voronoi_mesh(20, seed=7)
    b = random_voronoi_mesh(20, seed=7)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    assert a.n_cells == 20


def test_generate_mesh_dispatch():
    assert generate_mesh("cube", 2).n_cells == 8
    with pytest.raises(ValueError):
        generate_mesh("sphere", 2)


def test_save_load_roundtrip(tmp_path):
    m = hex_mesh(1)
    p = tmp_path / "cube.txt"
    save_mesh(m, str(p))
    r = load_mesh(str(p))
    assert [list(f) for f in r.faces] == [list(f) for f in m.faces]
    assert [list(c) for c in r.cells] == [list(c) for c in m.cells]
    np.testing.assert_array_equal(r.vertices, m.vertices)


TET = """vertices 4
0 0 0
1 0 0
0 1 0
0 0 1
faces 4
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
cells 1
4 1 2 3 4
"""


def test_load_single_tetrahedron(tmp_path):
    p = tmp_path / "tet.txt"
    p.write_text(TET)
    m = load_mesh(str(p))
    assert m.n_cells == 1 and m.n_faces == 4
    assert abs(m.cell_volume[0] - 1.0 / 6.0) < 1e-15
    tets = subtessellate(m, 0)
    vols = [abs(np.linalg.det(t[1:] - t[0])) / 6 for t in tets]
    assert abs(sum(vols) - 1.0 / 6.0) < 1e-15


def test_load_rejects_nonplanar_face(tmp_path):
    m = hex_mesh(1)
    p = tmp_path / "bad.txt"
    save_mesh(m, str(p))
    lines = p.read_text().splitlines()
    # move the first vertex off its faces' planes by 1e-3
    x = [float(v) for v in lines[2].split()]
    x[2] += 1e-3
    x[0] += 1e-3
    lines[2] = " ".join(repr(v) for v in x)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(MeshError, match="face"):
        load_mesh(str(p))


def test_load_rejects_open_cell(tmp_path):
    p = tmp_path / "open.txt"
    p.write_text(TET.replace("cells 1\n4 1 2 3 4", "cells 1\n3 1 2 3"))
    with pytest.raises(MeshError):
        load_mesh(str(p))


def test_load_rejects_truncated_file(tmp_path):
    p = tmp_path / "short.txt"
    p.write_text(TET.splitlines()[0] + "\n0 0 0\n")
    with pytest.raises(MeshError):
        load_mesh(str(p))


def test_regularity_unit_cube():
    rep = regularity_report(hex_mesh(1))
    assert abs(rep["min_edge_ratio"] - 1 / np.sqrt(3)) < 1e-12
    assert abs(rep["min_ball_ratio"] - 0.5 / np.sqrt(3)) < 1e-12
    assert rep["passed"]


def test_regularity_flags_sliver():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.3, 0.3, 1e-6]], dtype=float)
    faces = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]
    m = PolyMesh(V, faces, [[1, 2, 3, 4]])
    rep = regularity_report(m, gamma=0.05)
    assert not rep["passed"]
    for key in ("ball_ratio", "disk_ratio", "edge_ratio"):
        assert np.all(rep[key] <= 1.0)


def test_subtessellation_matches_volume():
    for m in (hex_mesh(1), octa_mesh(2)):
        for K in range(m.n_cells):
            tets = subtessellate(m, K)
            vols = np.array([abs(np.linalg.det(t[1:] - t[0])) / 6 for t in tets])
            assert np.all(vols > 0)
            assert abs(vols.sum() - m.cell_volume[K]) < 1e-12 * m.cell_volume[K]
    assert len(subtessellate(hex_mesh(1), 0)) == 24


@settings(max_examples=10, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_geometry_translation_invariant(dx, dy, dz):
    shift = np.array([dx, dy, dz])
    a = octa_mesh(1)
    b = PolyMesh(a.vertices + shift, a.faces, [[s * (f + 1) for f, s in zip(c, sg)]
                                               for c, sg in zip(a.cells, a.cell_signs)])
    np.testing.assert_allclose(b.cell_volume, a.cell_volume, rtol=1e-10)
    np.testing.assert_allclose(b.face_normal, a.face_normal, atol=1e-10)
    np.testing.assert_allclose(b.cell_centroid, a.cell_centroid + shift, atol=1e-9)
