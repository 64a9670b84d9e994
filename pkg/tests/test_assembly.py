import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from vembddc.assembly import (StokesProblem, assemble, compute_errors, export_matrix,
                              solve_direct)
from vembddc.bench.problems import polynomial_solution, smooth_problem
from vembddc.mesh import hex_mesh, octa_mesh
from vembddc.ordering import SaddleLU, nested_dissection
from vembddc.vem_space import interpolate


def all_neumann(centroid, normal):
    return True


def zero_traction(x, n):
    return np.zeros((len(x), 3))


def test_zero_data_gives_zero_solution():
    sysm = assemble(StokesProblem(hex_mesh(1), 2))
    u, p = solve_direct(sysm)
    assert np.abs(u).max() == 0.0 and np.abs(p).max() == 0.0


@pytest.mark.parametrize("k", [2, 3])
@pytest.mark.parametrize("mesh", [hex_mesh(1), hex_mesh(2), octa_mesh(1), octa_mesh(2)],
                         ids=["cube1", "cube2", "octa1", "octa2"])
def test_patch_test(mesh, k):
    sol = polynomial_solution(k, seed=4)
    sysm = assemble(sol.problem(mesh, k))
    u, p = solve_direct(sysm)
    ui = interpolate(mesh, k, sol.u, sysm.cache, sysm.dofmap)
    assert np.abs(u - ui).max() <= 1e-8 * max(1.0, np.abs(ui).max())
    err = compute_errors(sysm, u, p, sol.u, sol.grad, sol.p)
    assert err["h1_velocity"] < 1e-8 and err["l2_pressure"] < 1e-8


def test_patch_test_with_traction_faces():
    sol = polynomial_solution(2, seed=9)
    mesh = hex_mesh(2)
    sysm = assemble(sol.problem(mesh, 2, neumann=lambda c, n: c[0] > 1 - 1e-12))
    assert sysm.mean is None
    u, p = solve_direct(sysm)
    ui = interpolate(mesh, 2, sol.u, sysm.cache, sysm.dofmap)
    assert np.abs(u - ui).max() <= 1e-8 * np.abs(ui).max()


def test_manufactured_residual_and_exact_divergence():
    prob, sol = smooth_problem(hex_mesh(4), 2)
    sysm = assemble(prob)
    M = sysm.matrix()
    rhs = sysm.rhs()
    u, p = solve_direct(sysm)
    x = np.concatenate([u[sysm.free], p])
    assert np.linalg.norm(M @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)
    # discrete solution is exactly divergence free: B u = g
    assert np.linalg.norm(sysm.B @ u[sysm.free] - sysm.g) <= 1e-10 * np.linalg.norm(u)


def test_symmetric_and_rigid_kernel_without_dirichlet():
    m = octa_mesh(1)
    sysm = assemble(StokesProblem(m, 2, neumann=all_neumann, traction=zero_traction))
    A = sysm.A.toarray()
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
    w = np.linalg.eigvalsh(A)
    assert w.min() > -1e-10 * w.max()
    assert np.sum(w < 1e-9 * w.max()) == 6


def test_load_of_constant_force():
    m = hex_mesh(2)
    c = np.array([1.5, -0.5, 2.0])
    sysm = assemble(StokesProblem(m, 2, f=lambda x: np.tile(c, (len(x), 1)),
                                  neumann=all_neumann, traction=zero_traction))
    for d in range(3):
        e = np.zeros(3)
        e[d] = 1.0
        t = interpolate(m, 2, lambda x: np.tile(e, (len(x), 1)), sysm.cache, sysm.dofmap)
        assert np.isclose(sysm.f @ t[sysm.free], c[d] * 1.0, rtol=1e-12)


def test_divergence_row_of_linear_field():
    m = octa_mesh(1)
    sysm = assemble(StokesProblem(m, 2, neumann=all_neumann, traction=zero_traction))
    v = interpolate(m, 2, lambda x: np.stack([x[:, 0], 0 * x[:, 0], 0 * x[:, 0]], axis=1),
                    sysm.cache, sysm.dofmap)[sysm.free]
    dm = sysm.dofmap
    for K in range(m.n_cells):
        # the first pressure basis function is the constant 1
        row = dm.pressure_dofs(K)[0]
        assert np.isclose(sysm.B[row] @ v, m.cell_volume[K], rtol=1e-10)


def test_export_roundtrip(tmp_path):
    sysm = assemble(StokesProblem(hex_mesh(1), 2))
    path = tmp_path / "m.mtx"
    export_matrix(sysm, str(path))
    M = scipy.io.mmread(str(path))
    assert abs(M - sysm.matrix()).max() < 1e-14


def test_saddle_lu_matches_reference_solver():
    prob, _ = smooth_problem(hex_mesh(3), 2)
    sysm = assemble(prob)
    M = sysm.matrix().tocsc()
    b = np.random.default_rng(0).standard_normal(M.shape[0])
    x = SaddleLU(M, sysm.n_free, sysm.dof_coords).solve(b)
    y = spla.spsolve(M, b)
    assert np.abs(x - y).max() <= 1e-9 * np.abs(y).max()


def test_nested_dissection_is_permutation():
    n = 6
    pts = np.array([[i, j, 0.0] for i in range(n) for j in range(n)])
    G = sp.lil_matrix((n * n, n * n))
    for a in range(n * n):
        for b in range(n * n):
            if np.abs(pts[a] - pts[b]).sum() == 1:
                G[a, b] = 1
    p = nested_dissection(G, pts, leaf=4)
    assert sorted(p.tolist()) == list(range(n * n))
