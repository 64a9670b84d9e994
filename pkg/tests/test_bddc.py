import numpy as np
import pytest

from vembddc.assembly import StokesProblem, assemble
from vembddc.bddc import BDDC, build_primal_space, change_of_basis
from vembddc.bench.problems import smooth_problem
from vembddc.decomp import Decomposition, partition_box
from vembddc.krylov import solve_interface
from vembddc.mesh import hex_mesh, octa_mesh


def swirl(x):
    return np.stack([np.sin(3 * x[:, 1]), x[:, 0] * x[:, 2], np.cos(2 * x[:, 0])], axis=1)


def make_decomp(mesh, shape, k=2, smooth=False):
    prob = smooth_problem(mesh, k)[0] if smooth else StokesProblem(mesh, k, f=swirl)
    return Decomposition(assemble(prob), partition_box(mesh, shape))


@pytest.fixture(scope="module")
def closed4():
    # all-Dirichlet: every subdomain owns a constant pressure
    return make_decomp(hex_mesh(4), (2, 2, 1))


@pytest.fixture(scope="module")
def cube8():
    return make_decomp(hex_mesh(4), (2, 2, 2), smooth=True)


def test_single_face_primal_count():
    d = make_decomp(hex_mesh(2), (2, 1, 1), smooth=True)
    assert BDDC(d).n_primal == 1


def test_primal_count_formula_on_2x2x2():
    d = make_decomp(hex_mesh(4), (2, 2, 2))
    pre = BDDC(d)
    # one interior subdomain vertex (3 components), 12 macro faces,
    # 6 interior macro edges with 4 incident faces each
    assert pre.primal.raw_count == 3 * 1 + 12 + 6 * 4
    # coplanar incident faces give the same edge functional: 2 survive per edge
    assert pre.n_primal == 3 * 1 + 12 + 6 * 2


def test_change_of_basis_makes_constraints_explicit():
    rng = np.random.default_rng(0)
    C = rng.standard_normal((3, 10))
    b = change_of_basis(C)
    CT = C @ b.T
    assert np.allclose(CT[:, b.primal], np.eye(3), atol=1e-12)
    assert np.abs(CT[:, b.dual]).max() < 1e-12


def test_vertex_basis_is_identity(cube8):
    pre = BDDC(cube8, solvers=False)
    for c, b in zip(cube8.classes, pre.bases):
        if c.kind == "vertex":
            assert np.array_equal(b.T, np.eye(c.size))


def test_face_constraint_has_one_coordinate_per_subdomain(closed4):
    pre = BDDC(closed4, solvers=False)
    for ci, c in enumerate(closed4.classes):
        if c.kind == "face":
            C = pre.primal.rows[ci]
            assert C.shape[0] == 1
            row = C @ pre.bases[ci].T
            assert np.count_nonzero(np.abs(row) > 1e-12) == 1


def test_congruence_of_transformed_schur(closed4):
    pre = BDDC(closed4, solvers=False)
    rng = np.random.default_rng(2)
    for s in closed4.subdomains:
        Tg = pre.local_transform(s).toarray()
        S = closed4.dense_schur(s.index)
        Sh = Tg.T @ S @ Tg
        for _ in range(20):
            w = rng.standard_normal(s.n_g)
            assert np.isclose((Tg @ w) @ S @ (Tg @ w), w @ Sh @ w, rtol=1e-10)


def test_multiplicity_weights(closed4):
    pre = BDDC(closed4, scaling="multiplicity", solvers=False)
    for ci, c in enumerate(closed4.classes):
        w = [pre._weights[(i, ci)] for i in c.sharing]
        assert np.all(sum(w) == 1.0)
        assert np.allclose(w[0], 1.0 / len(c.sharing))
    edge = [c for c in closed4.classes if c.kind == "edge" and len(c.sharing) == 4]
    assert edge


@pytest.mark.parametrize("edge_deluxe", [False, True])
def test_deluxe_partition_of_unity(closed4, edge_deluxe):
    pre = BDDC(closed4, scaling="deluxe", edge_deluxe=edge_deluxe, solvers=False)
    for ci, c in enumerate(closed4.classes):
        nd = len(pre.bases[ci].dual)
        tot = sum(np.atleast_2d(np.diag(W)) if W.ndim == 1 else W
                  for W in (pre._weights[(i, ci)] for i in c.sharing))
        assert np.abs(tot - np.eye(nd)).max() <= 1e-12 * max(1, nd)


def test_deluxe_weights_on_mirror_pair():
    # subdomains x < 1/2 and x > 1/2 are mirror images; the reflection acts on
    # the face dual coordinates as a similarity, so both weights share their
    # spectrum and each has trace n/2
    m = hex_mesh(2)
    d = Decomposition(assemble(StokesProblem(m, 2)), partition_box(m, (2, 1, 1)))
    pre = BDDC(d, scaling="deluxe", solvers=False)
    W0, W1 = pre._weights[(0, 0)], pre._weights[(1, 0)]
    n = W0.shape[0]
    assert np.isclose(np.trace(W0), n / 2, rtol=1e-10)
    assert np.isclose(np.trace(W1), n / 2, rtol=1e-10)
    e0 = np.sort(np.linalg.eigvals(W0).real)
    e1 = np.sort(np.linalg.eigvals(W1).real)
    assert np.allclose(e0, e1, atol=1e-10)
    assert np.allclose(e0 + e1[::-1], 1.0, atol=1e-10)


def test_preconditioner_symmetric(closed4):
    pre = BDDC(closed4, scaling="deluxe")
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.standard_normal((2, closed4.size))
        lhs, rhs = a @ pre(b), b @ pre(a)
        assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(a) * np.linalg.norm(pre(b))


@pytest.mark.parametrize("scaling", ["multiplicity", "deluxe"])
def test_matrix_free_preconditioner_matches_dense_oracle(closed4, scaling):
    pre = BDDC(closed4, scaling=scaling)
    assert closed4.size <= 600
    Md = pre.dense_oracle()
    X = np.random.default_rng(5).standard_normal((closed4.size, 6))
    for x in X.T:
        y = pre(x)
        assert np.linalg.norm(y - Md @ x) <= 1e-9 * np.linalg.norm(Md @ x)


def test_local_solvers_agree(cube8):
    a = BDDC(cube8, scaling="deluxe", local_solver="schur")
    b = BDDC(cube8, scaling="deluxe", local_solver="sparse")
    x = np.random.default_rng(6).standard_normal(cube8.size)
    ya, yb = a(x), b(x)
    assert np.linalg.norm(ya - yb) <= 1e-10 * np.linalg.norm(yb)


def test_unknown_local_solver_rejected(closed4):
    with pytest.raises(ValueError):
        BDDC(closed4, local_solver="cholesky")


def test_average_is_projection(closed4):
    pre = BDDC(closed4, scaling="deluxe")
    rng = np.random.default_rng(7)
    for _ in range(10):
        v = [rng.standard_normal(loc.nD) for loc in pre.locals]
        e1 = pre.average(v)
        e2 = pre.average(e1)
        for a, b in zip(e1, e2):
            assert np.linalg.norm(a - b) <= 1e-10 * max(np.linalg.norm(a), 1.0)


@pytest.mark.parametrize("scaling", ["multiplicity", "deluxe"])
def test_dual_space_is_benign(closed4, cube8, scaling):
    for d in (closed4, cube8):
        assert BDDC(d, scaling=scaling).verify_benign(50) <= 1e-10


def test_dropping_face_constraints_breaks_benign_space(closed4):
    # fluxes through mesh faces only see face normal moments, so the face
    # functionals are the ones that keep dual vectors flux free
    pre = BDDC(closed4, drop=("face",), solvers=False)
    pre.locals = closed4._map(pre._setup_local)
    assert pre.verify_benign(20) > 1e-3
    assert BDDC(closed4, drop=("edge",)).verify_benign(20) <= 1e-10


def test_correction_keeps_subdomain_fluxes(closed4):
    pre = BDDC(closed4, scaling="deluxe")
    r = np.random.default_rng(8).standard_normal(closed4.size)
    r[closed4.n_gamma:] = 0.0
    z = pre(r)
    flux = closed4.flux_residual(z[:closed4.n_gamma])
    assert np.abs(flux).max() <= 1e-10 * np.linalg.norm(z)


def test_all_primal_is_exact(closed4):
    pre = BDDC(closed4, mode="all")
    res, g = solve_interface(closed4, pre)
    assert res.converged and res.iterations <= 1


@pytest.mark.parametrize("mesh", [hex_mesh(4), octa_mesh(2)], ids=["cube4", "octa2"])
def test_minimum_eigenvalue_is_one(mesh):
    d = make_decomp(mesh, (2, 2, 2), smooth=True)
    res, _ = solve_interface(d, BDDC(d, scaling="deluxe"))
    assert res.converged
    assert 0.999 <= res.lambda_min <= 1.01
    assert 1.0 <= res.condition <= 1e3


def test_fully_primal_controls_rigid_modes(cube8):
    ps = build_primal_space(cube8, "fully_primal")
    assert not ps.warnings
    assert ps.n_primal >= build_primal_space(cube8, "minimal").n_primal
