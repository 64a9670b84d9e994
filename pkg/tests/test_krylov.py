import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vembddc.assembly import StokesProblem, assemble
from vembddc.bddc import BDDC
from vembddc.bench.problems import smooth_problem
from vembddc.decomp import Decomposition, partition_box
from vembddc.krylov import (BlockSchurPreconditioner, gmres, lanczos_extremes, pcg,
                            solve_interface)
from vembddc.mesh import hex_mesh


def spd(rng, n, cond=100.0):
    Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    return (Q * np.geomspace(1.0, cond, n)) @ Q.T


def test_two_by_two_exact():
    A = np.array([[4.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    res = pcg(A, b, tol=1e-14)
    assert res.converged and res.iterations <= 2
    w = np.linalg.eigvalsh(A)
    assert np.isclose(res.condition, w[1] / w[0], rtol=1e-8)
    assert np.allclose(A @ res.x, b)


def test_exact_preconditioner_one_iteration():
    rng = np.random.default_rng(0)
    A = spd(rng, 30, 1e4)
    res = pcg(A, rng.standard_normal(30), M=np.linalg.inv(A))
    assert res.converged and res.iterations == 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_energy_error_non_increasing(seed):
    rng = np.random.default_rng(seed)
    A = spd(rng, 12, 1e3)
    b = rng.standard_normal(12)
    xs = np.linalg.solve(A, b)
    errs = []
    pcg(A, b, tol=1e-12, callback=lambda it, x, r: errs.append((x - xs) @ A @ (x - xs)))
    e0 = xs @ A @ xs
    errs = [e0] + errs
    assert all(e1 <= e0 * (1 + 1e-10) + 1e-24 for e0, e1 in zip(errs, errs[1:]))


def test_lanczos_of_diagonal():
    # CG on a diagonal matrix with all components excited recovers its extremes
    d = np.linspace(1.0, 10.0, 8)
    res = pcg(np.diag(d), np.ones(8), tol=1e-14)
    assert np.isclose(res.lambda_min, 1.0, rtol=1e-8) and np.isclose(res.lambda_max, 10.0, rtol=1e-8)
    assert np.isnan(lanczos_extremes([], [])[0])


def test_gmres_matches_cg():
    rng = np.random.default_rng(2)
    A = spd(rng, 40)
    b = rng.standard_normal(40)
    x1 = pcg(A, b, tol=1e-12).x
    r = gmres(A, b, tol=1e-12, restart=15)
    assert r.converged
    assert np.allclose(r.x, x1, atol=1e-8 * np.abs(x1).max())


def test_pcg_reports_breakdown_on_indefinite():
    A = np.diag([1.0, -1.0, 2.0])
    res = pcg(A, np.ones(3))
    assert not res.converged and "breakdown" in res.reason


def test_block_schur_on_one_cell():
    # one traction face removes the constant pressure mode
    sysm = assemble(StokesProblem(hex_mesh(1), 2, neumann=lambda c, n: c[0] > 1 - 1e-12,
                                  traction=lambda x, n: np.zeros((len(x), 3))))
    assert sysm.mean is None
    A = sysm.A.toarray()
    B = sysm.B.toarray()
    assert (np.diag(A) > 0).all()
    M = BlockSchurPreconditioner(sysm.A, sysm.B)
    S = B @ np.diag(1.0 / np.diag(A)) @ B.T
    r = np.random.default_rng(3).standard_normal(A.shape[0] + B.shape[0])
    z = M(r)
    assert np.allclose(z[:A.shape[0]], r[:A.shape[0]] / np.diag(A))
    assert np.allclose(S @ z[A.shape[0]:], r[A.shape[0]:], rtol=1e-10)


def test_block_schur_gmres_converges_k2():
    prob, _ = smooth_problem(hex_mesh(3), 2)
    sysm = assemble(prob)
    M = BlockSchurPreconditioner(sysm.A, sysm.B, sysm.mean)
    res = gmres(sysm.matrix().tocsr(), sysm.rhs(), M, tol=1e-8)
    assert res.converged
    assert 0 < res.iterations < 2000


def test_gmres_time_limit_flags_nc():
    rng = np.random.default_rng(5)
    A = spd(rng, 200, 1e8)
    res = gmres(A, rng.standard_normal(200), tol=1e-14, restart=5, time_limit=0.0)
    assert not res.converged and res.reason == "time limit"


@pytest.fixture(scope="module")
def small_decomp():
    m = hex_mesh(4)
    return Decomposition(assemble(smooth_problem(m, 2)[0]), partition_box(m, (2, 2, 1)))


def test_lanczos_condition_matches_dense(small_decomp):
    d = small_decomp
    assert d.n_gamma <= 400 and d.n_p0 == 0
    pre = BDDC(d, scaling="deluxe")
    res, _ = solve_interface(d, pre, tol=1e-10)
    w = np.linalg.eigvals(pre.dense_oracle() @ d.dense()).real
    kappa = w.max() / w.min()
    assert abs(res.condition - kappa) <= 0.05 * kappa
    assert abs(res.lambda_min - w.min()) <= 1e-2


def test_interface_solution_residual(small_decomp):
    pre = BDDC(small_decomp)
    res, g = solve_interface(small_decomp, pre)
    assert res.converged
    assert res.residuals[-1] <= 1e-8 * np.linalg.norm(g)
    # true residual agrees with the recursively updated one up to rounding
    assert np.linalg.norm(small_decomp.apply(res.x) - g) <= 2e-8 * np.linalg.norm(g)
