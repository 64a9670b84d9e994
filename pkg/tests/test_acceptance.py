"""Acceptance suite.  Each test prints one ``criterion N: PASS|FAIL`` line.

The benchmark presets are run once per module and shared between criteria.
Expect about 11 minutes on one core.
"""
import gc
import math
import time

import numpy as np
import pytest

from vembddc.assembly import assemble, compute_errors, solve_direct
from vembddc.bddc import BDDC
from vembddc.bench.problems import polynomial_solution
from vembddc.bench.suite import Runner, preset
from vembddc.decomp import Decomposition, partition_box
from vembddc.mesh import hex_mesh, octa_mesh
from vembddc.vem_space import interpolate

_runs = {}


def run_preset(name):
    """Rows of a preset, each with its wall time and (for BDDC rows) the
    worst benign-space violation over 100 random dual vectors."""
    if name not in _runs:
        runner = Runner(keep=True)
        rows = []
        for cfg in preset(name):
            t0 = time.perf_counter()
            row = runner.run(cfg)
            row["wall"] = time.perf_counter() - t0
            obj = runner.objects.pop(cfg.name, None)
            row["benign"] = obj["pre"].verify_benign(100) if obj else None
            del obj
            rows.append(row)
        del runner
        gc.collect()
        _runs[name] = rows
    return _runs[name]


def by_name(rows):
    return {r["name"]: r for r in rows}


def bddc_rows():
    return [r for name in ("h-optimality", "k-optimality", "sinkers", "solver-comparison", "scaling")
            for r in run_preset(name) if r["solver"] == "bddc"]


def report(capsys, num, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_1_patch_test(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for mk in (hex_mesh, octa_mesh):
        for n in (1, 2):
            mesh = mk(n)
            for k in (2, 3):
                sol = polynomial_solution(k, seed=11)
                sysm = assemble(sol.problem(mesh, k))
                u, p = solve_direct(sysm)
                ui = interpolate(mesh, k, sol.u, sysm.cache, sysm.dofmap)
                err = compute_errors(sysm, u, p, sol.u, sol.grad, sol.p)
                worst = max(worst, np.abs(u - ui).max() / max(1.0, np.abs(ui).max()),
                            err["l2_pressure"])
    wall = time.perf_counter() - t0
    report(capsys, 1, worst <= 1e-8 and wall < 10,
           f"max DOF error {worst:.2e} (tol 1e-8), runtime {wall:.1f} s")


def _orders(vals):
    return [math.log2(a / b) for a, b in zip(vals, vals[1:])]


def test_criterion_2_convergence_orders(capsys):
    rows = by_name(run_preset("h-optimality"))
    cases = [rows[f"hopt-n{n}-minimal"] for n in (4, 8, 16)]
    assert all(r["status"] == "ok" for r in cases)
    ou = _orders([r["h1_velocity"] for r in cases])
    op = _orders([r["l2_pressure"] for r in cases])
    wall = sum(r["wall"] for r in cases)
    ok = all(1.7 <= o <= 2.3 for o in ou + op) and wall < 300
    report(capsys, 2, ok, f"H1 velocity orders {np.round(ou, 3).tolist()}, "
                          f"L2 pressure orders {np.round(op, 3).tolist()}, runtime {wall:.0f} s")


def test_criterion_3_lower_bound(capsys):
    rows = bddc_rows()
    lam = np.array([r["lambda_min"] for r in rows], dtype=float)
    ok = len(rows) > 0 and all(r["status"] == "ok" for r in rows) and \
        bool(((lam >= 0.999) & (lam <= 1.01)).all())
    report(capsys, 3, ok, f"{len(rows)} cases, lambda_min in [{lam.min():.5f}, {lam.max():.5f}]")


def test_criterion_4_minimal_quasi_optimality(capsys):
    rows = by_name(run_preset("h-optimality"))
    cases = [rows[f"hopt-n{n}-minimal"] for n in (4, 8, 16)]
    # 2x2x2 subdomains: H/h = n/2
    x = np.array([(1 + math.log(n / 2)) ** 2 for n in (4, 8, 16)])
    y = np.array([r["kappa"] for r in cases])
    slope, icpt = np.polyfit(x, y, 1)
    r2 = 1 - ((y - (slope * x + icpt)) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    wall = sum(r["wall"] for r in cases)
    report(capsys, 4, r2 >= 0.9 and slope > 0 and wall < 600,
           f"kappa {np.round(y, 3).tolist()}, R^2 {r2:.4f}, runtime {wall:.0f} s")


def test_criterion_5_adaptive_bound(capsys):
    hopt = [r for r in run_preset("h-optimality") if r["coarse"] == "adaptive"]
    scal = [r for r in run_preset("scaling") if r["coarse"] == "adaptive"]
    rows = hopt + scal
    kap = max(r["kappa"] for r in rows)
    its = [r["it"] for r in hopt]
    ok = all(r["status"] == "ok" for r in rows) and kap <= 8 and max(its) - min(its) <= 4
    report(capsys, 5, ok, f"{len(rows)} cases, max kappa {kap:.3f}, "
                          f"iterations under refinement {its}")


def test_criterion_6_k_robustness(capsys):
    rows = by_name(run_preset("k-optimality"))
    its = [rows[f"kopt-k{k}-adaptive"]["it"] for k in (2, 3, 4)]
    kap = [rows[f"kopt-k{k}-minimal"]["kappa"] for k in (2, 3, 4)]
    ok = all(r["status"] == "ok" for r in rows.values()) and all(6 <= i <= 16 for i in its) \
        and kap[0] < kap[1] < kap[2]
    report(capsys, 6, ok, f"adaptive iterations {its} (band [6, 16]), "
                          f"minimal kappa {np.round(kap, 3).tolist()}")


def brute_force_reduced(d):
    """Dense Schur complement of the global saddle system onto (u_Gamma, p_0)
    and the matching reduced right-hand side.

    Pressures are split as ``p + sum_i c_i p0_i`` with one mean constraint
    per closed subdomain, then everything but (u_Gamma, p_0) is eliminated.
    """
    sysm = d.system
    A, B = sysm.A.toarray(), sysm.B.toarray()
    nf, npr, ng, n0 = sysm.n_free, sysm.n_pressure, d.n_gamma, d.n_p0
    npl = sysm.dofmap.n_pressure_local
    closed = [s for s in d.subdomains if s.closed]
    C = np.zeros((npr, n0))
    L = np.zeros((npr, n0))
    for j, s in enumerate(closed):
        P = sysm.dofmap.pressure_dofs(s.cells)
        C[P[::npl], j] = 1.0
        L[P, j] = sysm.mean[P]
    gam = d.iface_free
    inner = np.setdiff1d(np.arange(nf), gam)
    n_in = len(inner) + npr + n0
    N = n_in + ng + n0
    K = np.zeros((N, N))
    iu = np.arange(len(inner))
    ip = len(inner) + np.arange(npr)
    il = len(inner) + npr + np.arange(n0)
    ig = n_in + np.arange(ng)
    i0 = n_in + ng + np.arange(n0)
    vel = np.concatenate([iu, ig])
    order = np.concatenate([inner, gam])
    K[np.ix_(vel, vel)] = A[np.ix_(order, order)]
    K[np.ix_(ip, vel)] = B[:, order]
    K[np.ix_(vel, ip)] = B[:, order].T
    K[np.ix_(i0, vel)] = C.T @ B[:, order]
    K[np.ix_(vel, i0)] = (C.T @ B[:, order]).T
    K[np.ix_(il, ip)] = L.T
    K[np.ix_(ip, il)] = L
    b = np.concatenate([sysm.f[inner], sysm.g, np.zeros(n0), sysm.f[gam], C.T @ sysm.g])
    I, G = np.arange(n_in), np.arange(n_in, N)
    X = np.linalg.solve(K[np.ix_(I, I)], np.column_stack([K[np.ix_(I, G)], b[I]]))
    S = K[np.ix_(G, G)] - K[np.ix_(G, I)] @ X[:, :-1]
    g = b[G] - K[np.ix_(G, I)] @ X[:, -1]
    return S, g


def test_criterion_7_oracle_equivalence(capsys):
    sol = polynomial_solution(2, seed=5)
    mesh = hex_mesh(4)
    d = Decomposition(assemble(sol.problem(mesh, 2)), partition_box(mesh, (2, 2, 1)))
    assert d.n_gamma <= 600 and d.n_p0 == 4
    S, g = brute_force_reduced(d)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((d.size, 20))
    e_s = max(np.linalg.norm(d.apply(x) - S @ x) / np.linalg.norm(S @ x) for x in X.T)
    gh = d.rhs()
    e_g = np.linalg.norm(gh - g) / np.linalg.norm(g)
    e_m = 0.0
    for scaling in ("multiplicity", "deluxe"):
        pre = BDDC(d, scaling=scaling)
        Md = pre.dense_oracle()
        e_m = max(e_m, max(np.linalg.norm(pre.apply(x) - Md @ x) / np.linalg.norm(Md @ x)
                           for x in X.T))
    ok = max(e_s, e_g, e_m) <= 1e-9
    report(capsys, 7, ok, f"{d.n_gamma} interface DOFs; relative errors S {e_s:.1e}, "
                          f"g {e_g:.1e}, M^-1 {e_m:.1e}")


def test_criterion_8_benign_space(capsys):
    rows = bddc_rows()
    viol = max(r["benign"] for r in rows)
    report(capsys, 8, viol <= 1e-10, f"{len(rows)} cases, max relative flux violation {viol:.1e}")


def test_criterion_9_multi_sinker(capsys):
    rows = run_preset("sinkers")
    wall = sum(r["wall"] for r in rows)
    ok = all(r["status"] == "ok" for r in rows) and wall < 900
    parts = []
    for ns in (1, 10):
        its = [r["it"] for r in rows if r["sinkers"] == ns]
        base = [r["it"] for r in rows if r["sinkers"] == ns and r["dr"] == 1.0][0]
        ok = ok and max(its) <= 2 * base
        parts.append(f"{ns} sinker(s): it {its} vs DR=1 count {base}")
    report(capsys, 9, ok, "; ".join(parts) + f"; runtime {wall:.0f} s")


def test_criterion_10_solver_comparison(capsys):
    rows = by_name(run_preset("solver-comparison"))
    bd, di, gm = (rows[f"cmp-k3-{s}"] for s in ("bddc", "direct", "gmres"))
    ok = bd["status"] == "ok" and di["status"] == "ok" and bd["T_sol"] < di["T_sol"] and \
        (gm["status"] == "NC" or gm["T_sol"] > bd["T_sol"])
    report(capsys, 10, ok, f"k=3 solve time: BDDC-CG {bd['T_sol']:.1f} s, direct "
                           f"{di['T_sol']:.1f} s, GMRES {gm['T_sol']:.1f} s ({gm['status']})")


@pytest.fixture(scope="module", autouse=True)
def _free_runs():
    yield
    _runs.clear()
