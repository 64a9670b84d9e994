"""Benchmark runner: cases, presets and CSV output."""
import csv
import math
import time
import traceback

import numpy as np

from ..adaptive import AdaptiveBDDC
from ..assembly import assemble, compute_errors, export_matrix, solve_direct
from ..bddc import BDDC
from ..decomp import Decomposition, partition_box
from ..krylov import BlockSchurPreconditioner, gmres, solve_interface
from ..mesh import generate_mesh
from ..vem_space import count_dofs
from .config import CaseConfig
from .problems import sinker_problem, smooth_problem

COLUMNS = ["name", "mesh", "nEl", "k", "threads", "nu_tol", "N_Pi", "it", "kappa", "lambda_min",
           "T_ass", "T_sol", "S_p", "h1_velocity", "l2_velocity", "l2_pressure", "solver",
           "subdomains", "coarse", "scaling", "problem", "sinkers", "dr", "n_dofs", "n_gamma",
           "converged", "status"]

CVT_LLOYD_STEPS = 5


class Runner:
    """Runs cases, reusing meshes, assembled systems and decompositions."""

    def __init__(self, keep=False, log=None):
        self.keep = keep
        self.log = log
        self._meshes = {}
        self._systems = {}
        self._decomps = {}
        self.objects = {}

    def _say(self, msg):
        if self.log is not None:
            self.log(msg)

    def mesh(self, cfg):
        key = (cfg.mesh, cfg.n, cfg.mesh_seed)
        if key not in self._meshes:
            kw = {}
            if cfg.mesh == "cvt":
                kw = dict(seed=cfg.mesh_seed, lloyd_steps=CVT_LLOYD_STEPS)
            self._meshes[key] = generate_mesh(cfg.mesh, cfg.n, **kw)
        return self._meshes[key]

    def system(self, cfg):
        key = (cfg.mesh, cfg.n, cfg.mesh_seed, cfg.k, cfg.problem, cfg.sinkers, cfg.dr, cfg.seed,
               cfg.nu, cfg.stab_sigma)
        if key not in self._systems:
            mesh = self.mesh(cfg)
            if cfg.problem == "manufactured":
                prob, sol = smooth_problem(mesh, cfg.k, nu=cfg.nu, stab_sigma=cfg.stab_sigma)
            else:
                prob = sinker_problem(mesh, cfg.k, cfg.dr, cfg.sinkers, seed=cfg.seed,
                                      stab_sigma=cfg.stab_sigma)
                sol = None
            t0 = time.perf_counter()
            sysm = assemble(prob)
            self._systems[key] = (sysm, sol, time.perf_counter() - t0)
        return self._systems[key]

    def decomposition(self, cfg, sysm):
        key = (id(sysm), cfg.grid(), cfg.threads)
        if key not in self._decomps:
            t0 = time.perf_counter()
            d = Decomposition(sysm, partition_box(sysm.problem.mesh, cfg.grid()), threads=cfg.threads)
            self._decomps[key] = (d, time.perf_counter() - t0)
        return self._decomps[key]

    def run(self, cfg):
        """One CSV row for ``cfg``; failures are recorded, not raised."""
        row = {c: "" for c in COLUMNS}
        row.update(name=cfg.name, mesh=cfg.mesh, k=cfg.k, threads=cfg.threads,
                   nu_tol=cfg.nu_tol if cfg.coarse == "adaptive" else math.inf,
                   solver=cfg.solver, subdomains=cfg.subdomains, coarse=cfg.coarse,
                   scaling=cfg.scaling, problem=cfg.problem,
                   sinkers=cfg.sinkers if cfg.problem == "sinker" else "",
                   dr=cfg.dr if cfg.problem == "sinker" else "", converged=False,
                   _group=_thread_group(cfg))
        try:
            self._run(cfg, row)
            row["status"] = "ok" if row["converged"] else "NC"
        except Exception as exc:  # recorded per case, the suite continues
            row["status"] = f"error: {type(exc).__name__}: {exc}"
            self._say(traceback.format_exc())
        self._say(format_row(row))
        return row

    def _run(self, cfg, row):
        mesh = self.mesh(cfg)
        row["nEl"] = mesh.n_cells
        sysm, sol, t_ass = self.system(cfg)
        row["T_ass"] = t_ass
        nv, npr = count_dofs(mesh, cfg.k)
        row["n_dofs"] = nv + npr
        if cfg.export_matrix:
            export_matrix(sysm, cfg.export_matrix)
        if cfg.solver == "direct":
            t0 = time.perf_counter()
            u, p = solve_direct(sysm)
            row["T_sol"] = time.perf_counter() - t0
            row["converged"] = True
            u_free = u[sysm.free]
        elif cfg.solver == "gmres":
            t0 = time.perf_counter()
            M = BlockSchurPreconditioner(sysm.A, sysm.B, sysm.mean)
            res = gmres(sysm.matrix().tocsr(), sysm.rhs(), M, tol=cfg.tol, restart=cfg.gmres_restart,
                        maxiter=cfg.maxit,
                        time_limit=None if math.isinf(cfg.time_limit) else cfg.time_limit)
            row["T_sol"] = time.perf_counter() - t0
            row["it"] = res.iterations
            row["converged"] = bool(res.converged)
            nf = sysm.n_free
            u_free = res.x[:nf]
            p = res.x[nf:nf + sysm.n_pressure]
            u = sysm.full_velocity(u_free)
        else:
            d, t_dec = self.decomposition(cfg, sysm)
            t0 = time.perf_counter()
            pre = make_preconditioner(cfg, d)
            res, g = solve_interface(d, pre, tol=cfg.tol, maxiter=cfg.maxit)
            u_free, p = d.recover(res.x)
            row["T_sol"] = t_dec + time.perf_counter() - t0
            row.update(N_Pi=pre.n_primal, it=res.iterations, kappa=res.condition,
                       lambda_min=res.lambda_min, converged=bool(res.converged), n_gamma=d.n_gamma)
            u = sysm.full_velocity(u_free)
            if self.keep:
                self.objects[cfg.name] = dict(decomp=d, pre=pre, result=res, system=sysm)
        if sol is not None and cfg.errors and row["converged"]:
            err = compute_errors(sysm, u, p, sol.u, sol.grad, sol.p)
            row.update(h1_velocity=err["h1_velocity"], l2_velocity=err["l2_velocity"],
                       l2_pressure=err["l2_pressure"])


def make_preconditioner(cfg, decomp):
    edge_deluxe = cfg.scaling == "deluxe" and cfg.edge_scaling == "deluxe"
    if cfg.coarse == "adaptive":
        return AdaptiveBDDC(decomp, cfg.nu_tol, convention=cfg.convention, scaling=cfg.scaling,
                            edge_deluxe=edge_deluxe)
    return BDDC(decomp, cfg.coarse, cfg.scaling, edge_deluxe=edge_deluxe)


def _thread_group(cfg):
    d = cfg.as_dict()
    for k in ("name", "threads", "export_matrix"):
        d.pop(k)
    return tuple(sorted(d.items()))


def add_speedups(rows):
    """S_p = T_sol(1 thread) / T_sol for cases differing only in threads."""
    base = {}
    for r in rows:
        if r["threads"] == 1 and r["T_sol"] != "":
            base[r["_group"]] = r["T_sol"]
    for r in rows:
        b = base.get(r["_group"])
        if b is not None and r["T_sol"] not in ("", 0):
            r["S_p"] = b / r["T_sol"]
    return rows


def run_suite(configs, keep=False, log=None, runner=None):
    runner = runner or Runner(keep=keep, log=log)
    rows = [runner.run(c) for c in configs]
    return add_speedups(rows), runner


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    return str(v)


def format_row(row):
    keys = ["name", "nEl", "k", "N_Pi", "it", "kappa", "lambda_min", "T_ass", "T_sol", "status"]
    return "  ".join(f"{k}={_cell(row[k])}" for k in keys)


def write_csv(rows, path_or_file, configs=None):
    """Write rows; the configs are echoed as leading ``#`` comment lines."""
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        if configs:
            for c in configs:
                fh.write("# " + "; ".join(c.to_text().splitlines()) + "\n")
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r[k]) for k in COLUMNS})
    finally:
        if own:
            fh.close()


# ---------------------------------------------------------------------------
# presets (desk-scale analogues of the five experiments)


def preset(name, quick=False):
    """Configs of a named preset.  ``quick`` shrinks meshes for smoke runs."""
    base = CaseConfig()
    out = []
    if name == "scaling":
        meshes = [("cube", 4 if quick else 8), ("octa", 2 if quick else 4),
                  ("cvt", 64 if quick else 256)]
        for mesh, n in meshes:
            for th in (1, 2, 4):
                out.append(base.with_(name=f"scaling-{mesh}{n}-t{th}", mesh=mesh, n=n,
                                      subdomains="2x2x2", coarse="adaptive", nu_tol=2.0,
                                      threads=th))
    elif name == "h-optimality":
        for n in ((2, 4, 8) if quick else (4, 8, 16)):
            for coarse, tol in (("minimal", math.inf), ("adaptive", 2.0)):
                out.append(base.with_(name=f"hopt-n{n}-{coarse}", n=n, subdomains="2x2x2",
                                      coarse=coarse, nu_tol=tol))
    elif name == "k-optimality":
        for k in ((2, 3) if quick else (2, 3, 4)):
            for coarse, tol in (("minimal", math.inf), ("adaptive", 2.0)):
                out.append(base.with_(name=f"kopt-k{k}-{coarse}", n=4 if quick else 8, k=k,
                                      subdomains="2x2x2" if quick else "4x4x2",
                                      coarse=coarse, nu_tol=tol, errors=False))
    elif name == "solver-comparison":
        n = 4 if quick else 8
        for k in (2, 3):
            common = dict(n=n, k=k, errors=False)
            out.append(base.with_(name=f"cmp-k{k}-bddc", subdomains="4x4x4" if not quick else "2x2x2",
                                  coarse="minimal", **common))
            out.append(base.with_(name=f"cmp-k{k}-direct", solver="direct", **common))
            out.append(base.with_(name=f"cmp-k{k}-gmres", solver="gmres", time_limit=120.0,
                                  **common))
    elif name == "sinkers":
        for ns in (1, 10):
            for dr in (1.0, 1e2, 1e4, 1e6):
                out.append(base.with_(name=f"sinker-n{ns}-dr{dr:g}", n=4 if quick else 8,
                                      problem="sinker", sinkers=ns, dr=dr, subdomains="2x2x2",
                                      coarse="adaptive", nu_tol=5.0, edge_scaling="deluxe",
                                      errors=False))
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    return out


PRESETS = ("scaling", "h-optimality", "k-optimality", "solver-comparison", "sinkers")
