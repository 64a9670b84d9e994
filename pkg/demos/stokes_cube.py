"""Solve the manufactured Stokes problem on a cube mesh with BDDC-CG.

Run with ``python3 demos/stokes_cube.py [n] [k]``.
"""
import sys

from vembddc.adaptive import AdaptiveBDDC
from vembddc.assembly import assemble, compute_errors
from vembddc.bddc import BDDC
from vembddc.bench.problems import smooth_problem
from vembddc.decomp import Decomposition, partition_box
from vembddc.krylov import solve_interface
from vembddc.mesh import hex_mesh


def main(n=8, k=2):
    mesh = hex_mesh(n)
    prob, sol = smooth_problem(mesh, k)
    sysm = assemble(prob)
    d = Decomposition(sysm, partition_box(mesh, (2, 2, 2)))
    print(f"{mesh.n_cells} cells, {sysm.n_free} free velocity DOFs, {d.n_gamma} interface DOFs")
    for name, pre in (("minimal", BDDC(d, scaling="deluxe")), ("adaptive", AdaptiveBDDC(d, 2.0))):
        res, _ = solve_interface(d, pre)
        u, p = d.recover(res.x)
        err = compute_errors(sysm, sysm.full_velocity(u), p, sol.u, sol.grad, sol.p)
        print(f"{name:9s} N_Pi={pre.n_primal:4d} it={res.iterations:3d} kappa={res.condition:7.3f} "
              f"lambda_min={res.lambda_min:.4f} |u-u_h|_1={err['h1_velocity']:.3e} "
              f"|p-p_h|={err['l2_pressure']:.3e}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
