"""Patch test on the three mesh families: cubes, truncated octahedra and CVT.

Run with ``python3 demos/polyhedral_meshes.py``.
"""
from vembddc.assembly import assemble, compute_errors, solve_direct
from vembddc.bench.problems import polynomial_solution
from vembddc.mesh import generate_mesh


def main(k=2):
    sol = polynomial_solution(k, seed=1)
    for kind, n in (("cube", 2), ("octa", 2), ("cvt", 12)):
        mesh = generate_mesh(kind, n)
        sysm = assemble(sol.problem(mesh, k))
        u, p = solve_direct(sysm)
        err = compute_errors(sysm, u, p, sol.u, sol.grad, sol.p)
        faces = [len(c) for c in mesh.cells]
        print(f"{kind:5s} {mesh.n_cells:3d} cells, {min(faces)}-{max(faces)} faces per cell: "
              f"|u-u_h|_1 = {err['h1_velocity']:.2e}, "
              f"|p-p_h| = {err['l2_pressure']:.2e}")


if __name__ == "__main__":
    main()
