"""Model problems: manufactured smooth solutions and the multi-sinker test."""
import numpy as np
import sympy as sym

from ..assembly import StokesProblem

X, Y, Z = sym.symbols("x y z", real=True)
_VARS = (X, Y, Z)


class ManufacturedSolution:
    """Exact Stokes solution built from symbolic velocity and pressure.

    The velocity should be divergence free (e.g. a curl); the body force and
    traction are derived for ``-div(nu eps(u)) - grad p = f`` with constant
    ``nu``.
    """

    def __init__(self, u_expr, p_expr, nu=1.0):
        self.nu = float(nu)
        u = sym.Matrix(u_expr)
        p = sym.sympify(p_expr)
        grad = u.jacobian(_VARS)
        eps = (grad + grad.T) / 2
        div_eps = sym.Matrix([sum(sym.diff(eps[i, j], _VARS[j]) for j in range(3)) for i in range(3)])
        gp = sym.Matrix([sym.diff(p, v) for v in _VARS])
        f = -self.nu * div_eps - gp
        self.divergence = sym.simplify(sum(grad[i, i] for i in range(3)))
        self._u = sym.lambdify(_VARS, list(u), "numpy")
        self._g = sym.lambdify(_VARS, list(grad), "numpy")
        self._p = sym.lambdify(_VARS, p, "numpy")
        self._f = sym.lambdify(_VARS, list(f), "numpy")
        self._eps = sym.lambdify(_VARS, list(eps), "numpy")

    @staticmethod
    def _stack(vals, n):
        return np.column_stack([np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in vals])

    def u(self, x):
        return self._stack(self._u(*x.T), len(x))

    def grad(self, x):
        return self._stack(self._g(*x.T), len(x)).reshape(-1, 3, 3)

    def p(self, x):
        return np.broadcast_to(np.asarray(self._p(*x.T), dtype=float), (len(x),)).copy()

    def f(self, x):
        return self._stack(self._f(*x.T), len(x))

    def traction(self, x, n):
        eps = self._stack(self._eps(*x.T), len(x)).reshape(-1, 3, 3)
        return self.nu * np.einsum("qij,qj->qi", eps, n) + self.p(x)[:, None] * n

    def problem(self, mesh, k, neumann=None, **kw):
        return StokesProblem(mesh, k, nu=self.nu, f=self.f, dirichlet=self.u,
                             traction=self.traction, neumann=neumann, **kw)


def curl(phi):
    phi = sym.Matrix(phi)
    return [sym.diff(phi[2], Y) - sym.diff(phi[1], Z),
            sym.diff(phi[0], Z) - sym.diff(phi[2], X),
            sym.diff(phi[1], X) - sym.diff(phi[0], Y)]


# RMS of grad p equals RMS of the viscous force div(eps(u)) for nu = 1
PRESSURE_AMPLITUDE = 72


def smooth_solution(nu=1.0, p_amplitude=PRESSURE_AMPLITUDE):
    """Smooth benchmark: ``u = curl(Phi)`` with ``Phi_i = g_i(x) s(y) s(z)``.

    ``s = sin(pi t)**2`` makes u vanish on the faces y, z in {0, 1}, which are
    Dirichlet; the faces x in {0, 1} carry the exact traction.  The pressure
    ``p_amplitude * cos(pi x) sin(pi y) (z - 1/2)`` has zero mean; its
    amplitude balances the pressure gradient against the viscous force, so
    neither part of the load is negligible.
    """
    s = lambda t: sym.sin(sym.pi * t) ** 2  # noqa: E731
    phi = [sym.sin(sym.pi * X) * s(Y) * s(Z),
           sym.cos(sym.pi * X) * s(Y) * s(Z),
           (X ** 2 - X / 2) * s(Y) * s(Z)]
    p = p_amplitude * sym.cos(sym.pi * X) * sym.sin(sym.pi * Y) * (Z - sym.Rational(1, 2))
    return ManufacturedSolution(curl(phi), p, nu)


def x_faces(tol=1e-12):
    """Predicate selecting boundary faces on the planes x = 0 and x = 1."""
    def pred(centroid, normal):
        return abs(abs(normal[0]) - 1.0) < 1e-9 and (centroid[0] < tol or centroid[0] > 1 - tol)
    return pred


def smooth_problem(mesh, k, nu=1.0, **kw):
    sol = smooth_solution(nu)
    return sol.problem(mesh, k, neumann=x_faces(), **kw), sol


def polynomial_solution(k, seed=0, nu=1.0):
    """Random exact solution with velocity in [P_k]^3 (div free), pressure in P_{k-1}."""
    rng = np.random.default_rng(seed)

    def rand_poly(deg):
        terms = 0
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                for c in range(deg + 1 - a - b):
                    terms += sym.Rational(int(rng.integers(-9, 10)), 7) * X ** a * Y ** b * Z ** c
        return terms

    phi = [rand_poly(k + 1) for _ in range(3)]
    return ManufacturedSolution(curl(phi), rand_poly(k - 1), nu)


# ---------------------------------------------------------------------------
# multi-sinker


def sinker_centers(n, seed=0):
    rng = np.random.default_rng(seed)
    return 0.15 + 0.7 * rng.random((n, 3))


def sinker_viscosity(centers, dr, radius=0.1, omega=0.05, nu_min=1.0):
    """``nu = nu_min + (nu_max - nu_min) (1 - prod_i (1 - chi_i))``.

    ``chi_i`` equals one inside the sinker core of radius ``radius`` and
    decays like a Gaussian of width ``omega`` outside.
    """
    centers = np.atleast_2d(centers)
    nu_max = nu_min * dr

    def chi_all(x):
        prod = np.ones(len(x))
        for c in centers:
            d = np.maximum(np.linalg.norm(x - c, axis=1) - radius, 0.0)
            prod *= 1.0 - np.exp(-d ** 2 / (2 * omega ** 2))
        return 1.0 - prod

    def nu(x):
        return nu_min + (nu_max - nu_min) * chi_all(x)

    return nu, chi_all


def sinker_problem(mesh, k, dr, n_sinkers, seed=0, radius=0.1, omega=0.05, **kw):
    """Homogeneous Dirichlet problem driven by a downward force inside sinkers."""
    centers = sinker_centers(n_sinkers, seed)
    nu, chi = sinker_viscosity(centers, dr, radius, omega)

    def f(x):
        out = np.zeros((len(x), 3))
        out[:, 2] = -chi(x)
        return out

    return StokesProblem(mesh, k, nu=nu, f=f, name=f"sinker{n_sinkers}_dr{dr:g}", **kw)
