"""Krylov solvers: preconditioned CG with Lanczos eigenvalue estimates and
restarted GMRES for the full saddle-point system."""
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass
class KrylovResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residuals: list = field(default_factory=list)
    lambda_min: float = np.nan
    lambda_max: float = np.nan
    time: float = 0.0
    reason: str = ""

    @property
    def condition(self):
        if not np.isfinite(self.lambda_min) or self.lambda_min <= 0:
            return np.inf
        return self.lambda_max / self.lambda_min


def lanczos_extremes(alphas, betas):
    """Extreme eigenvalues of the CG Lanczos tridiagonal matrix.

    ``alphas`` and ``betas`` are the CG step lengths and update factors.
    """
    m = len(alphas)
    if m == 0:
        return np.nan, np.nan
    d = np.zeros(m)
    e = np.zeros(max(m - 1, 0))
    for j in range(m):
        d[j] = 1.0 / alphas[j]
        if j > 0:
            d[j] += betas[j - 1] / alphas[j - 1]
        if j < m - 1:
            e[j] = np.sqrt(max(betas[j], 0.0)) / alphas[j]
    ev = sla.eigvalsh_tridiagonal(d, e) if m > 1 else d
    return float(ev.min()), float(ev.max())


def pcg(A, b, M=None, x0=None, tol=1e-8, maxiter=2000, callback=None):
    """Preconditioned conjugate gradients.

    Stops when ``||r|| <= tol ||b||``.  ``A`` and ``M`` are callables (or
    matrices).  The Lanczos coefficients give estimates of the extreme
    eigenvalues of ``M A``.
    """
    t0 = time.perf_counter()
    Aop = A if callable(A) else (lambda v: A @ v)
    Mop = (lambda v: v) if M is None else (M if callable(M) else (lambda v: M @ v))
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - Aop(x) if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    res = [np.linalg.norm(r)]
    if bnorm == 0.0:
        return KrylovResult(np.zeros_like(b), True, 0, res, time=time.perf_counter() - t0,
                            reason="zero rhs")
    alphas, betas = [], []
    z = Mop(r)
    p = z.copy()
    rz = r @ z
    converged = res[0] <= tol * bnorm
    reason = "converged" if converged else ""
    it = 0
    while not converged and it < maxiter:
        q = Aop(p)
        pq = p @ q
        if pq <= 0 or rz <= 0:
            reason = "breakdown (indefinite operator or preconditioner)"
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        it += 1
        alphas.append(alpha)
        res.append(np.linalg.norm(r))
        if callback is not None:
            callback(it, x, res[-1])
        if res[-1] <= tol * bnorm:
            converged = True
            reason = "converged"
            break
        z = Mop(r)
        rz_new = r @ z
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    if not converged and not reason:
        reason = "maximum iterations"
    lmin, lmax = lanczos_extremes(alphas, betas[:max(len(alphas) - 1, 0)])
    return KrylovResult(x, bool(converged), it, res, lmin, lmax, time.perf_counter() - t0, reason)


def gmres(A, b, M=None, tol=1e-8, restart=200, maxiter=2000, time_limit=None):
    """Right-preconditioned restarted GMRES; ``||r|| <= tol ||b||``.

    ``maxiter`` counts inner iterations.  ``time_limit`` (seconds) aborts a
    run that is hopeless compared with another solver.
    """
    t0 = time.perf_counter()
    Aop = A if callable(A) else (lambda v: A @ v)
    Mop = (lambda v: v) if M is None else (M if callable(M) else (lambda v: M @ v))
    n = len(b)
    x = np.zeros(n)
    bnorm = np.linalg.norm(b)
    res = [bnorm]
    if bnorm == 0.0:
        return KrylovResult(x, True, 0, res, reason="zero rhs")
    it = 0
    reason = "maximum iterations"
    converged = False
    r = b.copy()
    while it < maxiter and not converged:
        beta = np.linalg.norm(r)
        m = min(restart, maxiter - it)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        V[0] = r / beta
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        j_done = 0
        for j in range(m):
            Z[j] = Mop(V[j])
            w = Aop(Z[j])
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            # one reorthogonalization pass
            for i in range(j + 1):
                c = w @ V[i]
                H[i, j] += c
                w -= c * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] > 0:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            den = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = (1.0, 0.0) if den == 0 else (H[j, j] / den, H[j + 1, j] / den)
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            it += 1
            j_done = j + 1
            res.append(abs(g[j + 1]))
            if res[-1] <= tol * bnorm:
                converged = True
                break
            if time_limit is not None and time.perf_counter() - t0 > time_limit:
                reason = "time limit"
                break
        y = sla.solve_triangular(H[:j_done, :j_done], g[:j_done])
        x += Z[:j_done].T @ y
        r = b - Aop(x)
        if converged:
            # the recursion can be optimistic; confirm with the true residual
            converged = np.linalg.norm(r) <= tol * bnorm * 10
            if converged:
                reason = "converged"
        if reason == "time limit":
            break
    return KrylovResult(x, bool(converged), it, res, time=time.perf_counter() - t0, reason=reason)


class BlockSchurPreconditioner:
    """Block-diagonal preconditioner ``diag(D_A^{-1}, S^{-1})`` for
    ``[[A, B^T], [B, 0]]`` with ``D_A = diag(A)`` and ``S = B D_A^{-1} B^T``.

    ``S`` is factorized with a sparse LU, slightly shifted when the system
    carries a mean constraint.
    """

    def __init__(self, A, B, mean=None):
        self.n = A.shape[0]
        self.dinv = 1.0 / A.diagonal()
        S = (B @ sp.diags(self.dinv) @ B.T).tocsc()
        if mean is not None:
            # B D^{-1} B^T is singular on the constant pressure
            S = S + 1e-8 * abs(S.diagonal()).mean() * sp.identity(S.shape[0], format="csc")
        self.lu = spla.splu(sp.csc_matrix(S))
        self.np = B.shape[0]

    def __call__(self, r):
        out = np.empty_like(r)
        out[:self.n] = self.dinv * r[:self.n]
        out[self.n:self.n + self.np] = self.lu.solve(r[self.n:self.n + self.np])
        if len(r) > self.n + self.np:
            out[self.n + self.np:] = r[self.n + self.np:]
        return out


def solve_interface(decomp, precond, tol=1e-8, maxiter=2000):
    """PCG on the interface problem ``S x = g``.

    When constant pressures are present the start ``x0 = M^{-1}(0, g_0)``
    satisfies the flux equations exactly, so every later search direction
    stays in the benign (zero net flux) subspace where ``M^{-1} S`` is SPD.
    """
    g = decomp.rhs()
    x0 = None
    if decomp.n_p0:
        e = np.zeros_like(g)
        e[decomp.n_gamma:] = g[decomp.n_gamma:]
        x0 = precond(e)
    return pcg(decomp.apply, g, precond, x0=x0, tol=tol, maxiter=maxiter), g
