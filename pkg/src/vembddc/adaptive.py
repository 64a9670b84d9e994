"""Adaptive primal constraints from local generalized eigenproblems.

For each macro face ``F`` shared by subdomains ``i`` and ``j`` we compare
``S~_i : S~_j`` with ``S_i : S_j`` on the dual coordinates of ``F``.  Here
``S_k`` is the transformed local Schur complement restricted to ``F_Delta``
and ``S~_k`` is its Schur complement after eliminating the rest of the
subdomain interface, and ``A : B = A (A + B)^{-1} B`` is the parallel sum.
Eigenvectors with small eigenvalues (modes that are cheap for the
neighbours but expensive on the face) become new primal constraints.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .bddc import BDDC, build_primal_space


def parallel_sum(A, B, tol=1e-13):
    """``A (A + B)^+ B`` symmetrized; both arguments symmetric semidefinite."""
    S = A + B
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    keep = w > tol * max(w.max(), 1e-300)
    Sp = (V[:, keep] / w[keep]) @ V[:, keep].T
    P = A @ Sp @ B
    return 0.5 * (P + P.T)


def _schur_pinv(S, elim, keep, tol=1e-12):
    """Schur complement of ``S`` onto ``keep`` eliminating ``elim``."""
    Skk = S[np.ix_(keep, keep)]
    if len(elim) == 0:
        return Skk
    See = S[np.ix_(elim, elim)]
    Sek = S[np.ix_(elim, keep)]
    See = 0.5 * (See + See.T)
    try:
        L = sla.cholesky(See, lower=True)
        # a nearly singular block goes to the pseudo-inverse below
        d = np.diag(L)
        if d.min() ** 2 <= tol * d.max() ** 2:
            raise np.linalg.LinAlgError
        Y = sla.solve_triangular(L, Sek, lower=True)
        R = Skk - Y.T @ Y
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(See)
        ok = w > tol * max(w.max(), 1e-300)
        X = (V[:, ok] / w[ok]) @ (V[:, ok].T @ Sek)
        R = Skk - Sek.T @ X
    return 0.5 * (R + R.T)


@dataclass
class FacePencil:
    class_id: int
    sharing: tuple
    eigenvalues: np.ndarray    # nu in (0, 1] for the pencil (S~:S~, S:S)
    selected: int


def face_pencil(pre, ci):
    """Matrices ``(S~_i:S~_j, S_i:S_j)`` on the dual coordinates of face class ci."""
    d = pre.decomp
    c, b = d.classes[ci], pre.bases[ci]
    tilde, full = [], []
    for i in c.sharing:
        s = d.subdomains[i]
        Tg = pre.local_transform(s)
        Sh = np.asarray(Tg.T @ (Tg.T @ pre.dense_schur(i)).T)
        o = pre._gamma_offsets(s)[ci]
        fd = o + b.dual
        rest = np.setdiff1d(np.arange(s.n_g), fd)
        full.append(0.5 * (Sh[np.ix_(fd, fd)] + Sh[np.ix_(fd, fd)].T))
        tilde.append(_schur_pinv(Sh, rest, fd))
    return parallel_sum(*tilde), parallel_sum(*full)


def solve_and_select(A, B, nu_tol, convention="standard"):
    """Generalized eigenpairs ``A psi = nu B psi`` and the selected modes.

    ``convention='standard'`` keeps ``nu < 1 / nu_tol``.  ``'reciprocal'``
    works with ``mu = 1 / nu`` (the pencil ``B psi = mu A psi``) and keeps
    ``mu > nu_tol``; on the same matrices both choose the same modes.
    Returns ``(eigenvalues in the chosen convention, selected vectors)``.
    """
    nu, psi = sla.eigh(A, B)
    nu = np.clip(nu, 0.0, None)
    sel = nu < 1.0 / nu_tol
    if convention == "reciprocal":
        with np.errstate(divide="ignore"):
            mu = 1.0 / nu
        return mu, psi[:, sel]
    if convention != "standard":
        raise ValueError(f"unknown eigen convention {convention!r}")
    return nu, psi[:, sel]


class AdaptiveBDDC(BDDC):
    """BDDC with face constraints enriched by the face eigenproblems.

    Starts from the minimal primal space with deluxe scaling, adds the
    selected eigen-constraints on each face and rebuilds the preconditioner.
    """

    def __init__(self, decomp, nu_tol=2.0, convention="standard", scaling="deluxe", base_mode="minimal",
                 edge_deluxe=False, local_solver="schur"):
        self.nu_tol = float(nu_tol)
        self.edge_deluxe = edge_deluxe
        self.local_solver = local_solver
        self.convention = convention
        base = BDDC(decomp, base_mode, scaling, edge_deluxe=edge_deluxe, solvers=False)
        extra = {}
        self.pencils = []
        for ci, c in enumerate(decomp.classes):
            if c.kind != "face" or len(c.sharing) != 2 or len(base.bases[ci].dual) == 0:
                continue
            A, B = face_pencil(base, ci)
            ev, psi = solve_and_select(A, B, self.nu_tol, convention)
            self.pencils.append(FacePencil(ci, c.sharing, ev, psi.shape[1]))
            if psi.shape[1] == 0:
                continue
            b = base.bases[ci]
            rows = np.zeros((psi.shape[1], c.size))
            rows[:, b.dual] = (B @ psi).T
            extra[ci] = rows
        primal = build_primal_space(decomp, base_mode, extra=extra)
        primal.mode = "adaptive"
        self.decomp = decomp
        self.scaling = scaling
        self.primal = primal
        self.mode = "adaptive"
        self._setup()

    @property
    def n_adaptive(self):
        return sum(p.selected for p in self.pencils)

    def info(self):
        out = super().info()
        out.update(nu_tol=self.nu_tol, adaptive_constraints=self.n_adaptive)
        return out
