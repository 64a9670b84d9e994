"""Fill-reducing ordering and sparse LU for Stokes saddle-point blocks.

Velocity unknowns are ordered by geometric nested dissection; each pressure
is placed right after the last velocity unknown it couples to and extra
multiplier rows go last.  With this order the elimination is essentially
symmetric (pressure pivots are Schur complements ``-b A^{-1} b^T``), so
SuperLU can keep its natural column order with a small pivot threshold.
"""
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

LEAF_SIZE = 32
# small matrices this dense are factorized with dense LAPACK LU
DENSE_MAX_N = 4000
DENSE_MIN_FILL = 0.05


def nested_dissection(graph, coords, leaf=LEAF_SIZE, n_cuts=9):
    """Permutation of the vertices of a symmetric graph.

    Each level tries cut planes near the median along the two longest box
    axes and keeps the one with the smallest vertex separator (weighted by
    imbalance).  Separators are numbered after both halves.
    """
    G = sp.csr_matrix(graph, dtype=float)
    G = (abs(G) + abs(G).T).tocsr()
    X = np.asarray(coords, dtype=float)

    def split(idx):
        x = X[idx]
        ext = x.max(0) - x.min(0)
        sub = G[idx][:, idx].tocoo()
        ei, ej = sub.row, sub.col
        best = None
        for ax in np.argsort(-ext)[:2]:
            if ext[ax] <= 0:
                continue
            cuts = np.unique(np.quantile(x[:, ax], np.linspace(0.3, 0.7, n_cuts)))
            for t in cuts:
                left = x[:, ax] <= t + 1e-12 * ext[ax]
                if left.all() or not left.any():
                    continue
                for side in (left, ~left):
                    cut = side[ei] & ~side[ej]
                    sep = np.unique(ei[cut])
                    a = side.sum() - len(sep)
                    b = len(idx) - side.sum()
                    if min(a, b) == 0:
                        continue
                    score = len(sep) * (1.0 + abs(a - b) / len(idx))
                    if best is None or score < best[0]:
                        best = (score, side, sep)
        return best

    out = []
    # explicit stack of (indices, emit); emit marks a finished separator
    stack = [(np.arange(G.shape[0]), False)]
    while stack:
        idx, emit = stack.pop()
        if emit or len(idx) <= leaf:
            out.append(idx)
            continue
        best = split(idx)
        if best is None:
            out.append(idx)
            continue
        _, side, sep = best
        mask = np.zeros(len(idx), dtype=bool)
        mask[sep] = True
        # popped in reverse: first half, second half, separator
        stack.append((idx[mask], True))
        stack.append((idx[~side], False))
        stack.append((idx[side & ~mask], False))
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def saddle_order(A, B, coords, n_extra=0, leaf=LEAF_SIZE):
    """Order for ``[[A, B^T, *], [B, 0, *], [*, *, 0]]`` with ``n_extra`` trailing rows."""
    nv = A.shape[0]
    npr = B.shape[0]
    rank = np.empty(nv)
    rank[nested_dissection(A, coords, leaf)] = np.arange(nv)
    B = sp.csr_matrix(B)
    B.eliminate_zeros()
    key = np.full(npr, float(nv))
    nz = np.diff(B.indptr) > 0
    if nz.any():
        starts = B.indptr[:-1][nz]
        key[nz] = np.maximum.reduceat(rank[B.indices], starts)
    keys = np.concatenate([rank, key + 0.5, np.full(n_extra, nv + 1.0)])
    return np.argsort(keys, kind="stable")


class SaddleLU:
    """Sparse LU of a saddle matrix in the order given by ``saddle_order``.

    ``M`` has velocity rows ``[0, nv)``, then ``B.shape[0]`` pressure rows,
    then any extra rows.  ``solve`` accepts vectors or column blocks.
    Small, nearly dense matrices (few cells of high degree) use a dense LU
    with partial pivoting in the original order instead.
    """

    def __init__(self, M, nv, coords, pivot_threshold=1e-2):
        M = sp.csc_matrix(M)
        n = M.shape[0]
        self.shape = M.shape
        self.dense = 0 < n <= DENSE_MAX_N and M.nnz >= DENSE_MIN_FILL * n * n
        if self.dense:
            self.perm = np.arange(n)
            self.lu = sla.lu_factor(M.toarray(), check_finite=False)
            return
        A = M[:nv, :nv]
        n_p = n - nv
        # trailing rows without velocity coupling (multipliers) are extras
        Bfull = M[nv:, :nv].tocsr()
        n_extra = 0
        while n_extra < n_p and Bfull[n_p - 1 - n_extra].nnz == 0:
            n_extra += 1
        B = Bfull[:n_p - n_extra]
        self.perm = saddle_order(A, B, coords, n_extra)
        Mp = M[self.perm][:, self.perm].tocsc()
        self.lu = spla.splu(Mp, permc_spec="NATURAL", diag_pivot_thresh=pivot_threshold)

    @property
    def nnz(self):
        if self.dense:
            return self.lu[0].size
        return self.lu.L.nnz + self.lu.U.nnz

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self.dense:
            return sla.lu_solve(self.lu, b, check_finite=False)
        x = np.empty_like(b)
        x[self.perm] = self.lu.solve(np.ascontiguousarray(b[self.perm]))
        return x
