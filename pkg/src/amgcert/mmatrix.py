"""M-matrix relatives: sign tests, the A+ filter, and weighted graph forms.

A symmetric matrix is treated as an M-matrix here when it has a positive
diagonal, nonpositive off-diagonals and is positive *semi*-definite.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import (
    SparseMatrix,
    check_desk_scale,
    dense,
    gen_eig_extremes,
    orthonormal_kernel,
    sym_eig_dense,
)

OFFDIAG_TOL = 1e-14
PSD_TOL = 1e-12
ROWSUM_TOL = 1e-12
BOUND_SLACK = 1e-10
GRAPH_SEED = 0x5EED


@dataclass
class MMatrixVerdict:
    ok: bool
    violations: list = field(default_factory=list)
    min_eigenvalue: float | None = None

    def __bool__(self):
        return self.ok


def is_m_matrix(A, check_psd=True) -> MMatrixVerdict:
    """Check the three M-matrix conditions, collecting every witness.

    Violations are tuples ``("diagonal", i, a_ii)``,
    ``("positive_offdiag", (i, j), a_ij)`` with ``i < j``, or
    ``("indefinite", None, lambda_min)``.
    """
    M = A.to_scipy() if isinstance(A, SparseMatrix) else sp.csr_matrix(dense(A))
    violations = []
    d = M.diagonal()
    for i in np.flatnonzero(d <= 0):
        violations.append(("diagonal", int(i), float(d[i])))
    C = M.tocoo()
    bad = (C.row < C.col) & (C.data > OFFDIAG_TOL)
    for i, j, v in zip(C.row[bad], C.col[bad], C.data[bad]):
        violations.append(("positive_offdiag", (int(i), int(j)), float(v)))
    lam_min = None
    if check_psd and M.shape[0] > 0:
        check_desk_scale(M.shape[0], "semidefiniteness check")
        w = sym_eig_dense(M.toarray()).eigenvalues
        lam_min = float(w[0])
        if w[0] < -PSD_TOL * max(abs(w[-1]), abs(w[0])):
            violations.append(("indefinite", None, lam_min))
    return MMatrixVerdict(not violations, violations, lam_min)


def _check_zero_row_sums(M):
    sums = np.asarray(M.sum(axis=1)).ravel()
    scale = np.asarray(abs(M).sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums) > ROWSUM_TOL * np.maximum(scale, 1e-300))
    if bad.size:
        i = bad[0]
        raise ValueError(
            f"row {i} has nonzero row sum {sums[i]:.3e}; A+ is defined here only "
            f"for zero-row-sum (Neumann) matrices"
        )


def build_a_plus(A: SparseMatrix, require_zero_row_sums=True) -> SparseMatrix:
    """Move positive off-diagonals onto the diagonal.

    For zero-row-sum input the diagonal is recomputed as the negated sum of
    the remaining off-diagonals, so row sums stay zero and the map is
    idempotent. With ``require_zero_row_sums=False`` the diagonal is
    ``a_ii + sum of positive a_ij``, which also leaves M-matrices unchanged.
    """
    M = A.to_scipy().tocsr()
    if M.shape[0] != M.shape[1] or (M != M.T).nnz:
        raise ValueError("A+ needs a symmetric matrix")
    n = M.shape[0]
    if require_zero_row_sums:
        _check_zero_row_sums(M)
    C = M.tocoo()
    off = C.row != C.col
    rows, cols, vals = C.row[off], C.col[off], C.data[off]
    neg = vals < 0
    O = sp.coo_matrix((vals[neg], (rows[neg], cols[neg])), shape=(n, n)).tocsr()
    O.sort_indices()
    if require_zero_row_sums:
        diag = np.zeros(n)
        for i in range(n):
            acc = 0.0
            for v in O.data[O.indptr[i]:O.indptr[i + 1]]:
                acc = acc + v
            diag[i] = -acc
    else:
        pos = ~neg
        extra = np.zeros(n)
        np.add.at(extra, rows[pos], vals[pos])
        diag = M.diagonal() + extra
    return SparseMatrix.from_scipy(O + sp.diags(diag), symmetric=True)


def m_matrix_relative(A: SparseMatrix) -> SparseMatrix:
    """A+ for zero-row-sum input, the diagonal-compensated filter otherwise."""
    M = A.to_scipy()
    sums = np.asarray(M.sum(axis=1)).ravel()
    scale = np.asarray(abs(M).sum(axis=1)).ravel()
    zero = np.all(np.abs(sums) <= ROWSUM_TOL * np.maximum(scale, 1e-300))
    return build_a_plus(A, require_zero_row_sums=bool(zero))


class GraphForm:
    """Weighted graph Laplacian form b(u,v) = sum_e w_e (delta_e u)(delta_e v).

    Edges are canonicalized to ``i < j`` with duplicate weights summed and
    zero weights dropped. Construction verifies the form is PSD with kernel
    exactly the constants unless ``check=False``.
    """

    def __init__(self, k, edges, check=True):
        acc = {}
        for i, j, w in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < k and 0 <= j < k):
                raise ValueError(f"edge ({i}, {j}) outside {k} vertices")
            key = (min(i, j), max(i, j))
            acc[key] = acc.get(key, 0.0) + float(w)
        self.k = int(k)
        self.edges = [(i, j, w) for (i, j), w in sorted(acc.items()) if w != 0.0]
        if check:
            w = sym_eig_dense(self.matrix()).eigenvalues
            top = max(abs(w[-1]), 1e-300)
            if w[0] < -PSD_TOL * top or (self.k > 1 and w[1] <= PSD_TOL * top):
                raise ValueError(
                    f"form is not PSD with kernel span(1): eigenvalues {w[:2]}"
                )

    @staticmethod
    def _laplacian(k, edges):
        L = np.zeros((k, k))
        for i, j, w in edges:
            L[i, i] += w
            L[j, j] += w
            L[i, j] -= w
            L[j, i] -= w
        return L

    def matrix(self) -> np.ndarray:
        return self._laplacian(self.k, self.edges)

    def plus_matrix(self) -> np.ndarray:
        return self._laplacian(self.k, [e for e in self.edges if e[2] > 0])

    def minus_matrix(self) -> np.ndarray:
        return self._laplacian(self.k, [(i, j, -w) for i, j, w in self.edges if w <= 0])

    def energy(self, u):
        return sum(w * (u[i] - u[j]) ** 2 for i, j, w in self.edges)


@dataclass
class PositivitySplit:
    positive_edges: list
    negative_edges: list
    omega_minus: float
    lambda_b: float
    ck: int
    positive_connected: bool


def _connected(k, edges):
    if k <= 1:
        return True
    if not edges:
        return False
    i = [e[0] for e in edges]
    j = [e[1] for e in edges]
    G = sp.coo_matrix((np.ones(len(i)), (i, j)), shape=(k, k))
    return sp.csgraph.connected_components(G, directed=False)[0] == 1


def split_form(g: GraphForm) -> PositivitySplit:
    pos = [e for e in g.edges if e[2] > 0]
    neg = [e for e in g.edges if e[2] <= 0]
    omega_minus = max((abs(e[2]) for e in neg), default=0.0)
    lam = sym_eig_dense(g.matrix()).eigenvalues
    lambda_b = float(lam[1]) if g.k > 1 else float("inf")
    return PositivitySplit(pos, neg, omega_minus, lambda_b, 2 * (g.k - 1), _connected(g.k, pos))


@dataclass
class MMRelReport:
    k: int
    bound: float
    form_lower: float
    form_upper: float
    diag_lower: float
    diag_upper: float
    verdict: bool


def verify_mmrel_bounds(g: GraphForm) -> MMRelReport:
    """Sharp constants of b <= b+ <= (1 + c(k) w_- / lambda_b) b and the diagonal analogue."""
    s = split_form(g)
    bound = 1.0 + s.ck * s.omega_minus / s.lambda_b
    B, Bp = g.matrix(), g.plus_matrix()
    ones = np.ones(g.k)
    lo, hi = gen_eig_extremes(Bp, B, kernel=ones) if g.k > 1 else (1.0, 1.0)
    ratio = np.diag(Bp) / np.diag(B)
    slack = BOUND_SLACK * max(1.0, bound)
    ok = (
        lo >= 1.0 - slack and hi <= bound + slack
        and ratio.min() >= 1.0 - slack and ratio.max() <= bound + slack
    )
    return MMRelReport(g.k, bound, lo, hi, float(ratio.min()), float(ratio.max()), bool(ok))


def random_psd_form(k, rng, edge_prob=0.35, n_negative=None) -> GraphForm:
    """Random connected mixed-sign form, PSD with kernel span(1).

    A positive-weight connected graph is built first; negative edges on
    non-adjacent pairs are then scaled up by bisection until the second
    eigenvalue is 10% of the positive-only value.
    """
    perm = rng.permutation(k)
    pos = {}
    for idx in range(1, k):
        a, b = perm[idx], perm[rng.integers(idx)]
        pos[(min(a, b), max(a, b))] = rng.uniform(0.5, 2.0)
    # keep one non-tree pair free so at least one negative edge fits (k >= 3)
    nontree = [(i, j) for i in range(k) for j in range(i + 1, k) if (i, j) not in pos]
    reserved = nontree[rng.integers(len(nontree))] if nontree else None
    for i, j in nontree:
        if (i, j) != reserved and rng.random() < edge_prob:
            pos[(i, j)] = rng.uniform(0.5, 2.0)
    free = [(i, j) for i in range(k) for j in range(i + 1, k) if (i, j) not in pos]
    if n_negative is None:
        n_negative = int(rng.integers(1, max(2, len(free) // 2 + 1))) if free else 0
    n_negative = min(n_negative, len(free))
    picks = [free[t] for t in rng.choice(len(free), n_negative, replace=False)] if n_negative else []
    neg = {e: rng.uniform(0.5, 1.5) for e in picks}

    Lp = GraphForm._laplacian(k, [(i, j, w) for (i, j), w in pos.items()])
    Lm = GraphForm._laplacian(k, [(i, j, w) for (i, j), w in neg.items()])
    lam_plus = np.linalg.eigvalsh(Lp)[1]
    target = 0.1 * lam_plus

    def lam2(s):
        return np.linalg.eigvalsh(Lp - s * Lm)[1]

    scale = 0.0
    if neg:
        lo, hi = 0.0, 1.0
        while lam2(hi) > target:
            hi *= 2.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if lam2(mid) >= target:
                lo = mid
            else:
                hi = mid
        scale = lo
    edges = [(i, j, w) for (i, j), w in pos.items()]
    edges += [(i, j, -scale * w) for (i, j), w in neg.items()]
    return GraphForm(k, edges)


def seeded_forms(n_trials=50, k_max=8, seed=GRAPH_SEED):
    """Independent, per-trial seeded random forms with 3 <= k <= k_max."""
    for trial in range(n_trials):
        rng = np.random.default_rng([seed, trial])
        k = int(rng.integers(3, k_max + 1))
        yield random_psd_form(k, rng)


@dataclass
class RelativeCheck:
    form_const: float
    diag_const: float
    verdict: bool


def _kernel_of(M, rel=1e-10):
    w, V = sym_eig_dense(M)
    top = max(abs(w[-1]), abs(w[0]), 1e-300)
    return V[:, np.abs(w) <= rel * top]


def relative_check(A, AM) -> RelativeCheck:
    """Measured constants of (v,v)_AM <= c (v,v)_A and D <= c' D_M."""
    Ad, Md = dense(A), dense(AM)
    if Ad.shape != Md.shape:
        raise ValueError(f"shape mismatch {Ad.shape} vs {Md.shape}")
    check_desk_scale(Ad.shape[0], "relative_check")
    KA, KM = _kernel_of(Ad), _kernel_of(Md)
    n = Ad.shape[0]
    if KM.shape[1]:
        QA = orthonormal_kernel(KA, n) if KA.shape[1] else np.zeros((n, 0))
        leak = KM - QA @ (QA.T @ KM)
        if np.linalg.norm(leak) > 1e-8:
            raise ValueError(
                "kernel of the M-matrix candidate is not contained in the kernel of A "
                f"(dim {KM.shape[1]} vs {KA.shape[1]})"
            )
    if KA.shape[1] > KM.shape[1]:
        form_const = float("inf")
    else:
        form_const = gen_eig_extremes(Md, Ad, kernel=KA if KA.shape[1] else None)[1]
    diag_const = float(np.max(np.diag(Ad) / np.diag(Md)))
    ok = np.isfinite(form_const) and np.isfinite(diag_const) and bool(is_m_matrix(Md))
    return RelativeCheck(form_const, diag_const, bool(ok))
