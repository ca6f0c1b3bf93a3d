"""Strength of connection, MIS coarsening and overlapping subdomains."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import SparseMatrix

DEFAULT_THETA = 0.25
SCHEMES = ("direct", "standard")
STRENGTH_MODES = ("max", "min")


class CoverageError(ValueError):
    """Some fine point lies in no subdomain."""


def _offdiag_min(M):
    """Row minima over stored off-diagonal entries (np.inf for empty rows)."""
    M = M.tocoo()
    off = M.row != M.col
    mins = np.full(M.shape[0], np.inf)
    np.minimum.at(mins, M.row[off], M.data[off])
    return mins


def strength_function(A: SparseMatrix, i, j, mode="max"):
    """``a_ij / max(min_k a_ik, min_k a_jk)`` over stored off-diagonals.

    Rows without negative off-diagonals give strength 0. ``mode="min"``
    uses the smaller of the two row minima instead.
    """
    if i == j:
        raise ValueError("strength is defined for i != j only")
    M = A.to_scipy()
    mins = _offdiag_min(M)
    denom = max(mins[i], mins[j]) if mode == "max" else min(mins[i], mins[j])
    if not denom < 0:
        return 0.0
    return float(M[i, j]) / denom


@dataclass
class StrengthGraph:
    n: int
    theta: float
    rows: np.ndarray
    cols: np.ndarray
    strength: np.ndarray
    flagged: list = field(default_factory=list)

    def __post_init__(self):
        self._adj = None

    @property
    def pairs(self):
        """Strong pairs (i, j) with i < j."""
        keep = self.rows < self.cols
        return list(zip(self.rows[keep].tolist(), self.cols[keep].tolist()))

    def adjacency(self) -> sp.csr_matrix:
        if self._adj is None:
            data = np.ones(len(self.rows))
            adj = sp.csr_matrix((data, (self.rows, self.cols)), shape=(self.n, self.n))
            adj.sort_indices()
            self._adj = adj
        return self._adj

    def neighbors(self, i):
        adj = self.adjacency()
        return adj.indices[adj.indptr[i]:adj.indptr[i + 1]]

    def degrees(self):
        return np.diff(self.adjacency().indptr)


def build_strength(A: SparseMatrix, theta=DEFAULT_THETA, mode="max"):
    """Strong pairs ``s_c(i,j) > theta`` and the strong-edge operator ``A_S``.

    ``mode="max"`` divides by the row minimum closer to zero (an edge is
    strong if it is strong for either row). ``mode="min"`` divides by the
    more negative row minimum, so the edge must be strong for both rows.

    ``A_S`` keeps the strong off-diagonals of ``A``. Its diagonal is the
    negated strong off-diagonal sum plus the row sum of ``A``, so zero row
    sums carry over exactly and Dirichlet rows keep their excess.
    """
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if mode not in STRENGTH_MODES:
        raise ValueError(f"strength mode must be one of {STRENGTH_MODES}, got {mode!r}")
    M = A.to_scipy().tocoo()
    n = A.n_rows
    mins = _offdiag_min(M)
    flagged = [int(i) for i in np.flatnonzero(~(mins < 0))]

    off = M.row != M.col
    r, c, v = M.row[off], M.col[off], M.data[off]
    pick = np.maximum if mode == "max" else np.minimum
    denom = pick(mins[r], mins[c])
    s = np.zeros(len(v))
    ok = denom < 0
    s[ok] = v[ok] / denom[ok]
    strong = s > theta
    S = StrengthGraph(n, float(theta), r[strong].astype(np.int64), c[strong].astype(np.int64),
                      s[strong], flagged)

    excess = np.asarray(A.to_scipy().sum(axis=1)).ravel()
    excess[np.abs(excess) <= 1e-12 * max(np.abs(M.data).max(initial=0.0), 1.0)] = 0.0
    offd = sp.csr_matrix((v[strong], (r[strong], c[strong])), shape=(n, n))
    diag = -np.asarray(offd.sum(axis=1)).ravel() + excess
    AS = (offd + sp.diags(diag)).tocsr()
    AS.eliminate_zeros()
    return S, SparseMatrix.from_scipy(AS, symmetric=True)


@dataclass
class CfSplitting:
    coarse: np.ndarray
    fine: np.ndarray
    n: int

    @property
    def J(self):
        return len(self.coarse)

    def coarse_index(self):
        """Map global index -> coarse column (or -1)."""
        idx = np.full(self.n, -1, dtype=np.int64)
        idx[self.coarse] = np.arange(self.J)
        return idx

    def to_json(self, theta=None, scheme=None):
        return {"coarse": self.coarse.tolist(), "fine": self.fine.tolist(),
                "theta": theta, "scheme": scheme}


def mis_coarsen(S: StrengthGraph, n=None) -> CfSplitting:
    """Greedy maximal independent set in the strength graph.

    Vertices are visited by descending strong degree, ties by ascending
    index; a vertex becomes coarse unless a coarse neighbour already exists.
    """
    n = S.n if n is None else n
    deg = S.degrees()
    order = sorted(range(n), key=lambda i: (-deg[i], i))
    blocked = np.zeros(n, dtype=bool)
    is_coarse = np.zeros(n, dtype=bool)
    for i in order:
        if blocked[i]:
            continue
        is_coarse[i] = True
        blocked[S.neighbors(i)] = True
    return CfSplitting(np.flatnonzero(is_coarse), np.flatnonzero(~is_coarse), n)


def splitting_from_coarse(coarse, n) -> CfSplitting:
    coarse = np.unique(np.asarray(coarse, dtype=np.int64))
    mask = np.ones(n, dtype=bool)
    mask[coarse] = False
    return CfSplitting(coarse, np.flatnonzero(mask), n)


def interpolation_neighbors(S: StrengthGraph, scheme, j):
    """Strong neighbours of j (direct) or neighbours and their neighbours (standard)."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    nb = set(S.neighbors(j).tolist())
    if scheme == "standard":
        for i in list(nb):
            nb.update(S.neighbors(i).tolist())
        nb.discard(j)
    return nb


@dataclass
class Subdomain:
    j: int
    members: np.ndarray

    @property
    def size(self):
        return len(self.members)

    def to_json(self):
        return {"j": int(self.j), "members": self.members.tolist()}


def build_subdomains(split: CfSplitting, S: StrengthGraph, scheme="standard"):
    """Subdomains ``{j} + (F & s_j)`` for every coarse j and the overlap constant C_o."""
    fine = np.zeros(split.n, dtype=bool)
    fine[split.fine] = True
    subs = []
    for j in split.coarse:
        s = interpolation_neighbors(S, scheme, int(j))
        rest = sorted(i for i in s if fine[i])
        subs.append(Subdomain(int(j), np.array([int(j)] + rest, dtype=np.int64)))

    covered = np.zeros(split.n, dtype=bool)
    for sd in subs:
        covered[sd.members] = True
    missing = np.flatnonzero(~covered)
    if len(missing):
        raise CoverageError(
            f"fine points {missing.tolist()} belong to no subdomain; "
            "rerun with the standard scheme or a smaller theta"
        )
    return subs, overlap_constant(subs, split.n)


def membership(subs, n) -> sp.csr_matrix:
    """n x J incidence matrix of subdomain membership."""
    rows = np.concatenate([sd.members for sd in subs]) if subs else np.zeros(0, int)
    cols = np.concatenate([np.full(sd.size, k) for k, sd in enumerate(subs)]) if subs else rows
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, len(subs)))


def overlap_constant(subs, n):
    """``max_j |{l : Omega_l meets Omega_j}|``."""
    if not subs:
        return 0
    X = membership(subs, n)
    G = (X.T @ X).tocsr()
    return int(np.diff(G.indptr).max())


def write_splitting(path, split, theta, scheme, subs=None):
    doc = split.to_json(theta, scheme)
    if subs is not None:
        doc["subdomains"] = [sd.to_json() for sd in subs]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
