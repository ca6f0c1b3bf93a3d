"""Local spaces, partition-of-unity prolongation and local quality constants."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import SparseMatrix, gen_eig_extremes, sym_eig_dense
from .mmatrix import GraphForm

POU_TOL = 1e-14
OVERLAP_SEED = 0x5EED


class LocalGraphError(ValueError):
    """A local graph is disconnected where connectivity is required."""


@dataclass
class LocalProblem:
    j: int
    members: np.ndarray
    A: np.ndarray
    D: np.ndarray
    edges: list = field(default_factory=list)

    @property
    def size(self):
        return len(self.members)

    @property
    def coarse_basis(self):
        return np.ones(self.size)

    def connected(self):
        if self.size == 1:
            return True
        return _n_components(self.size, self.edges) == 1


def _n_components(k, edges):
    if not edges:
        return k
    r = [e[0] for e in edges]
    c = [e[1] for e in edges]
    G = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(k, k))
    return sp.csgraph.connected_components(G, directed=False)[0]


def local_operator(AS: SparseMatrix, sd) -> LocalProblem:
    """Laplacian of the ``A_S`` edges with both ends in the subdomain.

    ``D_j`` is the restriction of the diagonal of ``A_S``.
    """
    members = np.asarray(sd.members)
    M = AS.to_scipy()[members][:, members].tocoo()
    k = len(members)
    Aj = np.zeros((k, k))
    edges = []
    for a, b, v in zip(M.row, M.col, M.data):
        if a < b and v != 0.0:
            w = -v
            edges.append((int(a), int(b), float(w)))
            Aj[a, a] += w
            Aj[b, b] += w
            Aj[a, b] -= w
            Aj[b, a] -= w
    return LocalProblem(int(sd.j), members, Aj, AS.diagonal()[members].copy(), edges)


def local_spectrum(lp: LocalProblem):
    """Eigenvalues of ``D_j^{-1/2} A_j D_j^{-1/2}``, ascending."""
    s = 1.0 / np.sqrt(lp.D)
    return sym_eig_dense(s[:, None] * lp.A * s[None, :]).eigenvalues


def local_mu(lp: LocalProblem):
    """Second smallest eigenvalue of ``D_j^{-1} A_j``; +inf for a single point.

    Returns 0 for disconnected local graphs (callers report those).
    """
    if lp.size == 1:
        return math.inf
    if not lp.connected():
        return 0.0
    return float(max(local_spectrum(lp)[1], 0.0))


@dataclass
class MuReport:
    mu: list
    mu_c: float
    argmin: int
    singletons: list
    disconnected: list

    def to_json(self):
        return {"mu": [None if math.isinf(m) else m for m in self.mu], "mu_c": self.mu_c,
                "argmin": self.argmin, "singletons": self.singletons,
                "disconnected": self.disconnected}


def mu_report(problems) -> MuReport:
    mus = [local_mu(lp) for lp in problems]
    singles = [lp.j for lp, m in zip(problems, mus) if math.isinf(m)]
    bad = [lp.j for lp, m in zip(problems, mus) if m == 0.0]
    finite = [(m, lp.j) for lp, m in zip(problems, mus) if not math.isinf(m)]
    if finite:
        mu_c, arg = min(finite)
    else:
        mu_c, arg = math.inf, -1
    return MuReport(mus, mu_c, arg, singles, bad)


@dataclass
class Prolongation:
    P: SparseMatrix
    subdomains: list
    weights: list

    @property
    def shape(self):
        return self.P.shape

    def extend(self, k, vk):
        """``Pi_j v_j``: weighted extension of a local vector into the global space."""
        out = np.zeros(self.P.n_rows)
        sd = self.subdomains[k]
        out[sd.members] = self.weights[k] * vk
        return out

    def restrict(self, k, v):
        """``chi_j v``."""
        return np.asarray(v)[self.subdomains[k].members]


def _offdiag_lookup(AS):
    M = AS.to_scipy().tocsr()
    return M, M.diagonal()


def interpolation_weights(AS: SparseMatrix, split, subs, scheme="standard") -> Prolongation:
    """Row-stochastic prolongation built from strong connections.

    For a fine point i and a coarse j whose subdomain holds i, the raw
    weight is ``-a_ij`` (direct) or ``-a_ij + sum_k a_ik a_kj / a_kk`` over
    common strong neighbours k (standard). Each fine row is normalized.
    """
    M, diag = _offdiag_lookup(AS)
    n = AS.n_rows
    J = len(subs)

    def a(i, j):
        return M[i, j]

    raw = {}
    for col, sd in enumerate(subs):
        j = sd.j
        nj = set(M.indices[M.indptr[j]:M.indptr[j + 1]].tolist()) - {j}
        for i in sd.members[1:]:
            i = int(i)
            w = -a(i, j)
            if scheme == "standard":
                ni = set(M.indices[M.indptr[i]:M.indptr[i + 1]].tolist()) - {i}
                for k in sorted(ni & nj):
                    w += a(i, k) * a(k, j) / diag[k]
            raw[(i, col)] = w

    rowsum = np.zeros(n)
    for (i, col), w in raw.items():
        rowsum[i] += w
    bad = [int(i) for i in split.fine if not rowsum[i] > 0]
    if bad:
        raise ValueError(f"fine points {bad} have no positive interpolation weight")

    weights = []
    rows, cols, vals = [], [], []
    for col, sd in enumerate(subs):
        w = np.ones(sd.size)
        for t, i in enumerate(sd.members[1:], start=1):
            w[t] = raw[(int(i), col)] / rowsum[i]
        weights.append(w)
        rows.extend(sd.members.tolist())
        cols.extend([col] * sd.size)
        vals.extend(w.tolist())
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, J))
    return Prolongation(SparseMatrix.from_scipy(P), list(subs), weights)


def pou_operator(pro: Prolongation, n):
    """Dense ``sum_j Pi_j chi_j`` assembled from the local weights."""
    S = np.zeros((n, n))
    for sd, w in zip(pro.subdomains, pro.weights):
        S[sd.members, sd.members] += w
    return S


@dataclass
class PouVerdict:
    ok: bool
    bad_rows: list
    max_error: float

    def __bool__(self):
        return self.ok


def partition_of_unity_check(pro: Prolongation, n, tol=POU_TOL) -> PouVerdict:
    err = np.abs(pou_operator(pro, n) - np.eye(n))
    rows = np.flatnonzero(err.max(axis=1) > tol)
    return PouVerdict(len(rows) == 0, rows.tolist(), float(err.max(initial=0.0)))


@dataclass
class OverlapReport:
    energy_ratio: float
    diag_ratio: float
    C_o: int
    ok: bool


def overlap_energy_check(AS: SparseMatrix, pro: Prolongation, problems, C_o,
                         trials=1000, seed=OVERLAP_SEED) -> OverlapReport:
    """Seeded estimates of the two overlap ratios, checked against C_o.

    Energy: ``sum_j |chi_j v|^2_{A_j} / |v|^2_{A_S}``. Diagonal:
    ``|sum_j Pi_j v_j|^2_D / sum_j |v_j|^2_{D_j}`` with D the diagonal of A_S.
    """
    rng = np.random.default_rng(seed)
    n = AS.n_rows
    As = AS.to_scipy()
    D = AS.diagonal()
    e_max = d_max = 0.0
    for _ in range(trials):
        v = rng.standard_normal(n)
        den = v @ (As @ v)
        if den > 1e-14 * (v @ v) * max(abs(D).max(), 1.0):
            num = sum(lp.A.dot(v[lp.members]) @ v[lp.members] for lp in problems)
            e_max = max(e_max, num / den)
        locs = [rng.standard_normal(lp.size) for lp in problems]
        u = np.zeros(n)
        for k, vk in enumerate(locs):
            u += pro.extend(k, vk)
        den = sum((lp.D * vk) @ vk for lp, vk in zip(problems, locs))
        d_max = max(d_max, (D * u) @ u / den)
    ok = e_max <= C_o + 1e-10 and d_max <= C_o + 1e-10
    return OverlapReport(e_max, d_max, C_o, ok)


def graph_diameter(k, edges):
    """Longest shortest path (BFS from every vertex); raises if disconnected."""
    adj = [[] for _ in range(k)]
    for e in edges:
        adj[e[0]].append(e[1])
        adj[e[1]].append(e[0])
    diam = 0
    for s in range(k):
        dist = [-1] * k
        dist[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    q.append(w)
        if min(dist) < 0:
            raise LocalGraphError("graph is disconnected")
        diam = max(diam, max(dist))
    return diam


def poincare_bound(g: GraphForm, w):
    """``mu * n^2 * d`` with ``mu = sum w_j^2`` and d the graph diameter."""
    w = np.asarray(w, dtype=np.float64)
    if len(w) != g.k or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise ValueError("weights must be nonnegative, sum to 1 and match the vertex count")
    d = graph_diameter(g.k, g.edges)
    return float(w @ w) * g.k ** 2 * d


def unit_laplacian(k, edges):
    L = np.zeros((k, k))
    for a, b, *_ in edges:
        L[a, a] += 1
        L[b, b] += 1
        L[a, b] -= 1
        L[b, a] -= 1
    return L


def laplacian_equivalence(lp: LocalProblem, h, d=2):
    """Sharp ``(c_L, c^L)`` with ``c_L h^{d-2} A_L <= A_j <= c^L h^{d-2} A_L``."""
    if lp.size == 1:
        return 1.0, 1.0
    if not lp.connected():
        raise LocalGraphError(f"local graph of subdomain {lp.j} is disconnected")
    L = unit_laplacian(lp.size, lp.edges) * h ** (d - 2)
    return gen_eig_extremes(lp.A, L, kernel=np.ones(lp.size))


def certificate_fragment(mu: MuReport, C_o, bounds=None):
    frag = {"mu": mu.to_json()["mu"], "mu_c": mu.mu_c, "argmin": mu.argmin, "C_o": C_o}
    if bounds is not None:
        frag["c_L"] = [b[0] for b in bounds]
        frag["c_U"] = [b[1] for b in bounds]
    return frag


def write_fragment(path, frag):
    with open(path, "w") as fh:
        json.dump(frag, fh, indent=1)
        fh.write("\n")
