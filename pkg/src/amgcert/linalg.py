"""Sparse and small-dense linear algebra shared by the rest of the package.

Sparse matrices are stored in CSR form (:class:`SparseMatrix`); dense work
uses plain ``numpy`` arrays and is limited to ``DENSE_THRESHOLD`` rows.
Eigenvalue computations go through :func:`sym_eig_dense`, which runs a cyclic
Jacobi iteration (compiled kernel when available) for small matrices and
LAPACK's ``syevd`` above ``JACOBI_AUTO_MAX``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import _backend

DENSE_THRESHOLD = 2000
JACOBI_AUTO_MAX = 160 if _backend.COMPILED else 40
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100


class DeskScaleError(ValueError):
    """Raised when an exact dense computation is requested above the threshold."""


class NotPositiveDefiniteError(ValueError):
    """Raised when a pencil's right-hand matrix is not SPD on the deflated space."""


def check_desk_scale(n, what="operation"):
    if n > DENSE_THRESHOLD:
        raise DeskScaleError(
            f"{what} needs a dense {n}x{n} computation; the exact-certificate "
            f"limit is {DENSE_THRESHOLD} rows"
        )


@dataclass(eq=False)
class SparseMatrix:
    """CSR matrix with sorted, duplicate-free column indices in every row."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        self.row_offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(self.col_indices, dtype=np.int32)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.row_offsets.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have n_rows + 1 entries")
        if self.row_offsets[0] != 0 or np.any(np.diff(self.row_offsets) < 0):
            raise ValueError("row_offsets must start at 0 and be nondecreasing")
        nnz = int(self.row_offsets[-1])
        if self.col_indices.shape != (nnz,) or self.values.shape != (nnz,):
            raise ValueError("col_indices/values length must equal row_offsets[-1]")
        if nnz and (self.col_indices.min() < 0 or self.col_indices.max() >= self.n_cols):
            raise ValueError("column index out of range")
        for i in range(self.n_rows):
            row = self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]
            if row.size > 1 and np.any(np.diff(row) <= 0):
                raise ValueError(f"row {i}: column indices not strictly ascending")
        if self.symmetric and not self.is_symmetric():
            raise ValueError("matrix flagged symmetric is not exactly symmetric")

    @classmethod
    def from_scipy(cls, M, symmetric=False) -> "SparseMatrix":
        M = sp.csr_matrix(M, dtype=np.float64, copy=True)
        M.sum_duplicates()
        M.sort_indices()
        return cls(M.shape[0], M.shape[1], M.indptr, M.indices, M.data, symmetric)

    @classmethod
    def from_dense(cls, A, symmetric=False, drop_zeros=True) -> "SparseMatrix":
        M = sp.csr_matrix(np.asarray(A, dtype=np.float64))
        if drop_zeros:
            M.eliminate_zeros()
        return cls.from_scipy(M, symmetric)

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        return cls.from_scipy(sp.identity(n, format="csr"), symmetric=True)

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return int(self.row_offsets[-1])

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets), shape=self.shape
        )

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def diagonal(self) -> np.ndarray:
        return self.to_scipy().diagonal()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self.to_scipy().T, self.symmetric)

    def is_symmetric(self) -> bool:
        if self.n_rows != self.n_cols:
            return False
        M = self.to_scipy()
        return (M != M.T).nnz == 0

    def row_sums(self) -> np.ndarray:
        return np.add.reduceat(self.values, self.row_offsets[:-1]) if self.nnz else np.zeros(self.n_rows)

    def __matmul__(self, x):
        x = np.asarray(x)
        if x.ndim == 1:
            return spmv(self, x)
        return self.to_scipy() @ x

    def __repr__(self):
        kind = "symmetric " if self.symmetric else ""
        return f"<SparseMatrix {kind}{self.n_rows}x{self.n_cols}, nnz={self.nnz}>"


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """y = A x with left-to-right accumulation in every row."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise ValueError(f"dimension mismatch: matrix has {A.n_cols} columns, vector {x.shape}")
    return _backend.kernels.csr_spmv(A.row_offsets, A.col_indices, A.values, x)


def _as_scipy(M):
    if isinstance(M, SparseMatrix):
        return M.to_scipy()
    if sp.issparse(M):
        return sp.csr_matrix(M)
    return sp.csr_matrix(np.asarray(M, dtype=np.float64))


def triple_product(P, A, stats=None) -> SparseMatrix:
    """Galerkin product ``P^T A P`` as an exactly symmetric sparse matrix.

    Entries with magnitude below ``1e-14 * max|entry|`` are dropped; the
    number dropped is added to ``stats["dropped"]`` when a dict is given.
    """
    Ps, As = _as_scipy(P), _as_scipy(A)
    if As.shape[0] != As.shape[1] or Ps.shape[0] != As.shape[0]:
        raise ValueError(f"dimension mismatch: P is {Ps.shape}, A is {As.shape}")
    C = (Ps.T @ As @ Ps).tocsr()
    C = ((C + C.T) * 0.5).tocsr()
    C.sum_duplicates()
    dropped = 0
    if C.nnz:
        cutoff = 1e-14 * np.abs(C.data).max()
        small = np.abs(C.data) < cutoff
        dropped = int(small.sum())
        if dropped:
            C.data[small] = 0.0
        C.eliminate_zeros()
    if stats is not None:
        stats["dropped"] = stats.get("dropped", 0) + dropped
    return SparseMatrix.from_scipy(C, symmetric=True)


def dense(M) -> np.ndarray:
    """Dense float array view of a SparseMatrix, scipy matrix or array."""
    if isinstance(M, SparseMatrix):
        return M.toarray()
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=np.float64)


class SymEigenResult(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _normalize_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig_dense(A, method="auto", tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS,
                  backend=None) -> SymEigenResult:
    """All eigenpairs of a symmetric matrix, ascending.

    ``method="jacobi"`` runs cyclic Jacobi rotations over the upper triangle
    in row-major order until ``off(A) <= tol * ||A||_F``. ``"lapack"`` calls
    ``scipy.linalg.eigh``. ``"auto"`` picks Jacobi up to ``JACOBI_AUTO_MAX``.
    Eigenvectors are sign-normalized so the largest-magnitude entry of each is
    positive.
    """
    A = dense(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a nonempty square matrix, got shape {A.shape}")
    n = A.shape[0]
    scale = np.abs(A).max()
    asym = np.abs(A - A.T).max()
    if asym > 1e-12 * max(scale, 1.0):
        raise ValueError(f"matrix not symmetric: max |a_ij - a_ji| = {asym:.3e}")
    if method == "auto":
        method = "jacobi" if n <= JACOBI_AUTO_MAX else "lapack"
    S = 0.5 * (A + A.T)
    if method == "jacobi":
        kern = _backend.kernels if backend is None else _backend.get(backend)
        a = np.ascontiguousarray(S.copy())
        V = np.eye(n)
        fro = np.linalg.norm(S)
        sweeps = kern.jacobi_eigh(a, V, tol * fro, max_sweeps)
        if sweeps < 0:
            raise RuntimeError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
        w = np.diag(a).copy()
    elif method == "lapack":
        w, V = sla.eigh(S)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(w, kind="stable")
    return SymEigenResult(w[order], _normalize_signs(V[:, order]))


def orthonormal_kernel(kernel, n) -> np.ndarray:
    """Orthonormal n x k basis of the span of ``kernel`` (None, vector or columns)."""
    if kernel is None:
        return np.zeros((n, 0))
    K = np.asarray(kernel, dtype=np.float64)
    if K.ndim == 1:
        K = K[:, None]
    if K.shape[0] != n:
        raise ValueError(f"kernel vectors have length {K.shape[0]}, expected {n}")
    if K.shape[1] == 0:
        return np.zeros((n, 0))
    Q, R = np.linalg.qr(K)
    keep = np.abs(np.diag(R)) > 1e-12 * max(np.abs(R).max(), 1.0)
    return Q[:, keep]


def complement_basis(K, n) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the columns of K."""
    k = K.shape[1]
    if k == 0:
        return np.eye(n)
    Q, _ = np.linalg.qr(K, mode="complete")
    return Q[:, k:]


def restricted_pencil(M, A, kernel=None):
    """Symmetric matrix whose eigenvalues are those of ``M v = lam A v`` on kernel-perp.

    Returns ``(C, Z, W)`` where ``Z`` spans the complement of the kernel and
    ``W`` maps coordinates of ``C`` back: pencil eigenvectors are ``Z W y``.
    """
    Md, Ad = dense(M), dense(A)
    n = Ad.shape[0]
    if Md.shape != Ad.shape or Ad.shape != (n, n):
        raise ValueError(f"pencil shape mismatch: {Md.shape} vs {Ad.shape}")
    check_desk_scale(n, "generalized eigenproblem")
    K = orthonormal_kernel(kernel, n)
    Z = complement_basis(K, n)
    Ar = Z.T @ Ad @ Z
    Mr = Z.T @ Md @ Z
    Ar = 0.5 * (Ar + Ar.T)
    Mr = 0.5 * (Mr + Mr.T)
    lam, U = sym_eig_dense(Ar)
    top = max(abs(lam[-1]), np.abs(Ad).max(), 1e-300)
    if lam[0] < 1e-12 * top:
        raise NotPositiveDefiniteError(
            f"right-hand matrix not SPD on the deflated space: eigenvalue {lam[0]:.6e} "
            f"(norm {top:.3e})"
        )
    W = U / np.sqrt(lam)
    C = W.T @ Mr @ W
    return 0.5 * (C + C.T), Z, W


def gen_eig_values(M, A, kernel=None) -> np.ndarray:
    """All eigenvalues of the pencil ``(M, A)`` restricted to the kernel complement."""
    C, _, _ = restricted_pencil(M, A, kernel)
    return sym_eig_dense(C).eigenvalues


def gen_eig_extremes(M, A, kernel=None):
    """(smallest, largest) eigenvalue of ``M v = lam A v`` on the kernel complement."""
    w = gen_eig_values(M, A, kernel)
    return float(w[0]), float(w[-1])


def gen_eig_max(M, A, kernel=None):
    """Largest pencil eigenvalue with its eigenvector in the original coordinates."""
    C, Z, W = restricted_pencil(M, A, kernel)
    w, Y = sym_eig_dense(C)
    return float(w[-1]), Z @ (W @ Y[:, -1])


class PseudoInverse:
    """Reusable solver for ``A x = (I - Q_N) b`` with ``x`` orthogonal to N.

    Dense (restricted Cholesky) at desk scale; otherwise conjugate gradients
    on the deflated system to relative residual ``cg_tol``.
    """

    def __init__(self, A, kernel=None, cg_tol=1e-12, maxiter=None):
        self.A = A
        n = A.shape[0]
        self.n = n
        self.K = orthonormal_kernel(kernel, n)
        self.cg_tol = cg_tol
        self.maxiter = maxiter or 10 * max(n, 1)
        self.dense = n <= DENSE_THRESHOLD
        if n == 0:
            return
        if self.dense:
            Ad = dense(A)
            self.Z = complement_basis(self.K, n)
            Ar = self.Z.T @ Ad @ self.Z
            self._chol = sla.cho_factor(0.5 * (Ar + Ar.T)) if Ar.size else None
        else:
            self._As = _as_scipy(A)

    def project(self, b):
        return b - self.K @ (self.K.T @ b)

    def __call__(self, b, info=None):
        b = np.asarray(b, dtype=np.float64)
        if self.n == 0:
            return np.zeros(0)
        pb = self.project(b)
        if info is not None:
            info["projected"] = float(np.linalg.norm(b - pb))
        if self.dense:
            if self._chol is None:
                return np.zeros(self.n)
            return self.Z @ sla.cho_solve(self._chol, self.Z.T @ pb)
        return self._cg(pb)

    def _cg(self, b):
        x = np.zeros_like(b)
        r = b.copy()
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return x
        p = r.copy()
        rr = r @ r
        for _ in range(self.maxiter):
            Ap = self.project(self._As @ p)
            alpha = rr / (p @ Ap)
            x += alpha * p
            r -= alpha * Ap
            rr_new = r @ r
            if np.sqrt(rr_new) <= self.cg_tol * bnorm:
                break
            p = r + (rr_new / rr) * p
            rr = rr_new
        return self.project(x)


def pseudo_solve(A, b, kernel=None, info=None) -> np.ndarray:
    """Minimum-norm-style solve of ``A x = (I - Q_N) b`` with ``x`` orthogonal to N(A)."""
    return PseudoInverse(A, kernel)(b, info)


def mean_zero(b):
    b = np.asarray(b, dtype=np.float64)
    return b - b.mean()
