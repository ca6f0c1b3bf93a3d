"""Smoothers, the two-level cycle, the additive preconditioner and PCG.

Dense helpers in this module compute the exact convergence quantities
(``||E||_A^2``, ``K(V_c)``, ``K(V_c, D)``, ``c_D``, ``c^D``) at desk scale.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _backend
from .linalg import (
    PseudoInverse,
    SparseMatrix,
    check_desk_scale,
    complement_basis,
    dense,
    gen_eig_extremes,
    orthonormal_kernel,
    sym_eig_dense,
    triple_product,
)

SMOOTHERS = ("jacobi", "gauss_seidel", "sym_gauss_seidel")
DEFAULT_OMEGA = 2.0 / 3.0


class SmootherError(ValueError):
    pass


class PCGBreakdown(RuntimeError):
    pass


@dataclass
class Smoother:
    """One step of Jacobi, forward Gauss-Seidel or symmetric Gauss-Seidel."""

    kind: str
    A: SparseMatrix
    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        if self.kind not in SMOOTHERS:
            raise SmootherError(f"unknown smoother {self.kind!r}; choose from {SMOOTHERS}")
        d = self.A.diagonal()
        zero = np.flatnonzero(d == 0)
        if len(zero):
            raise SmootherError(f"zero diagonal entry at row {int(zero[0])}")
        self.D = d
        self._k = _backend.kernels

    def _args(self):
        A = self.A
        return A.row_offsets, A.col_indices, A.values

    def _lower(self, r):
        return np.asarray(self._k.csr_lower_solve(*self._args(), np.ascontiguousarray(r, float)))

    def _upper(self, r):
        return np.asarray(self._k.csr_upper_solve(*self._args(), np.ascontiguousarray(r, float)))

    def apply(self, r):
        """``R r``."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == "jacobi":
            return self.omega * r / self.D
        if self.kind == "gauss_seidel":
            return self._lower(r)
        return self._upper(self.D * self._lower(r))

    def apply_transpose(self, r):
        """``R^T r`` (a backward sweep for Gauss-Seidel)."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == "gauss_seidel":
            return self._upper(r)
        return self.apply(r)

    @property
    def symmetric(self):
        return self.kind != "gauss_seidel"

    def matrix(self):
        """Dense R."""
        n = self.A.n_rows
        check_desk_scale(n, "dense smoother")
        A = dense(self.A)
        if self.kind == "jacobi":
            return np.diag(self.omega / self.D)
        L = np.tril(A)
        Rl = sla.solve_triangular(L, np.eye(n), lower=True)
        if self.kind == "gauss_seidel":
            return Rl
        U = np.triu(A)
        return sla.solve_triangular(U, self.D[:, None] * Rl, lower=False)


def smooth_apply(s: Smoother, r):
    return s.apply(r)


def rbar(s: Smoother):
    """Symmetrized smoother ``R + R^T - R^T A R`` (dense)."""
    R = s.matrix()
    A = dense(s.A)
    Rb = R + R.T - R.T @ A @ R
    return 0.5 * (Rb + Rb.T)


def rbar_inv(s: Smoother):
    """``Rbar^{-1}`` by eigendecomposition; raises if Rbar is not SPD."""
    Rb = rbar(s)
    w, V = sym_eig_dense(Rb)
    if w[0] <= 1e-12 * max(abs(w[-1]), 1e-300):
        raise SmootherError(
            f"symmetrized smoother is not SPD (min eigenvalue {w[0]:.3e}); "
            "the smoother does not contract in the A-norm, reduce the damping"
        )
    M = (V / w) @ V.T
    return 0.5 * (M + M.T)


def smoother_contraction(s: Smoother):
    """Max of ``|v|_A^2 / |v|_{Rbar^{-1}}^2``; at most 1 for a contracting smoother."""
    return gen_eig_extremes(dense(s.A), rbar_inv(s))[1]


def coarse_kernel(P, K):
    """Coarse vectors c with ``P c`` in span(K), as an orthonormal basis."""
    if K.shape[1] == 0 or P.shape[1] == 0:
        return np.zeros((P.shape[1], 0))
    Pd = dense(P)
    C, *_ = np.linalg.lstsq(Pd, K, rcond=None)
    resid = np.abs(Pd @ C - K).max()
    if resid > 1e-10:
        return np.zeros((P.shape[1], 0))
    return orthonormal_kernel(C, P.shape[1])


class TwoLevelPreconditioner:
    """Exact two-level cycle: coarse correction then one post-smoothing step."""

    def __init__(self, A: SparseMatrix, P, smoother: Smoother, kernel=None):
        self.A = A
        self.n = A.n_rows
        self.P = P if isinstance(P, SparseMatrix) else SparseMatrix.from_dense(dense(P))
        if self.P.n_rows != self.n:
            raise ValueError(f"P has {self.P.n_rows} rows, A has {self.n}")
        self.smoother = smoother
        self.K = orthonormal_kernel(kernel, self.n)
        self.stats = {}
        self.Ac = triple_product(self.P, A, self.stats)
        self.Kc = coarse_kernel(self.P, self.K)
        self._coarse = PseudoInverse(self.Ac, self.Kc) if self.P.n_cols else None
        self._Ps = self.P.to_scipy()
        self._As = A.to_scipy()

    @property
    def J(self):
        return self.P.n_cols

    def project(self, v):
        return v - self.K @ (self.K.T @ v)

    def coarse_correction(self, g):
        if self._coarse is None:
            return np.zeros(self.n)
        return self._Ps @ self._coarse(self._Ps.T @ g)

    def apply(self, g):
        """Algorithm: ``w = P A_c^+ P^T g``, then ``w + R (g - A w)``."""
        g = self.project(np.asarray(g, dtype=np.float64))
        w = self.coarse_correction(g)
        out = w + self.smoother.apply(g - self._As @ w)
        return self.project(out)

    def apply_symmetric(self, g):
        """Symmetrized cycle ``R^T``-smoothing, coarse correction, ``R``-smoothing."""
        g = self.project(np.asarray(g, dtype=np.float64))
        x = self.smoother.apply_transpose(g)
        x = x + self.coarse_correction(g - self._As @ x)
        x = x + self.smoother.apply(g - self._As @ x)
        return self.project(x)

    def __call__(self, g):
        return self.apply(g)

    def coarse_pinv(self):
        """Dense pseudo-inverse of ``A_c`` on the coarse kernel complement."""
        J = self.J
        if J == 0:
            return np.zeros((0, 0))
        Z = complement_basis(self.Kc, J)
        Ar = Z.T @ dense(self.Ac) @ Z
        return Z @ np.linalg.solve(0.5 * (Ar + Ar.T), Z.T)

    def coarse_solve(self, rhs):
        """Dense ``A_c^+ rhs`` by a direct solve on the coarse kernel complement."""
        rhs = np.asarray(rhs, dtype=np.float64)
        if self.J == 0:
            return np.zeros((0,) + rhs.shape[1:])
        Z = complement_basis(self.Kc, self.J)
        Ar = Z.T @ dense(self.Ac) @ Z
        return Z @ sla.solve(0.5 * (Ar + Ar.T), Z.T @ rhs, assume_a="sym")

    def coarse_projection(self):
        """``Pi_c = P A_c^+ P^T A`` (dense)."""
        check_desk_scale(self.n, "coarse projection")
        Pd = dense(self.P)
        if self.J == 0:
            return np.zeros((self.n, self.n))
        # solve against P^T A directly: an explicit A_c^+ loses the near-kernel
        # accuracy that a backward-stable solve keeps
        return Pd @ self.coarse_solve(Pd.T @ dense(self.A))


def two_level_apply(B: TwoLevelPreconditioner, g):
    return B.apply(g)


def error_operator(B: TwoLevelPreconditioner):
    """``E = (I - R A)(I - Pi_c)`` from the explicit formula."""
    n = B.n
    A = dense(B.A)
    R = B.smoother.matrix()
    I = np.eye(n)
    return (I - R @ A) @ (I - B.coarse_projection())


def error_operator_composed(B: TwoLevelPreconditioner):
    """``I - B A`` with B applied column by column through the cycle."""
    n = B.n
    check_desk_scale(n, "error operator")
    A = dense(B.A)
    Bm = np.column_stack([B.apply(e) for e in np.eye(n)])
    return np.eye(n) - Bm @ A


def error_propagation_norm(B: TwoLevelPreconditioner, E=None):
    """``||E||_A^2`` as the top eigenvalue of the pencil ``(E^T A E, A)``."""
    A = dense(B.A)
    E = error_operator(B) if E is None else E
    M = E.T @ A @ E
    return gen_eig_extremes(0.5 * (M + M.T), A, kernel=B.K)[1]


def _oblique_projector(P, M):
    """M-orthogonal projector onto range(P)."""
    n = M.shape[0]
    if P.shape[1] == 0:
        return np.zeros((n, n))
    G = P.T @ M @ P
    return P @ np.linalg.solve(0.5 * (G + G.T), P.T @ M)


def _k_quantity(B, M):
    n = B.n
    Q = _oblique_projector(dense(B.P), M)
    I = np.eye(n)
    X = (I - Q).T @ M @ (I - Q)
    return gen_eig_extremes(0.5 * (X + X.T), dense(B.A), kernel=B.K)[1]


def k_vc(B: TwoLevelPreconditioner, Rbar_inv=None):
    """``K(V_c) = max_v min_{v_c} |v - v_c|_{Rbar^{-1}}^2 / |v|_A^2``."""
    M = rbar_inv(B.smoother) if Rbar_inv is None else Rbar_inv
    return _k_quantity(B, M)


def k_vc_d(B: TwoLevelPreconditioner, D=None):
    """``K(V_c, D)``: the same quantity in the diagonal norm."""
    D = B.A.diagonal() if D is None else np.asarray(D)
    return _k_quantity(B, np.diag(D))


def norm_equivalence_constants(s: Smoother, D=None, Rbar_inv=None):
    """``(c_D, c^D)``: extreme eigenvalues of the pencil ``(Rbar^{-1}, D)``."""
    D = s.A.diagonal() if D is None else np.asarray(D)
    M = rbar_inv(s) if Rbar_inv is None else Rbar_inv
    return gen_eig_extremes(M, np.diag(D))


def approximation_constant(B, D=None):
    """Top eigenvalue of ``((I-Q_D)^T D (I-Q_D), A)``: the D-norm approximation constant."""
    return k_vc_d(B, D)


class AdditivePreconditioner:
    """``Bhat = P A_c^+ P^T + sum_j Pi_j D_j^{-1} Pi_j^T``."""

    def __init__(self, B: TwoLevelPreconditioner, pro, D_local):
        self.B = B
        self.pro = pro
        self.D = np.asarray(D_local, dtype=np.float64)
        n = B.n
        diag = np.zeros(n)
        for sd, w in zip(pro.subdomains, pro.weights):
            diag[sd.members] += w * w / self.D[sd.members]
        self.local_diag = diag

    def apply(self, g):
        g = np.asarray(g, dtype=np.float64)
        out = self.B.coarse_correction(g)
        for sd, w in zip(self.pro.subdomains, self.pro.weights):
            out[sd.members] += w * (w * g[sd.members]) / self.D[sd.members]
        return out

    def __call__(self, g):
        return self.apply(g)

    def matrix(self):
        Pd = dense(self.B.P)
        M = Pd @ self.B.coarse_solve(Pd.T) + np.diag(self.local_diag)
        return 0.5 * (M + M.T)


def additive_apply(Bhat: AdditivePreconditioner, g):
    return Bhat.apply(g)


def condition_number(Bm, A, kernel=None):
    """Condition number of ``Bm A`` on the complement of N(A), ``Bm`` SPD.

    With ``Bm = L L^T`` the nonzero spectrum of ``Bm A`` is that of
    ``L^T A L``, whose kernel is ``L^{-1} N(A)``.
    """
    A = dense(A)
    L = np.linalg.cholesky(Bm)
    S = L.T @ A @ L
    K = orthonormal_kernel(kernel, A.shape[0])
    Kt = sla.solve_triangular(L, K, lower=True) if K.shape[1] else None
    lo, hi = gen_eig_extremes(0.5 * (S + S.T), np.eye(A.shape[0]), kernel=Kt)
    return hi / lo, lo, hi


@dataclass
class PCGResult:
    x: np.ndarray
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = False


def pcg(A, b, precond=None, tol=1e-8, maxit=500, kernel=None):
    """Preconditioned conjugate gradients on the complement of ``kernel``."""
    As = A.to_scipy() if isinstance(A, SparseMatrix) else A
    n = As.shape[0]
    K = orthonormal_kernel(kernel, n)

    def proj(v):
        return v - K @ (K.T @ v)

    M = precond if precond is not None else (lambda r: r)
    b = proj(np.asarray(b, dtype=np.float64))
    x = np.zeros(n)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    hist = [1.0]
    if bnorm == 0:
        return PCGResult(x, 0, hist, True)
    z = proj(M(r))
    p = z.copy()
    rz = r @ z
    for it in range(1, maxit + 1):
        Ap = As @ p
        pAp = p @ Ap
        if pAp <= 1e-300 or rz <= 0:
            raise PCGBreakdown(f"breakdown at iteration {it}: p^T A p = {pAp:.3e}, r^T z = {rz:.3e}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        hist.append(float(rel))
        if rel <= tol:
            return PCGResult(proj(x), it, hist, True)
        z = proj(M(r))
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return PCGResult(proj(x), maxit, hist, False)

