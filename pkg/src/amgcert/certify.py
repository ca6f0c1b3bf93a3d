"""End-to-end pipeline and the convergence certificate.

``A -> A+ -> A_S -> C/F splitting -> subdomains -> P`` followed by exact
desk-scale evaluation of every convergence quantity and bound.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import coarse_space as cs
from . import coarsening as co
from .fem import apply_dirichlet, assemble_stiffness, generate_structured_mesh
from .linalg import SparseMatrix, check_desk_scale, dense, gen_eig_extremes
from .mmatrix import build_a_plus
from .twolevel import (
    SMOOTHERS,
    AdditivePreconditioner,
    Smoother,
    TwoLevelPreconditioner,
    condition_number,
    error_operator,
    error_propagation_norm,
    k_vc,
    k_vc_d,
    norm_equivalence_constants,
    pcg,
    rbar_inv,
)

IDENTITY_TOL = 1e-8
SLACK = 1e-10
DEFAULT_INTERFACE = (0.25, 0.25, 0.75, 0.75)
RHS_SEED = 0x5EED
CSV_HEADER = "eps,h,theta,normE2,K_Vc,K_VcD,mu_c,C_o,kappa,iters"


@dataclass
class Problem:
    """A symmetric PSD system with its M-matrix relative and metadata."""

    name: str
    A: SparseMatrix
    A_plus: SparseMatrix
    kernel: np.ndarray | None = None
    h: float = float("nan")
    eps: float = 1.0
    meta: dict = field(default_factory=dict)
    P: np.ndarray | None = None

    @property
    def n(self):
        return self.A.n_rows


@dataclass
class Config:
    theta: float = co.DEFAULT_THETA
    scheme: str = "standard"
    strength: str = "max"
    smoother: str = "sym_gauss_seidel"
    omega: float = 2.0 / 3.0
    tol: float = 1e-8
    maxit: int = 500
    full_coarse: bool = False

    def validate(self):
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.scheme not in co.SCHEMES:
            raise ValueError(f"scheme must be one of {co.SCHEMES}, got {self.scheme!r}")
        if self.strength not in co.STRENGTH_MODES:
            raise ValueError(f"strength must be one of {co.STRENGTH_MODES}, got {self.strength!r}")
        if self.smoother not in SMOOTHERS:
            raise ValueError(f"smoother must be one of {SMOOTHERS}, got {self.smoother!r}")
        if not 0 < self.omega < 2:
            raise ValueError(f"omega must lie in (0, 2), got {self.omega}")
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.maxit < 1:
            raise ValueError(f"maxit must be positive, got {self.maxit}")
        return self


def laplacian_1d(n):
    """Dirichlet 3-point Laplacian ``tridiag(-1, 2, -1)`` of size n."""
    M = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()
    A = SparseMatrix.from_scipy(M, symmetric=True)
    return Problem(f"lap1d_n{n}", A, A, None, 1.0 / (n + 1), 1.0, {"dim": 1, "n": n, "bc": "dirichlet"})


def linear_interpolation_1d(n):
    """Every-other-point linear interpolation for the Dirichlet 1-D Laplacian (n odd)."""
    if n % 2 == 0:
        raise ValueError("need an odd number of points")
    J = (n - 1) // 2
    P = np.zeros((n, J))
    for c in range(J):
        i = 2 * c + 1
        P[i, c] = 1.0
        P[i - 1, c] += 0.5
        P[i + 1, c] += 0.5
    return P


def fem_problem(n, eps=1.0, interface=DEFAULT_INTERFACE, bc="neumann", perturb=False, seed=None):
    """Jump-coefficient P1 problem on the unit square."""
    kw = {} if seed is None else {"seed": seed}
    mesh = generate_structured_mesh(n, interface=interface, eps=eps, perturb=perturb, **kw)
    A, _ = assemble_stiffness(mesh)
    Ap = build_a_plus(A)
    meta = {"dim": 2, "n": int(n), "bc": bc, "interface": list(interface) if interface else None,
            "perturb": bool(perturb)}
    if perturb:
        meta["seed"] = mesh.meta["seed"]
    tag = f"fem_{bc}_n{n}_eps{eps:g}" + ("_perturbed" if perturb else "")
    if bc == "neumann":
        return Problem(tag, A, Ap, np.ones(A.n_rows), 1.0 / n, eps, meta)
    if bc != "dirichlet":
        raise ValueError(f"bc must be neumann or dirichlet, got {bc!r}")
    Ai, interior = apply_dirichlet(A, mesh.boundary_vertices())
    Api = Ap.to_scipy()[interior][:, interior]
    Api = SparseMatrix.from_scipy(Api, symmetric=True)
    return Problem(tag, Ai, Api, None, 1.0 / n, eps, meta)


@dataclass
class Pipeline:
    problem: Problem
    config: Config
    S: object
    A_S: SparseMatrix
    split: object
    subdomains: list
    C_o: int
    prolongation: object
    local: list
    mu: object
    smoother: Smoother
    B: TwoLevelPreconditioner
    Bhat: AdditivePreconditioner | None


def build_pipeline(problem: Problem, config: Config | None = None) -> Pipeline:
    config = (config or Config()).validate()
    S, AS = co.build_strength(problem.A_plus, config.theta, config.strength)
    n = problem.n
    if config.full_coarse:
        split = co.splitting_from_coarse(np.arange(n), n)
    else:
        split = co.mis_coarsen(S, n)
    subs, C_o = co.build_subdomains(split, S, config.scheme)
    pro = cs.interpolation_weights(AS, split, subs, config.scheme)
    local = [cs.local_operator(AS, sd) for sd in subs]
    mu = cs.mu_report(local)
    smoother = Smoother(config.smoother, problem.A, config.omega)
    P = pro.P if problem.P is None else problem.P
    B = TwoLevelPreconditioner(problem.A, P, smoother, problem.kernel)
    Bhat = AdditivePreconditioner(B, pro, AS.diagonal()) if problem.P is None else None
    return Pipeline(problem, config, S, AS, split, subs, C_o, pro, local, mu, smoother, B, Bhat)


@dataclass
class Clause:
    name: str
    passed: bool | None
    lhs: float
    rhs: float
    note: str = ""

    def to_json(self):
        status = "skipped" if self.passed is None else ("pass" if self.passed else "fail")
        return {"name": self.name, "status": status, "lhs": _num(self.lhs),
                "rhs": _num(self.rhs), "note": self.note}


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


@dataclass
class ConvergenceCertificate:
    normE2: float
    K_Vc: float
    K_VcD: float
    c_D: float
    c_up: float
    mu_c: float
    C_o: int
    gamma_A: float
    gamma_D: float
    C_p1: float
    C_p2: float
    theoretical_rate_bound: float
    approximation_bound: float
    kappa_additive: float
    kappa_bound: float
    kappa_bound_ratio: float
    mu0_sq: float
    mu1_sq: float
    clauses: list
    config: dict
    problem: dict

    @property
    def valid(self):
        return all(c.passed is not False for c in self.clauses)

    def failing(self):
        return [c for c in self.clauses if c.passed is False]

    def to_json(self):
        d = {k: _num(v) if isinstance(v, float) else v for k, v in asdict(self).items()
             if k != "clauses"}
        d["clauses"] = [c.to_json() for c in self.clauses]
        d["valid"] = self.valid
        return d


def _identity_expected(K):
    return max(0.0, 1.0 - 1.0 / K) if K > 0 else 0.0


def measure(pl: Pipeline):
    """All exact quantities for a pipeline (dense, desk scale)."""
    pb = pl.problem
    check_desk_scale(pb.n, "certificate")
    A = dense(pb.A)
    D = pb.A.diagonal()
    Rinv = rbar_inv(pl.smoother)
    E = error_operator(pl.B)
    out = {
        "normE2": error_propagation_norm(pl.B, E),
        "K_Vc": k_vc(pl.B, Rinv),
        "K_VcD": k_vc_d(pl.B, D),
    }
    out["c_D"], out["c_up"] = norm_equivalence_constants(pl.smoother, D, Rinv)
    out["gamma_A"] = gen_eig_extremes(dense(pl.A_S), A, kernel=pb.kernel)[1]
    out["gamma_D"] = float(np.max(D / pl.A_S.diagonal()))
    if pl.Bhat is not None:
        out["kappa"], out["kappa_lo"], out["kappa_hi"] = condition_number(
            pl.Bhat.matrix(), A, pb.kernel)
    return out


def certify(problem: Problem, config: Config | None = None, pipeline: Pipeline | None = None):
    """Run the pipeline and check the five certificate clauses."""
    pl = pipeline or build_pipeline(problem, config)
    m = measure(pl)
    cfg = pl.config
    normE2, K, KD = m["normE2"], m["K_Vc"], m["K_VcD"]
    c_D, c_up = m["c_D"], m["c_up"]
    mu_c, C_o = pl.mu.mu_c, pl.C_o
    Cp1, Cp2 = C_o * max(m["gamma_A"], 0.0), C_o * m["gamma_D"]
    clauses = []

    expected = _identity_expected(K)
    tol = IDENTITY_TOL * max(1.0, K)
    clauses.append(Clause("identity", abs(normE2 - expected) <= tol, normE2, expected,
                          f"|normE2 - (1 - 1/K_Vc)| <= {tol:.3e}"))

    lo, hi = c_D * KD, c_up * KD
    s = SLACK * max(1.0, abs(K))
    clauses.append(Clause("sandwich", lo - s <= K <= hi + s, K, hi,
                          f"c_D K_VcD = {lo:.12g} <= K_Vc <= c^D K_VcD"))

    structured = problem.P is None
    if math.isinf(mu_c):
        rate = approx = 0.0
    elif mu_c <= 0:
        rate, approx = 1.0, math.inf
    else:
        approx = Cp1 * Cp2 / mu_c
        rate = 1.0 - mu_c / (Cp1 * Cp2 * c_up)
    if structured:
        clauses.append(Clause("rate_bound", normE2 <= rate + SLACK, normE2, rate,
                              "normE2 <= 1 - mu_c / (C_p1 C_p2 c^D)"))
    else:
        clauses.append(Clause("rate_bound", None, normE2, math.nan, "user-supplied P"))

    kappa = m.get("kappa", math.nan)
    if structured and mu_c > 0:
        inv_mu = 0.0 if math.isinf(mu_c) else 1.0 / mu_c
        mu0_sq = Cp1 * inv_mu + 2.0 * c_up * Cp1 * Cp2 * inv_mu + 2.0
        mu1_sq = 1.0 + c_up * Cp2
        kbound = mu0_sq * mu1_sq
        clauses.append(Clause("additive", kappa <= kbound * (1 + SLACK), kappa, kbound,
                              "kappa(Bhat A) <= mu0^2 mu1^2"))
    else:
        mu0_sq = mu1_sq = kbound = math.nan
        clauses.append(Clause("additive", None, kappa, kbound, "not applicable"))

    if structured:
        clauses.append(Clause("approximation", KD <= approx + SLACK * max(1.0, approx), KD,
                              approx, "K(V_c, D) <= C_p1 C_p2 / mu_c"))
    else:
        clauses.append(Clause("approximation", None, KD, math.nan, "user-supplied P"))

    return ConvergenceCertificate(
        normE2=normE2, K_Vc=K, K_VcD=KD, c_D=c_D, c_up=c_up, mu_c=mu_c, C_o=C_o,
        gamma_A=m["gamma_A"], gamma_D=m["gamma_D"], C_p1=Cp1, C_p2=Cp2,
        theoretical_rate_bound=rate, approximation_bound=approx,
        kappa_additive=kappa, kappa_bound=kbound,
        kappa_bound_ratio=(mu1_sq / mu0_sq) if mu0_sq == mu0_sq else math.nan,
        mu0_sq=mu0_sq, mu1_sq=mu1_sq, clauses=clauses,
        config=asdict(cfg), problem=problem_descriptor(problem),
    )


def problem_descriptor(problem: Problem):
    return {"name": problem.name, "n": problem.n, "h": _num(problem.h),
            "eps": problem.eps, **problem.meta}


def solve(pl: Pipeline, b=None, seed=RHS_SEED, symmetric=True):
    """PCG on the problem with the (symmetrized) two-level preconditioner."""
    pb = pl.problem
    if b is None:
        b = np.random.default_rng(seed).standard_normal(pb.n)
    if pb.kernel is not None:
        b = b - b.mean()
    M = pl.B.apply_symmetric if symmetric else pl.B.apply
    return pcg(pb.A, b, M, pl.config.tol, pl.config.maxit, pb.kernel)


def sweep_row(eps, n, config: Config, interface=DEFAULT_INTERFACE, bc="neumann", perturb=False,
              seed=None):
    """One sweep cell: certificate plus PCG iteration count."""
    pb = fem_problem(n, eps, interface, bc, perturb, seed)
    pl = build_pipeline(pb, config)
    cert = certify(pb, config, pl)
    res = solve(pl)
    return cert, res


def csv_line(eps, h, theta, cert, iters):
    vals = [eps, h, theta, cert.normE2, cert.K_Vc, cert.K_VcD, cert.mu_c, cert.C_o,
            cert.kappa_additive, iters]
    return ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in vals)


def write_certificate(path, cert):
    with open(path, "w") as fh:
        json.dump(cert.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
