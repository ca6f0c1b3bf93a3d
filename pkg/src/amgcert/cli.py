"""Command-line driver: mesh, assemble, coarsen, certify, solve and sweep.

Exit codes: 0 success, 1 invalid certificate or failed sweep criterion,
2 usage, validation or I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import certify as ce
from . import coarse_space as cs
from . import coarsening as co
from .fem import (
    DEFAULT_SEED,
    MeshError,
    apply_dirichlet,
    assemble_stiffness,
    generate_structured_mesh,
    read_mesh,
    write_mesh,
)
from .linalg import SparseMatrix
from .mmatrix import m_matrix_relative
from .mmio import read_matrix_market, write_matrix_market
from .twolevel import SMOOTHERS

UNIFORM_SPREAD = 0.05
RATE_CEILING = 0.95

MESH_KEYS = ("n", "eps", "interface", "perturb", "seed", "bc")
SOLVER_KEYS = ("theta", "scheme", "strength", "smoother", "omega", "tol", "maxit")
DEFAULTS = {
    "n": 8, "eps": 1.0, "interface": list(ce.DEFAULT_INTERFACE), "perturb": False,
    "seed": DEFAULT_SEED, "bc": "neumann",
    **{k: v for k, v in asdict(ce.Config()).items() if k in SOLVER_KEYS},
}


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _interface(text):
    if text.lower() in ("none", ""):
        return None
    vals = _floats(text)
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("interface needs four numbers x0,y0,x1,y1")
    return vals


def _add_mesh_args(p, grid=True):
    g = p.add_argument_group("mesh")
    if grid:
        g.add_argument("--n", type=int, help="subdivisions per side (h = 1/n)")
        g.add_argument("--eps", type=float, help="coefficient inside the interface rectangle")
    g.add_argument("--interface", type=_interface, help="x0,y0,x1,y1 or 'none'")
    g.add_argument("--perturb", action="store_true", default=None, help="jitter interior vertices")
    g.add_argument("--seed", type=int, help="perturbation seed")
    g.add_argument("--bc", choices=("neumann", "dirichlet"))


def _add_solver_args(p):
    g = p.add_argument_group("solver")
    g.add_argument("--theta", type=float, help="strength threshold in (0, 1)")
    g.add_argument("--scheme", choices=co.SCHEMES)
    g.add_argument("--strength", choices=co.STRENGTH_MODES, help="strength symmetrization")
    g.add_argument("--smoother", choices=SMOOTHERS)
    g.add_argument("--omega", type=float, help="Jacobi damping")
    g.add_argument("--tol", type=float, help="PCG relative residual tolerance")
    g.add_argument("--maxit", type=int, help="PCG iteration cap")


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    flat = dict(doc.get("mesh", {}))
    flat.update({k: v for k, v in doc.items() if k != "mesh"})
    unknown = set(flat) - set(MESH_KEYS) - set(SOLVER_KEYS) - {"output"}
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)} in {path}")
    return flat


def run_config(args):
    """Merge defaults, the config file and explicit flags (flags win)."""
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(getattr(args, "config", None)))
    for k in MESH_KEYS + SOLVER_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["n"] < 2:
        raise UsageError(f"--n must be at least 2, got {cfg['n']}")
    if not 0 < cfg["eps"] <= 1:
        raise UsageError(f"--eps must lie in (0, 1], got {cfg['eps']}")
    try:
        solver_config(cfg).validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def solver_config(cfg):
    return ce.Config(**{k: cfg[k] for k in SOLVER_KEYS})


def _mesh(cfg):
    try:
        return generate_structured_mesh(cfg["n"], cfg["interface"], cfg["eps"],
                                        bool(cfg["perturb"]), cfg["seed"])
    except MeshError as exc:
        raise UsageError(str(exc)) from None


def _problem(cfg):
    try:
        return ce.fem_problem(cfg["n"], cfg["eps"], cfg["interface"], cfg["bc"],
                              bool(cfg["perturb"]), cfg["seed"])
    except MeshError as exc:
        raise UsageError(str(exc)) from None


def _matrix_problem(path, kernel):
    try:
        A = read_matrix_market(path)
    except OSError as exc:
        raise UsageError(f"cannot read matrix {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not A.is_symmetric():
        raise UsageError(f"{path}: matrix is not symmetric")
    A = SparseMatrix.from_scipy(A.to_scipy(), symmetric=True)
    ker = np.ones(A.n_rows) if kernel == "constants" else None
    return ce.Problem(path, A, m_matrix_relative(A), ker, math.nan, math.nan,
                      {"source": path, "kernel": kernel})


def _write_json(path, doc):
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def cmd_mesh(args):
    cfg = run_config(args)
    mesh = _mesh(cfg)
    if args.output in (None, "-"):
        _write_json(None, mesh.to_json())
    else:
        write_mesh(mesh, args.output)
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles", file=sys.stderr)
    return 0


def cmd_assemble(args):
    cfg = run_config(args)
    if args.mesh:
        try:
            mesh = read_mesh(args.mesh)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read mesh {args.mesh}: {exc}") from None
        A, _ = assemble_stiffness(mesh)
        if cfg["bc"] == "dirichlet":
            A, _ = apply_dirichlet(A, mesh.boundary_vertices())
    else:
        A = _problem(cfg).A
    write_matrix_market(A, args.output, symmetric=True)
    print(f"matrix: {A.n_rows} x {A.n_cols}, {A.nnz} stored entries", file=sys.stderr)
    return 0


def _problem_from_args(args, cfg):
    if getattr(args, "matrix", None):
        return _matrix_problem(args.matrix, args.kernel)
    return _problem(cfg)


def cmd_coarsen(args):
    cfg = run_config(args)
    pb = _problem_from_args(args, cfg)
    try:
        pl = ce.build_pipeline(pb, solver_config(cfg))
    except co.CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    doc = pl.split.to_json(cfg["theta"], cfg["scheme"])
    doc["strength"] = cfg["strength"]
    doc["subdomains"] = [sd.to_json() for sd in pl.subdomains]
    doc["C_o"] = pl.C_o
    doc["certificate_fragment"] = cs.certificate_fragment(pl.mu, pl.C_o)
    _write_json(args.output, doc)
    return 0


def cmd_certify(args):
    cfg = run_config(args)
    pb = _problem_from_args(args, cfg)
    config = solver_config(cfg)
    cert = ce.certify(pb, config)
    doc = cert.to_json()
    doc["config"] = {**cfg, "matrix": getattr(args, "matrix", None)}
    _write_json(args.output, doc)
    for c in cert.clauses:
        status = "skipped" if c.passed is None else ("pass" if c.passed else "FAIL")
        print(f"{c.name:14s} {status:7s} lhs={c.lhs:.10g} rhs={c.rhs:.10g}", file=sys.stderr)
    return 0 if cert.valid else 1


def cmd_solve(args):
    cfg = run_config(args)
    pb = _problem_from_args(args, cfg)
    pl = ce.build_pipeline(pb, solver_config(cfg))
    res = ce.solve(pl, seed=args.rhs_seed)
    doc = {"config": cfg, "iterations": res.iterations, "converged": res.converged,
           "history": res.history}
    if args.solution:
        doc["solution"] = res.x.tolist()
    _write_json(args.output, doc)
    print(f"pcg: {res.iterations} iterations, converged={res.converged}", file=sys.stderr)
    return 0 if res.converged else 1


def _sweep_cell(job):
    eps, n, cfg = job
    c = dict(cfg, eps=eps, n=n)
    cert, res = ce.sweep_row(eps, n, solver_config(c), c["interface"], c["bc"],
                              bool(c["perturb"]), c["seed"])
    return eps, n, cert, res.iterations


def sweep_summary(rows):
    """Uniformity checks over a list of (eps, n, cert, iters)."""
    checks = []
    rate_ok = all(c.normE2 <= c.theoretical_rate_bound + ce.SLACK for _, _, c, _ in rows)
    checks.append(("rate_bound", rate_ok))
    by_n = {}
    for eps, n, c, it in rows:
        by_n.setdefault(n, []).append((eps, c.normE2, it))
    spread = max((max(v[1] for v in vs) - min(v[1] for v in vs) for vs in by_n.values()),
                 default=0.0)
    checks.append((f"eps_spread<={UNIFORM_SPREAD}", spread <= UNIFORM_SPREAD))
    top = max((c.normE2 for _, _, c, _ in rows), default=0.0)
    checks.append((f"normE2<={RATE_CEILING}", top <= RATE_CEILING))
    checks.append(("certificates_valid", all(c.valid for _, _, c, _ in rows)))
    return checks, spread, top


def cmd_sweep(args):
    cfg = run_config(args)
    if args.h:
        ns = []
        for h in args.h:
            n = round(1.0 / h)
            if n < 2 or abs(n * h - 1) > 1e-12:
                raise UsageError(f"h={h} is not 1/n for an integer n >= 2")
            ns.append(n)
    else:
        ns = args.n_list or [8, 16, 32]
    eps_list = args.eps_list or [1.0, 1e-2, 1e-4, 1e-8]
    if any(not 0 < e <= 1 for e in eps_list):
        raise UsageError("every eps must lie in (0, 1]")
    jobs = [(e, n, cfg) for e in eps_list for n in ns]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    lines = [ce.CSV_HEADER] + [ce.csv_line(e, 1.0 / n, cfg["theta"], c, it) for e, n, c, it in rows]
    text = "\n".join(lines) + "\n"
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(args.output, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.output}: {exc.strerror}") from None
    checks, spread, top = sweep_summary(rows)
    for name, ok in checks:
        print(f"{name:24s} {'pass' if ok else 'FAIL'}", file=sys.stderr)
    print(f"max eps spread {spread:.4g}, max normE2 {top:.4g}", file=sys.stderr)
    return 0 if all(ok for _, ok in checks) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="amgcert", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mesh", help="generate a structured jump-coefficient mesh (JSON)")
    _add_mesh_args(m)
    m.add_argument("--config")
    m.add_argument("-o", "--output")
    m.set_defaults(func=cmd_mesh)

    a = sub.add_parser("assemble", help="assemble the P1 stiffness matrix (Matrix Market)")
    _add_mesh_args(a)
    a.add_argument("--config")
    a.add_argument("--mesh", help="mesh JSON (otherwise generated from the mesh flags)")
    a.add_argument("-o", "--output", required=True)
    a.set_defaults(func=cmd_assemble)

    for name, func, hlp in (("coarsen", cmd_coarsen, "C/F splitting, subdomains and local constants"),
                            ("certify", cmd_certify, "full convergence certificate (JSON)"),
                            ("solve", cmd_solve, "PCG with the two-level preconditioner")):
        s = sub.add_parser(name, help=hlp)
        _add_mesh_args(s)
        _add_solver_args(s)
        s.add_argument("--config")
        s.add_argument("--matrix", help="Matrix Market input instead of a generated mesh")
        s.add_argument("--kernel", choices=("constants", "none"), default="constants",
                       help="null space of a --matrix input")
        s.add_argument("-o", "--output")
        s.set_defaults(func=func)
        if name == "solve":
            s.add_argument("--rhs-seed", type=int, default=ce.RHS_SEED)
            s.add_argument("--solution", action="store_true", help="include x in the output")

    w = sub.add_parser("sweep", help="eps x h uniformity sweep (CSV)")
    _add_mesh_args(w, grid=False)
    _add_solver_args(w)
    w.add_argument("--config")
    w.add_argument("--eps", dest="eps_list", type=_floats, help="comma-separated eps values")
    w.add_argument("--n", dest="n_list", type=_ints, help="comma-separated subdivisions")
    w.add_argument("--h", type=_floats, help="comma-separated mesh sizes (alternative to --n)")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("-o", "--output")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(2, f"{parser.prog} {args.command}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
