"""Two-level AMG with M-matrix relatives, local coarse spaces and exact convergence certificates."""
from ._backend import BACKEND, COMPILED
from .certify import Config, ConvergenceCertificate, Problem, build_pipeline, fem_problem, laplacian_1d
from .linalg import SparseMatrix, gen_eig_extremes, pseudo_solve, spmv, sym_eig_dense, triple_product

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "COMPILED", "Config", "ConvergenceCertificate", "Problem", "SparseMatrix",
    "build_pipeline", "fem_problem", "gen_eig_extremes", "laplacian_1d",
    "pseudo_solve", "spmv", "sym_eig_dense", "triple_product",
]
