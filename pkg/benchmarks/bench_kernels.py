"""Compare the compiled and pure-Python kernel backends.

Run ``python benchmarks/bench_kernels.py`` after building the extension.
Reports the median of several repeats and checks both backends agree.
"""
import argparse
import time

import numpy as np

from amgcert import _backend
from amgcert.certify import fem_problem


def timeit(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return float(np.median(times))


def bench(n_mesh, n_eig, repeat):
    A = fem_problem(n_mesh).A
    args = (A.row_offsets, A.col_indices, A.values)
    x = np.random.default_rng(0).standard_normal(A.n_rows)
    S = np.random.default_rng(1).standard_normal((n_eig, n_eig))
    S = S + S.T
    fro = np.linalg.norm(S)

    backends = {"python": _backend.get("python")}
    try:
        backends["cython"] = _backend.get("cython")
    except ImportError:
        print("compiled extension not available; timing the fallback only")

    results, outputs = {}, {}
    for name, k in backends.items():
        def eig():
            a = S.copy()
            v = np.eye(n_eig)
            k.jacobi_eigh(a, v, 1e-14 * fro, 100)
            return np.sort(np.diag(a))
        cases = {
            f"spmv (n={A.n_rows})": lambda: np.asarray(k.csr_spmv(*args, x)),
            f"gauss-seidel sweep (n={A.n_rows})": lambda: np.asarray(k.csr_lower_solve(*args, x)),
            f"jacobi eigensolver ({n_eig}x{n_eig})": eig,
        }
        for case, fn in cases.items():
            results[(case, name)] = timeit(fn, repeat)
            outputs[(case, name)] = fn()

    print(f"{'kernel':38s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for case in dict.fromkeys(c for c, _ in results):
        py = results[(case, "python")]
        cy = results.get((case, "cython"))
        if cy is None:
            print(f"{case:38s} {py:12.3e} {'-':>12s} {'-':>9s}")
            continue
        diff = np.abs(outputs[(case, "python")] - outputs[(case, "cython")]).max()
        print(f"{case:38s} {py:12.3e} {cy:12.3e} {py / cy:8.1f}x   max diff {diff:.1e}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mesh", type=int, default=64, help="mesh subdivisions for sparse kernels")
    p.add_argument("--eig", type=int, default=60, help="dense eigenproblem size")
    p.add_argument("--repeat", type=int, default=3)
    a = p.parse_args()
    bench(a.mesh, a.eig, a.repeat)


if __name__ == "__main__":
    main()
