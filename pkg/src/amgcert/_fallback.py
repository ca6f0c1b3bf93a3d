"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and same floating-point operation order, so results agree
with the extension to rounding level. Used when the extension is not built
or when ``AMGCERT_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np


def csr_spmv(indptr, indices, data, x):
    n = len(indptr) - 1
    y = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc = acc + data[k] * x[indices[k]]
        y[i] = acc
    return y


def csr_lower_solve(indptr, indices, data, r):
    n = len(indptr) - 1
    x = np.empty(n)
    for i in range(n):
        acc = r[i]
        d = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j < i:
                acc = acc - data[k] * x[j]
            elif j == i:
                d = data[k]
        if d == 0.0:
            raise ZeroDivisionError(f"zero diagonal in row {i}")
        x[i] = acc / d
    return x


def csr_upper_solve(indptr, indices, data, r):
    n = len(indptr) - 1
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        acc = r[i]
        d = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j > i:
                acc = acc - data[k] * x[j]
            elif j == i:
                d = data[k]
        if d == 0.0:
            raise ZeroDivisionError(f"zero diagonal in row {i}")
        x[i] = acc / d
    return x


def _off_norm(a):
    return math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))


def jacobi_eigh(a, v, tol, max_sweeps):
    """Cyclic Jacobi on ``a`` in place; rotations accumulate into ``v``."""
    n = a.shape[0]
    for sweep in range(max_sweeps + 1):
        if _off_norm(a) <= tol:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                g = 100.0 * abs(apq)
                if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                arp = a[:, p].copy()
                arq = a[:, q].copy()
                newp = c * arp - s * arq
                newq = s * arp + c * arq
                a[:, p] = newp
                a[p, :] = newp
                a[:, q] = newq
                a[q, :] = newq
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return -1
