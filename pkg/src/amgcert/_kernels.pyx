# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: CSR products, triangular sweeps, cyclic Jacobi."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def csr_spmv(const long[::1] indptr, const int[::1] indices,
             const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc = acc + data[k] * x[indices[k]]
        y[i] = acc
    return out


def csr_lower_solve(const long[::1] indptr, const int[::1] indices,
                    const double[::1] data, const double[::1] r):
    """Solve (D + L) x = r, L the strict lower triangle."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k, j
    cdef double acc, d
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
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
    return out


def csr_upper_solve(const long[::1] indptr, const int[::1] indices,
                    const double[::1] data, const double[::1] r):
    """Solve (D + U) x = r, U the strict upper triangle."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k, j
    cdef double acc, d
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
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
    return out


cdef double _off_norm(double[:, ::1] a, Py_ssize_t n):
    cdef Py_ssize_t i, j
    cdef double s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += a[i, j] * a[i, j]
    return sqrt(2.0 * s)


def jacobi_eigh(double[:, ::1] a, double[:, ::1] v, double tol, int max_sweeps):
    """Cyclic Jacobi on ``a`` in place; rotations accumulate into ``v``.

    Returns the number of sweeps performed, or -1 without convergence.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, r
    cdef int sweep
    cdef double apq, app, aqq, theta, t, c, s, g, arp, arq, vrp, vrq
    cdef double off

    for sweep in range(max_sweeps + 1):
        off = _off_norm(a, n)
        if off <= tol:
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
                g = 100.0 * fabs(apq)
                if sweep > 3 and fabs(app) + g == fabs(app) and fabs(aqq) + g == fabs(aqq):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for r in range(n):
                    if r == p or r == q:
                        continue
                    arp = a[r, p]
                    arq = a[r, q]
                    a[r, p] = c * arp - s * arq
                    a[p, r] = a[r, p]
                    a[r, q] = s * arp + c * arq
                    a[q, r] = a[r, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    vrp = v[r, p]
                    vrq = v[r, q]
                    v[r, p] = c * vrp - s * vrq
                    v[r, q] = s * vrp + c * vrq
    return -1
