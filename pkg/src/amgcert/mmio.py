"""Matrix Market coordinate files (real, general or symmetric)."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .linalg import SparseMatrix

HEADER = "%%MatrixMarket matrix coordinate real"


class MatrixMarketError(ValueError):
    pass


def write_matrix_market(A: SparseMatrix, path, symmetric=None):
    """Write ``A`` with 1-based indices and 17 significant digits.

    Symmetric matrices store only the lower triangle.
    """
    if symmetric is None:
        symmetric = A.symmetric or A.is_symmetric()
    M = A.to_scipy().tocoo()
    rows, cols, vals = M.row, M.col, M.data
    if symmetric:
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    order = np.lexsort((rows, cols))
    lines = [f"{HEADER} {'symmetric' if symmetric else 'general'}",
             f"{A.n_rows} {A.n_cols} {len(vals)}"]
    lines += [f"{rows[k] + 1} {cols[k] + 1} {vals[k]:.17g}" for k in order]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path) -> SparseMatrix:
    with open(path) as fh:
        text = fh.read().splitlines()
    if not text or not text[0].strip():
        raise MatrixMarketError("line 1: missing header")
    head = text[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket":
        raise MatrixMarketError(f"line 1: missing header (got {text[0]!r})")
    obj, fmt, field, symm = (h.lower() for h in head[1:])
    if obj != "matrix" or fmt != "coordinate" or field not in ("real", "integer"):
        raise MatrixMarketError(f"line 1: unsupported format {' '.join(head[1:])!r}")
    if symm not in ("general", "symmetric"):
        raise MatrixMarketError(f"line 1: unsupported symmetry {symm!r}")

    lineno = 1
    body = iter(enumerate(text[1:], start=2))
    size = None
    for lineno, line in body:
        if line.startswith("%") or not line.strip():
            continue
        try:
            size = tuple(int(t) for t in line.split())
        except ValueError:
            raise MatrixMarketError(f"line {lineno}: malformed size line {line!r}") from None
        if len(size) != 3:
            raise MatrixMarketError(f"line {lineno}: size line needs 3 integers")
        break
    if size is None:
        raise MatrixMarketError(f"line {lineno}: missing size line")
    m, n, nnz = size

    rows, cols, vals = [], [], []
    for lineno, line in body:
        if line.startswith("%") or not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"line {lineno}: expected 'row col value'")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"line {lineno}: malformed entry {line!r}") from None
        if not (1 <= i <= m and 1 <= j <= n):
            raise MatrixMarketError(f"line {lineno}: index ({i}, {j}) out of range for {m}x{n}")
        if symm == "symmetric" and j > i:
            raise MatrixMarketError(f"line {lineno}: symmetric file stores upper entry ({i}, {j})")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(vals) != nnz:
        raise MatrixMarketError(f"line {lineno}: expected {nnz} entries, found {len(vals)}")

    rows, cols, vals = np.array(rows, int), np.array(cols, int), np.array(vals)
    if symm == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    M = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
    return SparseMatrix.from_scipy(M, symmetric=(symm == "symmetric"))
