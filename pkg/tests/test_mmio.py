import numpy as np
import pytest

from amgcert.linalg import SparseMatrix
from amgcert.mmio import MatrixMarketError, read_matrix_market, write_matrix_market


def test_roundtrip_identity(tmp_path):
    p = tmp_path / "I.mtx"
    write_matrix_market(SparseMatrix.identity(3), p)
    assert np.array_equal(read_matrix_market(p).toarray(), np.eye(3))


def test_read_symmetric_lower_triangle(tmp_path):
    p = tmp_path / "s.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 -1\n2 2 2\n")
    A = read_matrix_market(p)
    assert A.toarray().tolist() == [[2, -1], [-1, 2]]
    assert A.symmetric


def test_empty_file(tmp_path):
    p = tmp_path / "e.mtx"
    p.write_text("")
    with pytest.raises(MatrixMarketError, match="missing header"):
        read_matrix_market(p)


def test_bad_header_line_number(tmp_path):
    p = tmp_path / "b.mtx"
    p.write_text("hello\n")
    with pytest.raises(MatrixMarketError, match="line 1"):
        read_matrix_market(p)


def test_out_of_range_index_line_number(tmp_path):
    p = tmp_path / "o.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n% c\n2 2 1\n3 1 1.0\n")
    with pytest.raises(MatrixMarketError, match="line 4"):
        read_matrix_market(p)


def test_malformed_entry(tmp_path):
    p = tmp_path / "m.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n")
    with pytest.raises(MatrixMarketError, match="line 3"):
        read_matrix_market(p)


def test_roundtrip_is_value_exact(tmp_path, rng):
    M = rng.standard_normal((6, 6)) * 10.0 ** rng.integers(-12, 12, (6, 6))
    M = M + M.T
    A = SparseMatrix.from_dense(M, symmetric=True)
    p = tmp_path / "r.mtx"
    write_matrix_market(A, p)
    B = read_matrix_market(p)
    assert np.array_equal(A.toarray(), B.toarray())
    assert "symmetric" in p.read_text().splitlines()[0]
