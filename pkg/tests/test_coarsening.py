import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amgcert.certify import fem_problem, laplacian_1d
from amgcert.coarsening import (
    CoverageError,
    build_strength,
    build_subdomains,
    interpolation_neighbors,
    mis_coarsen,
    splitting_from_coarse,
    strength_function,
    write_splitting,
)
from amgcert.linalg import SparseMatrix
from amgcert.mmatrix import is_m_matrix


def S(M):
    return SparseMatrix.from_dense(np.array(M, dtype=float), symmetric=True)


def path(k):
    A = np.zeros((k, k))
    for i in range(k - 1):
        A[i, i] += 1
        A[i + 1, i + 1] += 1
        A[i, i + 1] = A[i + 1, i] = -1
    return S(A)


def weighted_path():
    return S([[1, -1, 0, 0], [-1, 1.01, -0.01, 0], [0, -0.01, 1.01, -1], [0, 0, -1, 1]])


def test_strength_examples():
    A = weighted_path()
    assert strength_function(A, 0, 1) == pytest.approx(1)
    assert strength_function(A, 1, 2) == pytest.approx(0.01)
    assert strength_function(A, 2, 3) == pytest.approx(1)
    with pytest.raises(ValueError):
        strength_function(A, 1, 1)


def test_strength_pairs_theta():
    G, _ = build_strength(weighted_path(), 0.25)
    assert G.pairs == [(0, 1), (2, 3)]


def test_strength_zero_for_no_negative_row():
    A = S([[1, 0.5, 0], [0.5, 2, -1], [0, -1, 1]])
    assert strength_function(A, 0, 1) == 0.0
    G, _ = build_strength(A, 0.25)
    assert 0 in G.flagged


def test_theta_range():
    with pytest.raises(ValueError):
        build_strength(path(3), 1.0)


@pytest.mark.parametrize("mode", ["max", "min"])
@pytest.mark.parametrize("eps", [1.0, 1e-3])
def test_strength_symmetric_and_as_properties(mode, eps):
    A = fem_problem(8, eps, perturb=True).A_plus
    G, AS = build_strength(A, 0.25, mode)
    M = A.to_scipy()
    for i, j, s in zip(G.rows, G.cols, G.strength):
        assert strength_function(A, int(i), int(j), mode) == pytest.approx(s)
        assert strength_function(A, int(j), int(i), mode) == pytest.approx(s)
    adj = G.adjacency()
    assert (adj != adj.T).nnz == 0
    assert np.abs(AS @ np.ones(A.n_rows)).max() <= 1e-13
    assert is_m_matrix(AS)
    nbr = G.degrees()
    D, DS = M.diagonal(), AS.diagonal()
    keep = nbr > 0
    assert np.all(D[keep] <= nbr[keep] / 0.25 * DS[keep] * (1 + 1e-12))


def test_min_mode_is_subset_of_max():
    A = fem_problem(8, 1e-3).A_plus
    Gmax, _ = build_strength(A, 0.25, "max")
    Gmin, _ = build_strength(A, 0.25, "min")
    assert set(Gmin.pairs) <= set(Gmax.pairs)


def test_as_keeps_dirichlet_excess():
    A = laplacian_1d(5).A
    _, AS = build_strength(A, 0.25)
    assert np.allclose(AS @ np.ones(5), A @ np.ones(5))


def test_mis_five_path():
    G, _ = build_strength(path(5), 0.25)
    split = mis_coarsen(G)
    assert split.coarse.tolist() == [1, 3]
    assert split.fine.tolist() == [0, 2, 4]


def test_mis_no_edges_all_coarse():
    G, _ = build_strength(S(np.eye(4)), 0.25)
    assert mis_coarsen(G).coarse.tolist() == [0, 1, 2, 3]


def test_mis_two_cliques():
    A = S([[1, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 1, -1], [0, 0, -1, 1]])
    G, _ = build_strength(A, 0.25)
    assert mis_coarsen(G).coarse.tolist() == [0, 2]


@given(st.integers(2, 12), st.integers(0, 10_000))
def test_mis_is_maximal_independent(k, seed):
    rng = np.random.default_rng(seed)
    W = np.triu(rng.random((k, k)) * (rng.random((k, k)) < 0.4), 1)
    W = W + W.T
    A = S(np.diag(W.sum(1)) - W + 1e-3 * np.eye(k))
    G, _ = build_strength(A, 0.25)
    split = mis_coarsen(G)
    c = set(split.coarse.tolist())
    for i, j in G.pairs:
        assert not (i in c and j in c)
    for i in split.fine:
        assert c & set(G.neighbors(int(i)).tolist())
    assert sorted(c | set(split.fine.tolist())) == list(range(k))


def test_interpolation_neighbors():
    G, _ = build_strength(path(5), 0.25)
    assert interpolation_neighbors(G, "direct", 2) == {1, 3}
    assert interpolation_neighbors(G, "standard", 2) == {0, 1, 3, 4}
    Gi, _ = build_strength(S(np.eye(2)), 0.25)
    assert interpolation_neighbors(Gi, "standard", 0) == set()
    with pytest.raises(ValueError):
        interpolation_neighbors(G, "bogus", 2)


def test_subdomains_direct_path():
    G, _ = build_strength(path(5), 0.25)
    subs, C_o = build_subdomains(mis_coarsen(G), G, "direct")
    assert [s.members.tolist() for s in subs] == [[1, 0, 2], [3, 2, 4]]
    assert C_o == 2


def test_subdomains_single_constant():
    G, _ = build_strength(path(3), 0.25)
    subs, C_o = build_subdomains(mis_coarsen(G), G, "direct")
    assert C_o == 1 and subs[0].members.tolist() == [1, 0, 2]


def test_subdomains_overlap_three():
    G, _ = build_strength(path(7), 0.25)
    subs, C_o = build_subdomains(splitting_from_coarse([1, 3, 5], 7), G, "standard")
    assert C_o == 3


def test_coverage_error():
    G, _ = build_strength(path(5), 0.25)
    with pytest.raises(CoverageError, match="standard scheme"):
        build_subdomains(splitting_from_coarse([0], 5), G, "direct")


def test_fem_coverage_and_determinism(tmp_path):
    A = fem_problem(8, 1e-4, perturb=True).A_plus
    out = []
    for _ in range(2):
        G, _ = build_strength(A, 0.25)
        split = mis_coarsen(G)
        subs, C_o = build_subdomains(split, G, "standard")
        p = tmp_path / f"s{len(out)}.json"
        write_splitting(p, split, 0.25, "standard", subs)
        out.append(p.read_bytes())
        covered = np.zeros(A.n_rows, bool)
        for s in subs:
            covered[s.members] = True
        assert covered.all()
    assert out[0] == out[1]


def test_subdomains_weighted_four_path():
    G, _ = build_strength(weighted_path(), 0.25)
    split = mis_coarsen(G)
    assert split.coarse.tolist() == [0, 2]
    subs, C_o = build_subdomains(split, G, "direct")
    assert [s.members.tolist() for s in subs] == [[0, 1], [2, 3]] and C_o == 1


def test_subdomains_forced_five_path():
    G, _ = build_strength(path(5), 0.25)
    subs, C_o = build_subdomains(splitting_from_coarse([0, 2, 4], 5), G, "direct")
    assert [s.members.tolist() for s in subs] == [[0, 1], [2, 1, 3], [4, 3]]
    assert C_o == 3
