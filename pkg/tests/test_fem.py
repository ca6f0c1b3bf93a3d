import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amgcert.fem import (
    MeshError,
    TriMesh,
    apply_dirichlet,
    assemble_stiffness,
    cotangent_weights,
    generate_structured_mesh,
    local_stiffness,
    read_mesh,
    shape_regularity,
    write_mesh,
)
from amgcert.linalg import SparseMatrix, sym_eig_dense

REF = TriMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], [1.0])


def test_counts_n2():
    m = generate_structured_mesh(2)
    assert m.n_triangles == 8 and m.n_vertices == 9 and np.all(m.coeff == 1)


def test_interface_barycenter_count():
    m = generate_structured_mesh(2, interface=(0, 0, 0.5, 0.5), eps=0.01)
    assert np.sum(m.coeff == 0.01) == 2


def test_n1_rejected():
    with pytest.raises(MeshError):
        generate_structured_mesh(1)


def test_unaligned_interface_rejected():
    with pytest.raises(MeshError, match="aligned"):
        generate_structured_mesh(4, interface=(0.1, 0.25, 0.75, 0.75))


def test_diagonal_direction():
    m = generate_structured_mesh(2)
    t = m.triangles[0]
    assert set(map(tuple, m.vertices[t])) == {(0, 0), (0.5, 0), (0.5, 0.5)}


def test_reference_local_stiffness():
    K = local_stiffness(REF.vertices)
    assert np.allclose(K, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)
    A, table = assemble_stiffness(REF)
    assert np.allclose(A.toarray(), K, atol=1e-15)


def test_hypotenuse_weight_zero():
    w, ang = cotangent_weights(REF)
    assert ang[0, 0] == pytest.approx(math.pi / 2)
    assert abs(w[0, 0]) < 1e-16
    A, _ = assemble_stiffness(REF)
    assert A.toarray()[1, 2] == 0.0


@pytest.mark.parametrize("perturb", [False, True])
@pytest.mark.parametrize("eps", [1.0, 1e-4])
def test_assembled_properties(perturb, eps):
    m = generate_structured_mesh(8, interface=(0.25, 0.25, 0.75, 0.75), eps=eps, perturb=perturb)
    A, table = assemble_stiffness(m)
    assert A.symmetric and np.array_equal(A.toarray(), A.toarray().T)
    assert np.abs(A @ np.ones(A.n_rows)).max() <= 1e-14
    w = sym_eig_dense(A.toarray()).eigenvalues
    assert w[0] >= -1e-12 * np.abs(w).max()
    assert w[1] > 1e-10
    assert np.abs(table.laplacian().toarray() - A.toarray()).max() <= 1e-14


def test_element_oracle_matches_cotangent_assembly():
    m = generate_structured_mesh(4, interface=(0.25, 0.25, 0.75, 0.75), eps=0.3, perturb=True)
    A, _ = assemble_stiffness(m)
    ref = np.zeros((m.n_vertices,) * 2)
    for t, a in zip(m.triangles, m.coeff):
        ref[np.ix_(t, t)] += local_stiffness(m.vertices[t], a)
    off = ~np.eye(m.n_vertices, dtype=bool)
    assert np.abs(A.toarray()[off] - ref[off]).max() <= 1e-14


def test_edge_table_sums_contributions():
    m = generate_structured_mesh(4, perturb=True)
    _, table = assemble_stiffness(m)
    acc = np.zeros(len(table.edges))
    np.add.at(acc, table.contrib_edge, table.contrib_omega)
    assert np.array_equal(acc, table.omega)
    assert np.allclose(table.contrib_omega, 0.5 * m.coeff[table.contrib_tri] / np.tan(table.contrib_angle))


def test_perturbed_mesh_has_positive_offdiagonals():
    A, table = assemble_stiffness(generate_structured_mesh(8, perturb=True))
    assert len(table.negative_edges()) > 0
    assert A.to_scipy().tocoo().data.max() > 0


def test_perturbation_keeps_boundary_and_interface():
    iface = (0.25, 0.25, 0.75, 0.75)
    m0 = generate_structured_mesh(8, interface=iface)
    m1 = generate_structured_mesh(8, interface=iface, perturb=True)
    for axis, vals in ((0, (0.0, 1.0, 0.25, 0.75)), (1, (0.0, 1.0, 0.25, 0.75))):
        for v in vals:
            on = np.isclose(m0.vertices[:, axis], v)
            if v in (0.25, 0.75):
                other = m0.vertices[:, 1 - axis]
                on &= (other >= 0.25 - 1e-12) & (other <= 0.75 + 1e-12)
            assert np.allclose(m1.vertices[on, axis], v)
    shift = np.linalg.norm(m1.vertices - m0.vertices, axis=1)
    assert shift.max() <= 0.25 / 8 + 1e-15 and shift.max() > 0


def test_perturbation_deterministic():
    a = generate_structured_mesh(8, perturb=True)
    b = generate_structured_mesh(8, perturb=True)
    assert np.array_equal(a.vertices, b.vertices)


@given(st.floats(0.01, 100.0))
def test_coefficient_scaling(c):
    m = generate_structured_mesh(4, perturb=True)
    A, _ = assemble_stiffness(m)
    m2 = TriMesh(m.vertices, m.triangles, m.coeff * c)
    A2, _ = assemble_stiffness(m2)
    assert np.allclose(A2.toarray(), c * A.toarray(), rtol=1e-14, atol=0)


def test_degenerate_triangle():
    with pytest.raises(MeshError, match="degenerate"):
        assemble_stiffness(TriMesh([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]], [1.0]))


def test_dirichlet_empty_boundary():
    A, _ = assemble_stiffness(generate_structured_mesh(2))
    B, interior = apply_dirichlet(A, [])
    assert np.array_equal(B.toarray(), A.toarray()) and len(interior) == 9


def test_dirichlet_path():
    A = SparseMatrix.from_dense(np.array([[1.0, -1, 0], [-1, 2, -1], [0, -1, 1]]), symmetric=True)
    B, interior = apply_dirichlet(A, [0, 2])
    assert B.toarray().tolist() == [[2.0]] and interior.tolist() == [1]


def test_dirichlet_spd_and_empty_interior():
    m = generate_structured_mesh(4)
    A, _ = assemble_stiffness(m)
    B, _ = apply_dirichlet(A, m.boundary_vertices())
    assert sym_eig_dense(B.toarray()).eigenvalues[0] > 0
    with pytest.raises(ValueError, match="empty interior"):
        apply_dirichlet(A, np.arange(A.n_rows))


def test_shape_regularity_right_triangle():
    r = shape_regularity(REF)
    assert r.diameter[0] == pytest.approx(math.sqrt(2))
    assert r.size[0] == pytest.approx(math.sqrt(0.5))
    assert r.inner[0] == pytest.approx(2 - math.sqrt(2))
    assert r.sigma == pytest.approx(math.sqrt(2) / (2 - math.sqrt(2)))


def test_shape_regularity_equilateral():
    m = TriMesh([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]], [[0, 1, 2]], [1.0])
    assert shape_regularity(m).sigma == pytest.approx(math.sqrt(3))


def test_shape_regularity_structured_uniform_and_ordered():
    r = shape_regularity(generate_structured_mesh(8))
    assert np.allclose(r.ratio, r.ratio[0])
    rp = shape_regularity(generate_structured_mesh(8, perturb=True))
    for rep in (r, rp):
        assert np.all(rep.inner <= rep.size + 1e-15)
        assert np.all(rep.size <= rep.diameter)
        assert np.all(rep.diameter <= rep.sigma * rep.inner * (1 + 1e-14))


def test_perturbed_sigma_independent_of_h():
    sig = [shape_regularity(generate_structured_mesh(n, interface=(0.25, 0.25, 0.75, 0.75),
                                                     perturb=True)).sigma for n in (16, 32)]
    assert sig[0] == pytest.approx(sig[1], rel=1e-12)


def test_mesh_json_roundtrip(tmp_path):
    m = generate_structured_mesh(4, interface=(0, 0, 0.5, 0.5), eps=1e-3, perturb=True)
    p = tmp_path / "m.json"
    write_mesh(m, p)
    r = read_mesh(p)
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.coeff, m.coeff)


def test_mesh_json_missing_key(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"vertices": []}')
    with pytest.raises(MeshError, match="missing key"):
        read_mesh(p)


def test_disconnected_mesh_rejected():
    m = TriMesh([[0, 0], [1, 0], [0, 1], [5, 5], [6, 5], [5, 6]], [[0, 1, 2], [3, 4, 5]], [1.0, 1.0])
    with pytest.raises(MeshError, match="connected"):
        m.validate()
