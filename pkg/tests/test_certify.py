import json
import math

import numpy as np
import pytest

from amgcert.certify import (
    CSV_HEADER,
    Config,
    Problem,
    build_pipeline,
    certify,
    csv_line,
    fem_problem,
    laplacian_1d,
    linear_interpolation_1d,
    solve,
    write_certificate,
)

CLAUSES = ["identity", "sandwich", "rate_bound", "additive", "approximation"]


def status(cert):
    return {c.name: c.passed for c in cert.clauses}


def test_config_validation():
    for bad in (dict(theta=0.0), dict(theta=1.0), dict(scheme="x"), dict(smoother="sor"),
                dict(strength="avg"), dict(tol=2.0), dict(maxit=0)):
        with pytest.raises(ValueError):
            Config(**bad).validate()


def test_laplacian_1d_and_interpolation():
    A = laplacian_1d(5).A.toarray()
    assert A[0].tolist() == [2, -1, 0, 0, 0]
    P = linear_interpolation_1d(5)
    assert P.tolist() == [[0.5, 0], [1, 0], [0.5, 0.5], [0, 1], [0, 0.5]]
    with pytest.raises(ValueError):
        linear_interpolation_1d(6)


def test_dirichlet_a_plus_is_restriction():
    n = fem_problem(8, 1e-2, bc="dirichlet", perturb=True)
    neu = fem_problem(8, 1e-2, bc="neumann", perturb=True)
    assert n.kernel is None and neu.kernel is not None
    assert n.n == 49 and neu.n == 81


def test_poisson_all_clauses_pass():
    cert = certify(fem_problem(8, 1.0))
    assert [c.name for c in cert.clauses] == CLAUSES
    assert all(status(cert).values()) and cert.valid
    assert 0 <= cert.normE2 < 1
    for k in ("normE2", "K_Vc", "K_VcD", "c_D", "c_up", "mu_c", "kappa_additive", "kappa_bound"):
        v = getattr(cert, k)
        assert math.isfinite(v) and v >= 0


def test_jump_uniform_with_poisson():
    c1 = certify(fem_problem(8, 1.0))
    c8 = certify(fem_problem(8, 1e-8))
    assert c8.valid
    assert abs(c8.normE2 - c1.normE2) <= 0.05


def test_full_coarse_degenerate():
    cert = certify(laplacian_1d(7), Config(full_coarse=True))
    assert cert.normE2 <= 1e-12 and cert.K_Vc <= 1e-12
    assert cert.valid
    assert cert.theoretical_rate_bound == 0.0


def test_custom_p_skips_structural_clauses():
    pb = laplacian_1d(5)
    pb = Problem(pb.name, pb.A, pb.A_plus, None, pb.h, 1.0, pb.meta, P=linear_interpolation_1d(5))
    cert = certify(pb)
    st = status(cert)
    assert st["identity"] and st["sandwich"]
    assert st["rate_bound"] is None and st["additive"] is None and st["approximation"] is None
    assert cert.valid
    doc = cert.to_json()
    assert [c["status"] for c in doc["clauses"]][2:] == ["skipped"] * 3


def test_constants_reduce_to_overlap_for_m_matrix():
    cert = certify(laplacian_1d(15))
    assert cert.gamma_A == pytest.approx(1.0, rel=1e-10)
    assert cert.C_p1 == pytest.approx(cert.C_o)


def test_min_strength_gives_uniform_mu():
    mus = [certify(fem_problem(8, e), Config(strength="min")).mu_c for e in (1.0, 1e-4, 1e-8)]
    assert max(mus) - min(mus) <= 1e-10
    assert mus[0] > 0.1


def test_invalid_certificate_reports_failure():
    cert = certify(fem_problem(4, 1.0))
    cert.clauses[0].passed = False
    assert not cert.valid and cert.failing()[0].name == "identity"


def test_solve_converges():
    pl = build_pipeline(fem_problem(8, 1e-4))
    res = solve(pl)
    assert res.converged and res.iterations <= 20


def test_certificate_json_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_certificate(a, certify(fem_problem(4, 1e-2, perturb=True)))
    write_certificate(b, certify(fem_problem(4, 1e-2, perturb=True)))
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["valid"] is True and doc["config"]["theta"] == 0.25
    assert doc["problem"]["eps"] == 0.01 and doc["problem"]["h"] == 0.25


def test_csv_line_fields():
    cert = certify(fem_problem(4, 1.0))
    line = csv_line(1.0, 0.25, 0.25, cert, 5)
    assert len(line.split(",")) == len(CSV_HEADER.split(","))
    assert line.endswith(",5")
