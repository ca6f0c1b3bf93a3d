import json

import pytest

from amgcert.cli import main
from amgcert.mmio import read_matrix_market


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_mesh_triangle_count(tmp_path):
    out = tmp_path / "m.json"
    assert run(["mesh", "--n", "8", "--eps", "1e-4", "--interface", "0,0,0.5,0.5", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["triangles"]) == 128
    assert sum(c == 1e-4 for c in doc["coeff"]) == 32


def test_assemble_from_mesh(tmp_path):
    m, a = tmp_path / "m.json", tmp_path / "a.mtx"
    assert run(["mesh", "--n", "4", "-o", str(m)]) == 0
    assert run(["assemble", "--mesh", str(m), "-o", str(a)]) == 0
    assert read_matrix_market(a).n_rows == 25


def test_certify_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mesh": {"n": 8, "eps": 1.0}, "theta": 0.25,
                               "smoother": "sym_gauss_seidel"}))
    out = tmp_path / "cert.json"
    assert run(["certify", "--config", str(cfg), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert all(c["status"] == "pass" for c in doc["clauses"])
    assert doc["config"]["n"] == 8 and doc["config"]["theta"] == 0.25


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 8, "eps": 1.0}))
    out = tmp_path / "cert.json"
    assert run(["certify", "--config", str(cfg), "--n", "4", "-o", str(out)]) == 0
    assert json.loads(out.read_text())["config"]["n"] == 4


def test_certify_matrix_input(tmp_path):
    a, out = tmp_path / "a.mtx", tmp_path / "c.json"
    assert run(["assemble", "--n", "4", "--bc", "dirichlet", "-o", str(a)]) == 0
    assert run(["certify", "--matrix", str(a), "--kernel", "none", "-o", str(out)]) == 0
    assert json.loads(out.read_text())["valid"] is True


@pytest.mark.parametrize("argv", [
    ["certify", "--theta", "1.5"],
    ["certify", "--eps", "0"],
    ["mesh", "--n", "1"],
    ["mesh", "--n", "6", "--interface", "0.1,0.1,0.5,0.5"],
    ["certify", "--config", "/nonexistent/c.json"],
    ["certify", "--matrix", "/nonexistent/a.mtx"],
    ["sweep", "--h", "0.3"],
    ["bogus"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"thetta": 0.3}))
    assert run(["certify", "--config", str(cfg)]) == 2


def test_coarsen_and_solve(tmp_path):
    c, s = tmp_path / "c.json", tmp_path / "s.json"
    assert run(["coarsen", "--n", "8", "--scheme", "direct", "-o", str(c)]) == 0
    doc = json.loads(c.read_text())
    assert doc["scheme"] == "direct" and doc["C_o"] >= 1
    assert sorted(doc["coarse"] + doc["fine"]) == list(range(81))
    assert run(["solve", "--n", "8", "--eps", "1e-4", "-o", str(s)]) == 0
    assert json.loads(s.read_text())["converged"] is True


def test_solve_nonconvergence_exit_1(tmp_path):
    assert run(["solve", "--n", "8", "--maxit", "1", "-o", str(tmp_path / "s.json")]) == 1


def test_sweep_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--eps", "1,1e-4", "--n", "4,8"]
    assert run(argv + ["-o", str(a)]) == 0
    assert run(argv + ["--workers", "2", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "eps,h,theta,normE2,K_Vc,K_VcD,mu_c,C_o,kappa,iters"
    assert [l.split(",")[:2] for l in lines[1:]] == [
        ["1.0", "0.25"], ["1.0", "0.125"], ["0.0001", "0.25"], ["0.0001", "0.125"]]


def test_sweep_twelve_rows(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["sweep", "--eps", "1,1e-2,1e-4,1e-8", "--n", "8,16,32", "--workers", "2",
                "-o", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 13
