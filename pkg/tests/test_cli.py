"""End-to-end tests for the command-line front end."""

import json

import pytest

from homlin.circuit import FNode, parse_circuit, print_circuit, tree_to_circuit
from homlin.cli import main
from homlin.families import gen_C_comb
from homlin.poly import format_poly, parse_poly


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def product_circ(tmp_path):
    c = tree_to_circuit(FNode.mul(FNode.var("x1"), FNode.var("x2")), "arity2")
    path = tmp_path / "prod.circ"
    path.write_text(print_circuit(c))
    return str(path)


@pytest.fixture
def negcube_circ(tmp_path):
    c = tree_to_circuit(FNode.negcube(FNode.var("x1")), "addNegCube")
    path = tmp_path / "cube.circ"
    path.write_text(print_circuit(c))
    return str(path)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def test_gen_matches_oracle(capsys, tmp_path):
    out = tmp_path / "c53.txt"
    code, _o, _e = run(capsys, "gen", "--family", "C", "--n", "5", "--d", "3",
                       "--out", str(out))
    assert code == 0
    assert parse_poly(out.read_text()) == gen_C_comb(5, 3)


def test_gen_stdout(capsys):
    code, out, _ = run(capsys, "gen", "--family", "P", "--n", "2", "--d", "3")
    assert code == 0
    assert parse_poly(out) == parse_poly("x1^3 + x2^3")


def test_gen_invalid_parameters_exit_2(capsys):
    code, _o, err = run(capsys, "gen", "--family", "C", "--n", "0", "--d", "1")
    assert code == 2 and "error" in err


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_against_oracle(capsys, tmp_path):
    f = tmp_path / "c.txt"
    f.write_text(format_poly(gen_C_comb(5, 3)) + "\n")
    code, out, _ = run(capsys, "verify", "--in", str(f),
                       "--against-oracle", "Cmatrix", "--n", "5", "--d", "3")
    assert code == 0 and "pass" in out


def test_verify_against_oracle_fail(capsys, tmp_path):
    f = tmp_path / "c.txt"
    f.write_text(format_poly(gen_C_comb(5, 3)) + "\n")
    code, out, _ = run(capsys, "verify", "--in", str(f),
                       "--against-oracle", "P", "--n", "5", "--d", "3")
    assert code == 1 and "FAIL" in out


def test_verify_exact_and_random_modes(capsys, tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    a.write_text("x1^2 + 2*x1*x2 + x2^2\n")
    b.write_text("(unused)")
    b.write_text(format_poly(parse_poly("x1 + x2") ** 2) + "\n")
    code, out, _ = run(capsys, "verify", "--mode", "exact",
                       "--in", str(a), "--against", str(b))
    assert code == 0
    code, out, _ = run(capsys, "verify", "--mode", "random", "--seed", "5",
                       "--in", str(a), "--against", str(b))
    assert code == 0 and "random(" in out


def test_verify_circuit_against_polynomial(capsys, product_circ, tmp_path):
    t = tmp_path / "t.txt"
    t.write_text("x1*x2\n")
    code, _o, _e = run(capsys, "verify", "--mode", "exact",
                       "--in", product_circ, "--against", str(t))
    assert code == 0


def test_verify_missing_reference_exit_2(capsys, product_circ):
    code, _o, err = run(capsys, "verify", "--in", product_circ)
    assert code == 2 and "against" in err


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------


def test_transform_brent_roundtrip(capsys, product_circ, tmp_path):
    out = tmp_path / "b.circ"
    code, stdout, _ = run(capsys, "transform", "--pass", "brent",
                          "--in", product_circ, "--out", str(out))
    assert code == 0 and "pass brent" in stdout and "bound" in stdout
    reparsed = parse_circuit(out.read_text())
    assert reparsed.eval() == parse_poly("x1*x2")


def test_transform_parity_writes_components(capsys, tmp_path):
    t = FNode.add(FNode.var("x1"), FNode.mul(FNode.var("x1"), FNode.var("x2")))
    path = tmp_path / "mixed.circ"
    path.write_text(print_circuit(tree_to_circuit(t, "arity2")))
    out = tmp_path / "par"
    code, stdout, _ = run(capsys, "transform", "--pass", "parity",
                          "--in", str(path), "--out", str(out))
    assert code == 0
    odd = parse_circuit((tmp_path / "par.odd").read_text())
    even = parse_circuit((tmp_path / "par.even").read_text())
    assert odd.eval() == parse_poly("x1")
    assert even.eval() == parse_poly("x1*x2")


def test_transform_rejects_polynomial_input(capsys, tmp_path):
    p = tmp_path / "p.txt"
    p.write_text("x1 + x2\n")
    code, _o, err = run(capsys, "transform", "--pass", "brent", "--in", str(p))
    assert code == 2 and "circuit" in err


def test_transform_precondition_violation_exit_2(capsys, negcube_circ):
    # brent expects the arity-2 basis
    code, _o, err = run(capsys, "transform", "--pass", "brent",
                        "--in", negcube_circ)
    assert code == 2 and "error" in err


# ---------------------------------------------------------------------------
# compile
# ---------------------------------------------------------------------------


def test_compile_offdiag_with_exact_verify(capsys, product_circ, tmp_path):
    out = tmp_path / "w.txt"
    code, stdout, _ = run(capsys, "compile", "--target", "offdiag3", "1", "3",
                          "--in", product_circ, "--verify", "exact",
                          "--out", str(out))
    assert code == 0
    assert "r = 4" in stdout and "pass" in stdout
    assert out.read_text().startswith("dim 3")


def test_compile_trace3_border_and_mod_eps(capsys, product_circ, tmp_path):
    out = tmp_path / "w.txt"
    code, stdout, _ = run(capsys, "compile", "--target", "trace3",
                          "--in", product_circ, "--verify", "border",
                          "--out", str(out))
    assert code == 0 and "verdict=pass" in stdout
    code, stdout, _ = run(capsys, "compile", "--target", "trace3",
                          "--in", product_circ, "--verify", "border",
                          "--mod-eps", "1", "--out", str(out))
    assert code == 0 and "verdict=pass" in stdout


def test_compile_continuant(capsys, negcube_circ, tmp_path):
    out = tmp_path / "p.txt"
    code, stdout, _ = run(capsys, "compile", "--target", "continuant",
                          "--in", negcube_circ, "--verify", "border",
                          "--out", str(out))
    assert code == 0 and "degree 3" in stdout
    assert out.read_text().startswith("projection C")


def test_compile_unknown_target_exit_2(capsys, product_circ):
    code, _o, err = run(capsys, "compile", "--target", "nonsense",
                        "--in", product_circ)
    assert code == 2 and "target" in err


def test_compile_malformed_circuit_exit_2_with_location(capsys, tmp_path):
    bad = tmp_path / "bad.circ"
    bad.write_text("shape formula\nbasis arity2\ngate g1 = wat\n")
    code, _o, err = run(capsys, "compile", "--target", "trace3", "--in", str(bad))
    assert code == 2 and "line 3" in err


def test_compile_wrong_basis_exit_2(capsys, negcube_circ):
    code, _o, err = run(capsys, "compile", "--target", "trace3",
                        "--in", negcube_circ)
    assert code == 2


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------


def test_audit_pass_and_fail(capsys, tmp_path):
    ok = tmp_path / "ok.json"
    ok.write_text(json.dumps({"value": 58, "bound": 60}))
    assert run(capsys, "audit", "--in", str(ok))[0] == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"value": 70, "bound": 64}))
    assert run(capsys, "audit", "--in", str(bad))[0] == 1


def test_audit_malformed_json_exit_2(capsys, tmp_path):
    bad = tmp_path / "nope.json"
    bad.write_text("{")
    assert run(capsys, "audit", "--in", str(bad))[0] == 2


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def test_pipeline_trace3(capsys, product_circ, tmp_path):
    out = tmp_path / "run1"
    code, stdout, _ = run(capsys, "pipeline", "--in", product_circ,
                          "--target", "trace3", "--out", str(out))
    assert code == 0
    assert (out / "word.txt").exists()
    assert (out / "report.txt").exists()
    assert "verify (border): pass" in (out / "report.txt").read_text()
    assert (out / "01-brent.circ").exists()


def test_pipeline_continuant(capsys, tmp_path):
    t = FNode.mul3(FNode.var("x1"), FNode.var("x2"), FNode.var("x3"))
    path = tmp_path / "m3.circ"
    path.write_text(print_circuit(tree_to_circuit(t, "arity3")))
    out = tmp_path / "run"
    code, stdout, _ = run(capsys, "pipeline", "--in", str(path),
                          "--target", "continuant", "--out", str(out))
    assert code == 0
    assert (out / "projection.txt").exists()
    report = (out / "report.txt").read_text()
    assert "brent3" in report and "add-negcube" in report
    assert "verify (border): pass" in report


def test_pipeline_deterministic_artifacts(capsys, product_circ, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code, _o, _e = run(capsys, "pipeline", "--in", product_circ,
                           "--target", "trace3", "--out", str(out), "--seed", "3")
        assert code == 0
        outs.append(out)
    for art in ("word.txt", "report.txt", "01-brent.circ", "02-ihl-formula.circ"):
        assert (outs[0] / art).read_bytes() == (outs[1] / art).read_bytes()


def test_pipeline_empty_is_header_only(capsys, product_circ, tmp_path):
    out = tmp_path / "empty"
    code, stdout, _ = run(capsys, "pipeline", "--in", product_circ,
                          "--out", str(out))
    assert code == 0
    report = (out / "report.txt").read_text()
    assert "passes: (none)" in report and "target: (none)" in report


def test_pipeline_bad_pass_combination_exit_2(capsys, negcube_circ, tmp_path):
    # brent (arity-2) on an add/neg-cube formula violates its precondition
    out = tmp_path / "x"
    code, _o, err = run(capsys, "pipeline", "--in", negcube_circ,
                        "--pass", "brent", "--out", str(out))
    assert code == 2 and "error" in err
