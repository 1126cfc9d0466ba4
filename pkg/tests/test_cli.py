import io
import json
import os
import subprocess
import sys

import pytest

from contactpde.cli import EXIT_INPUT, EXIT_MATH, EXIT_OK, load_problem, run

FIX = os.path.join(os.path.dirname(__file__), "fixtures")


def fx(name):
    return os.path.join(FIX, name)


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, json.loads(buf.getvalue()), buf.getvalue()


def test_classify_laplace():
    code, rep, _ = call("classify-mae", "--file", fx("laplace.json"))
    assert code == EXIT_OK
    assert rep["delta"] == "-4" and rep["class"] == "Elliptic"
    assert rep["method"] == "discriminant-sign"
    assert rep["seed"] == 0 and rep["input"]["mae"]["C"] == "1"


def test_classify_tricomi_mixed():
    code, rep, _ = call("classify-mae", "--file", fx("tricomi.json"))
    assert code == EXIT_OK and rep["class"] == "Mixed" and rep["delta"] == "-4*x1"


def test_solve_first_order_with_csv(tmp_path):
    out = tmp_path / "sol.csv"
    code, rep, _ = call("solve-first-order", "--file", fx("ex41.json"), "--s-max", "1", "--h", "0.01",
                        "--out", str(out))
    assert code == EXIT_OK
    assert rep["residual"] < 1e-6 and rep["method"] == "characteristics-rk4"
    assert rep["samples"] == 81 * 101
    lines = out.read_text().splitlines()
    assert lines[0] == "s_param,s,x1,x2,u,u1,u2,residual"
    assert len(lines) == 1 + 81 * 101


def test_goursat_wave():
    code, rep, _ = call("goursat-2d", "--file", fx("wave.json"))
    assert code == EXIT_OK
    assert rep["delta"] == "4" and rep["sqrt_delta"] == "2"
    assert len(rep["D"]) == 2 and len(rep["D_perp"]) == 2
    # quasi-linear: no graphical F, the generator rows are reported instead
    assert rep["graphical"] is False and "generator_rows" in rep


def test_goursat_graphical_reports_F(tmp_path):
    p = tmp_path / "ma.json"
    p.write_text(json.dumps({"n": 2, "mae": {"N": "1", "A": "0", "B": "0", "C": "0", "Dc": "1"}}))
    code, rep, _ = call("goursat-2d", "--file", str(p))
    assert code == EXIT_OK and rep["graphical"] is True
    assert len(rep["F"]) == 2


def test_goursat_laplace_is_math_failure():
    code, rep, _ = call("goursat-2d", "--file", fx("laplace.json"))
    assert code == EXIT_MATH
    assert rep["error"]["kind"] == "EllipticError"


def test_empty_file_is_input_error():
    code, rep, _ = call("expr", "--file", fx("empty.json"))
    assert code == EXIT_INPUT and rep["error"]["kind"] == "InputError"


def test_unknown_symbol_has_pointer():
    code, rep, _ = call("classify-mae", "--file", fx("bad_symbol.json"))
    assert code == EXIT_INPUT
    assert rep["error"]["pointer"] == "/mae/C"
    assert "x1, x2, u, u1, u2" in rep["error"]["message"]


def test_missing_file_and_bad_flags(tmp_path):
    code, rep, _ = call("expr", "--file", str(tmp_path / "nope.json"))
    assert code == EXIT_INPUT
    code, rep, _ = call("solve-first-order", "--file", fx("ex41.json"), "--h", "-1")
    assert code == EXIT_INPUT
    assert run(["no-such-command"], stdout=io.StringIO()) == EXIT_INPUT


def test_schema_violation_pointer(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"n": "two"}))
    code, rep, _ = call("expr", "--file", str(p))
    assert code == EXIT_INPUT and rep["error"]["pointer"] == "/n"


def test_fold_is_math_failure():
    code, rep, _ = call("solve-first-order", "--file", fx("burgers.json"), "--h", "0.05")
    assert code == EXIT_MATH
    assert rep["error"]["kind"] == "FoldDetected"
    assert rep["samples"] > 0 and rep["residual"] <= rep["residual_bound"]


def test_expr_and_hamiltonian():
    code, rep, _ = call("expr", "--file", fx("expr.json"))
    assert code == EXIT_OK and rep["zero_test"] in ("SymbolicZero", "NumericZero")
    code, rep, _ = call("hamiltonian", "--file", fx("hamiltonian41.json"))
    assert code == EXIT_OK and rep["type"] == 2 and rep["in_involution"] is True
    assert all(rep["identities"].values())


def test_distribution_and_flag():
    code, rep, _ = call("distribution", "--file", fx("flag2345.json"))
    assert code == EXIT_OK and rep["derived_flag"] == [2, 3, 4, 5] and rep["lagrangian"]
    code, rep, _ = call("parabolic-flag", "--file", fx("flag2345.json"))
    assert code == EXIT_OK and rep["flag"] == [2, 3, 4, 5] and rep["class"] == "I2345"


def test_grassmannian():
    code, rep, _ = call("grassmannian", "--file", fx("quadric.json"))
    assert code == EXIT_OK
    assert rep["pluecker"] == ["1", "1", "2", "3", "-1"] and rep["on_lie_quadric"]
    assert rep["direction_rank"] == 1


def test_monge_nd(tmp_path):
    out = tmp_path / "monge.csv"
    code, rep, _ = call("monge-nd", "--file", fx("monge81.json"), "--out", str(out))
    assert code == EXIT_OK and rep["method"] == "monge-extend"
    assert rep["vanishing_integral"] == "-2*u1 - u2**2 + u3**2 + 4*x3 + 1"
    assert all(rep["intermediate_integrals"].values())
    assert rep["residual"] <= rep["residual_bound"]
    assert out.read_text().splitlines()[0].startswith("s_param,t,s,x1,x2,x3,u,")


def test_complex_mae_flags():
    code, rep, _ = call("complex-mae", "--n", "2")
    assert code == EXIT_OK and rep["parts"] == ["-u11*u22 + u12**2 + 1", "u11 + u22"]
    code, rep, _ = call("complex-mae", "--n", "2", "--mode", "para")
    assert code == EXIT_OK and rep["mode"] == "para"
    code, rep, _ = call("complex-mae", "--n", "0")
    assert code == EXIT_INPUT


@pytest.mark.parametrize("argv", [
    ("classify-mae", "--file", fx("tricomi.json"), "--seed", "7"),
    ("goursat-2d", "--file", fx("wave.json")),
    ("distribution", "--file", fx("flag2345.json")),
])
def test_deterministic_output(argv):
    _, _, a = call(*argv)
    _, _, b = call(*argv)
    assert a == b


def test_deterministic_csv(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    call("solve-first-order", "--file", fx("ex41.json"), "--out", str(a))
    call("solve-first-order", "--file", fx("ex41.json"), "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_seed_echoed():
    _, rep, _ = call("classify-mae", "--file", fx("laplace.json"), "--seed", "5", "--jobs", "2")
    assert rep["seed"] == 5 and rep["jobs"] == 2


def test_load_problem_builds_records():
    rec = load_problem(fx("ex41.json"))
    assert rec["chart"].n == 2 and "pde" in rec
    rec = load_problem(fx("monge81.json"))
    assert len(rec["distribution"]) == 3 and len(rec["integrals"]) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "contactpde", "classify-mae", "--file", fx("wave.json")],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["class"] == "Hyperbolic"
