import math
import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from contactpde.symbolic import (
    EvaluationError,
    ExprSyntaxError,
    UnknownSymbolError,
    ZeroKind,
    compile_exact,
    diff,
    eval_exact,
    eval_numeric,
    is_zero,
    parse,
    probe_points,
    simplify,
    substitute,
    to_text,
)
from oracles import finite_difference

x1, x2, x3, u, u1, u2 = sp.symbols("x1 x2 x3 u u1 u2")
u11, u12, u22 = sp.symbols("u11 u12 u22")
A, B, C, D, N = sp.symbols("A B C D N")


def test_parse_basic():
    assert parse("u - u1*u2") == u - u1 * u2
    assert simplify(parse("(3*x1 - 2*u)*u1 - u") - ((3 * x1 - 2 * u) * u1 - u)) == 0
    assert parse("(3*x1 - 2*u)*u1 - u", canonical=False) == (3 * x1 - 2 * u) * u1 - u
    assert parse("x1^2 - 2*x2") == x1 ** 2 - 2 * x2
    assert parse("x1**2") == parse("x1^2")


def test_parse_precedence_and_unary():
    assert parse("-x1^2") == -(x1 ** 2)
    assert parse("2^3^2") == 512
    assert parse("1/2*x1") == x1 / 2
    assert parse("sqrt(1 - 4*x3 + 4*x1)") == sp.sqrt(1 - 4 * x3 + 4 * x1)


def test_parse_errors_carry_offset():
    with pytest.raises(ExprSyntaxError) as e:
        parse("x1 + * u")
    assert e.value.offset == 5
    with pytest.raises(ExprSyntaxError):
        parse("(x1 + u")
    with pytest.raises(UnknownSymbolError) as e:
        parse("x1 + w", [x1, u])
    assert e.value.name == "w" and e.value.offset == 5
    assert "x1" in str(e.value)


def test_to_text_round_trip():
    e = (3 * x1 - 2 * u) * u1 - u
    assert parse(to_text(e)) == simplify(e)


def test_diff_examples():
    assert diff(u1 * u2, u1) == u2
    assert diff(u11 * u22 - u12 ** 2, u12) == -2 * u12
    d = diff(sp.sqrt(1 - 4 * x3 + 4 * x1), x3)
    assert simplify(d - (-2 / sp.sqrt(1 - 4 * x3 + 4 * x1))) == 0
    # finite-difference oracle at x1=1, x3=0
    f = lambda x1, x3: math.sqrt(1 - 4 * x3 + 4 * x1)
    fd = finite_difference(f, {"x1": 1.0, "x3": 0.0}, "x3")
    assert abs(float(d.subs({x1: 1, x3: 0})) - fd) < 1e-9


def test_simplify_examples():
    assert simplify(u1 * u2 - u2 * u1) == 0
    assert simplify((u - u) ** 3 + 0 * x1) == 0
    got = simplify((B / N) ** 2 - 4 * (A * C / N ** 2 - D / N))
    want = (B ** 2 - 4 * A * C + 4 * N * D) / N ** 2
    assert simplify(got - want) == 0
    # expand-and-compare oracle at random rationals
    rng = random.Random(3)
    for _ in range(10):
        vals = {s: sp.Rational(rng.randint(1, 50), rng.randint(1, 9)) for s in (A, B, C, D, N)}
        assert got.subs(vals) == want.subs(vals)


def test_sqrt_of_square_normalizes():
    assert simplify(sp.sqrt((x1 - 2) ** 2)) == x1 - 2
    assert simplify(sp.sqrt(4 * (1 - x1) ** 2)) == 2 * x1 - 2
    assert simplify(sp.sqrt(x1 ** 2 + 2 * x1 + 1)) == x1 + 1


def test_radical_relation():
    R = 1 - 4 * x3 + 4 * x1
    assert simplify((sp.sqrt(R) + 1) * (sp.sqrt(R) - 1) - (R - 1)) == 0
    assert simplify(sp.sqrt(R) ** 2 - R) == 0


def test_substitute_examples():
    assert simplify(substitute(u - u1 * u2, {u1: 2 * x1, u2: x1 / 2, u: x1 ** 2})) == 0
    assert substitute(x1, {}) == x1
    q = -(D + B * u12 + C * u22 - N * u12 ** 2) / (A + N * u22)
    assert simplify(substitute(u11, {u11: q}) - q) == 0


def test_substitute_is_simultaneous():
    assert substitute(x1 + 2 * x2, {x1: x2, x2: x1}) == x2 + 2 * x1


def test_eval_numeric_examples():
    assert eval_numeric(u1 ** 2 + u ** 2, {u1: 0.6, u: 0.8}) == pytest.approx(1.0, abs=1e-15)
    assert eval_numeric((4 * x1 + x2) ** 2 / 16, {x1: 1, x2: 0}) == 1.0
    assert eval_numeric(sp.sqrt(1 - 4 * x3 + 4 * x1), {x1: 0, x3: 0}) == 1.0


def test_eval_errors():
    with pytest.raises(EvaluationError) as e:
        eval_numeric(1 / x1, {x1: 0})
    assert e.value.kind
    with pytest.raises(EvaluationError):
        eval_numeric(sp.sqrt(x1), {x1: -1})


def test_eval_exact_keeps_fractions():
    v = eval_exact(x1 ** 2 / 3 + u, {x1: Fraction(1, 2), u: Fraction(1, 12)})
    assert v == Fraction(1, 6)


def test_compile_exact_matches_walker():
    e = (x1 ** 2 - u) / (1 + u1 ** 2) + sp.sqrt(x1 ** 2)
    fn = compile_exact([e], [x1, u, u1])
    for pt in [(Fraction(1, 3), Fraction(2), Fraction(-5, 7)), (Fraction(-2), Fraction(0), Fraction(1))]:
        assert fn(*pt)[0] == eval_exact(e, dict(zip([x1, u, u1], pt)))


def test_is_zero_tiers():
    assert is_zero((u - u) ** 2).kind is ZeroKind.SYMBOLIC_ZERO
    z = is_zero(sp.sin(x1) ** 2 + sp.cos(x1) ** 2 - 1)
    assert z.kind is ZeroKind.NUMERIC_ZERO and bool(z)
    nz = is_zero(u11 + u22)
    assert nz.kind is ZeroKind.NONZERO and not nz
    assert nz.witness and abs(nz.value) > 0


def test_probe_points_nonzero_small_denominators():
    gen = probe_points([x1, u], seed=4)
    for _ in range(50):
        pt = next(gen)
        for v in pt.values():
            assert v != 0 and Fraction(v).denominator <= 97


# ---------------------------------------------------------------------------
# properties

_atoms = [x1, x2, u, u1]
_poly = st.lists(
    st.tuples(st.integers(-5, 5), st.lists(st.integers(0, 3), min_size=4, max_size=4)),
    min_size=1, max_size=5,
).map(lambda terms: sum((c * sp.Mul(*[a ** k for a, k in zip(_atoms, ks)]) for c, ks in terms), sp.Integer(0)))


@given(_poly, st.sampled_from(_atoms), st.sampled_from(_atoms))
def test_mixed_partials_commute(e, s, t):
    assert simplify(diff(diff(e, s), t) - diff(diff(e, t), s)) == 0


@given(_poly)
def test_simplify_idempotent(e):
    once = simplify(e)
    assert simplify(once) == once
    assert simplify(e - e) == 0


@given(_poly, _poly)
def test_chain_rule(e, g):
    # e(x1, ...) with x1 -> g(x2, ...); t = x3 does not occur in e or g
    t = x3
    g = g.xreplace({x1: x2 + t})
    lhs = diff(substitute(e, {x1: g}), t)
    rhs = substitute(diff(e, x1), {x1: g}) * diff(g, t) + substitute(diff(e, t), {x1: g})
    rng = random.Random(7)
    for _ in range(3):
        pt = {s: sp.Rational(rng.randint(-9, 9), rng.randint(1, 7)) for s in (x2, x3, u, u1)}
        assert lhs.xreplace(pt) == rhs.xreplace(pt)


@given(_poly, st.integers(1, 9), st.integers(1, 9))
def test_eval_after_simplify(e, p, q):
    e2 = e / (1 + u1 ** 2)
    pt = {x1: p / q, x2: q / p, u: 0.5, u1: -p / 7}
    assert abs(eval_numeric(simplify(e2), pt) - eval_numeric(e2, pt)) <= 1e-12 * max(1.0, abs(eval_numeric(e2, pt)))
