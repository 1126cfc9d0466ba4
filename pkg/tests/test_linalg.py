import random
from fractions import Fraction

import sympy as sp
from hypothesis import given, strategies as st

from contactpde.linalg import det, exact_rank, generic_rank, independent_rows, nullspace, numeric_rank, rref

x, y = sp.symbols("x y")

_frac = st.fractions(min_value=-5, max_value=5, max_denominator=9)


def test_exact_rank_small():
    F = Fraction
    assert exact_rank([[F(1), F(2)], [F(2), F(4)]]) == 1
    assert exact_rank([[F(0), F(0)], [F(0), F(0)]]) == 0
    assert exact_rank([[F(1), F(0), F(0)], [F(0), F(1), F(0)]]) == 2


def test_generic_rank_and_witnesses():
    r = generic_rank([[1, x], [x, x ** 2]])
    assert r.rank == 1 and r.constant
    r = generic_rank([[x, 0], [0, 1]])
    assert r.rank == 2 and not r.witnesses  # probes are nonzero
    r = generic_rank([[x - sp.Rational(1, 2), 0], [0, 1]], probe_count=200, seed=1)
    assert r.rank == 2


def test_nullspace_rational_functions():
    M = [[1, x, x * y], [0, 1, y]]
    for v in nullspace(M):
        for row in M:
            assert sp.simplify(sum(a * b for a, b in zip(row, v))) == 0
    assert len(nullspace(M)) == 1


def test_rref_pivots():
    rows, piv = rref([[0, x, 1], [1, 0, y]])
    assert piv == [0, 1]
    assert rows[0][0] == 1 and rows[1][1] == 1


def test_independent_rows():
    assert independent_rows([[1, x], [2, 2 * x], [0, 1]]) == [0, 2]


def test_det_matches_expand():
    assert sp.expand(det([[x, 1], [y, x]]) - (x ** 2 - y)) == 0


@given(st.lists(st.lists(_frac, min_size=4, max_size=4), min_size=1, max_size=4))
def test_exact_rank_matches_sympy(rows):
    want = sp.Matrix([[sp.Rational(v.numerator, v.denominator) for v in r] for r in rows]).rank()
    assert exact_rank(rows) == want
    assert numeric_rank([[float(v) for v in r] for r in rows]) == want
