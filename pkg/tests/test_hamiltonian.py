import random

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from contactpde.distributions import Distribution, kernel_of_forms, type_of_field
from contactpde.hamiltonian import (
    hamiltonian_field,
    in_involution,
    is_infinitesimal_symmetry,
    lie_derivative_ratio,
    lift_chart,
    lift_point_field,
    verify_hamiltonian_identities,
)
from contactpde.jets import Chart, VectorField, apply, contact_distribution_fields, contact_form, d, total_derivative
from oracles import darboux_coords

C1, C2, C3 = Chart(1), Chart(2), Chart(3)


def _oracle_field(f, n):
    """Y_f as a plain sympy column: sum f_ui (e_xi + u_i e_u) - D_i(f) e_ui."""
    cs = darboux_coords(n)
    xs, u, us = cs[:n], cs[n], cs[n + 1:]
    v = sp.zeros(2 * n + 1, 1)
    for i in range(n):
        fu = sp.diff(f, us[i])
        Dif = sp.diff(f, xs[i]) + us[i] * sp.diff(f, u)
        v[i] += fu
        v[n] += us[i] * fu
        v[n + 1 + i] -= Dif
    return v.applyfunc(sp.expand)


def _as_column(Y):
    return sp.Matrix(Y.vector()).applyfunc(sp.expand)


def test_hamiltonian_field_examples():
    x1, x2, u, u1, u2 = C2.coords
    D1, D2 = total_derivative(C2, 1), total_derivative(C2, 2)
    P = C2.partial
    assert hamiltonian_field(u - u1 * u2, C2) == -u2 * D1 - u1 * D2 - u1 * P(u1) - u2 * P(u2)
    assert hamiltonian_field(u1, C2) == D1
    y1, y2, y3, v, v1, v2, v3 = C3.coords
    f = v3 ** 2 - v2 ** 2 - 2 * v1 + 4 * y3 + 1
    E = [total_derivative(C3, i) for i in (1, 2, 3)]
    expected = 2 * (v3 * E[2] - v2 * E[1] - E[0] - 2 * C3.partial(v3))
    assert hamiltonian_field(f, C3) == expected


def test_hamiltonian_field_against_oracle():
    rng = random.Random(3)
    for n, chart in ((1, C1), (2, C2), (3, C3)):
        cs = chart.coords
        for _ in range(3):
            f = sum(rng.randint(-3, 3) * cs[rng.randrange(len(cs))] * cs[rng.randrange(len(cs))] ** rng.randint(0, 2)
                    for _ in range(4))
            assert _as_column(hamiltonian_field(f, chart)) == _oracle_field(f, n)


def test_hamiltonian_requires_order_one():
    with pytest.raises(ValueError):
        hamiltonian_field(sp.Symbol("u"), Chart(1, 2))


def test_in_involution_examples():
    x1, x2, u, u1, u2 = C2.coords
    assert in_involution(u1, u2, C2)
    assert not in_involution(u1, x1, C2)
    y1, y2, y3, v, v1, v2, v3 = C3.coords
    lam1, lam2, lam3 = y1 ** 2 - 2 * y2, v3 ** 2 - v2 ** 2 - 2 * v1, y3
    assert in_involution(lam1, lam3, C3)
    # hand value: Y_lam1 = -2 y1 d_v1 + 2 d_v2, so Y_lam1(lam2) = 4 y1 - 4 v2
    assert sp.expand(apply(hamiltonian_field(lam1, C3), lam2) - (4 * y1 - 4 * v2)) == 0
    assert not in_involution(lam1, lam2, C3)


def test_identities_examples():
    x1, x2, u, u1, u2 = C2.coords
    rep = verify_hamiltonian_identities(u - u1 * u2, C2)
    assert rep and all(rep.as_dict().values())
    assert hamiltonian_field(sp.Integer(7), C2).is_zero()
    assert verify_hamiltonian_identities(sp.Integer(7), C2)


def test_identities_random_cubics():
    rng = random.Random(11)
    cs = C2.coords
    for _ in range(3):
        f = sum(rng.randint(-4, 4) * cs[rng.randrange(5)] * cs[rng.randrange(5)] * cs[rng.randrange(5)]
                for _ in range(5)) + rng.randint(-3, 3) * cs[rng.randrange(5)]
        assert verify_hamiltonian_identities(f, C2)


def test_lift_examples():
    ch = lift_chart()
    x, u, p = ch.coords
    assert lift_point_field(1, 0) == ch.partial(x)
    assert lift_point_field(x, 0) == x * ch.partial(x) - p * ch.partial(p)
    assert lift_point_field(0, u) == u * ch.partial(u) + p * ch.partial(p)
    with pytest.raises(ValueError):
        lift_point_field(p, 0)


def test_symmetry_examples():
    J2 = Chart(1, 2)
    C = Distribution(J2, contact_distribution_fields(J2))
    assert is_infinitesimal_symmetry(J2.partial(J2.xs[0]), C)
    ch = lift_chart()
    x, u, p = ch.coords
    Cl = Distribution(ch, contact_distribution_fields(ch))
    assert is_infinitesimal_symmetry(lift_point_field(x, 0, ch), Cl)
    assert not is_infinitesimal_symmetry(C1.partial(C1.us[0]), Distribution(C1, contact_distribution_fields(C1)))


def test_characteristic_symmetry_of_restricted_distribution():
    x1, x2, u, u1, u2 = C2.coords
    theta = contact_form(C2)
    for f in (u - u1 * u2, u1 ** 2 + u2 ** 2 - 1, x1 * u2 + u):
        D = Distribution(C2, kernel_of_forms(C2, [theta, d(f, C2)]))
        assert D.rank == 3
        assert is_infinitesimal_symmetry(hamiltonian_field(f, C2), D)


# ---------------------------------------------------------------------------
# properties

_syms = list(C2.coords)
_mono = st.tuples(st.integers(-3, 3), st.lists(st.integers(0, 2), min_size=5, max_size=5)).map(
    lambda t: t[0] * sp.Mul(*[s ** k for s, k in zip(_syms, t[1])]))
_poly = st.lists(_mono, min_size=1, max_size=3).map(lambda ms: sp.Add(*ms))


@settings(max_examples=15)
@given(_poly)
def test_type_two(f):
    Y = hamiltonian_field(f, C2)
    if Y.is_zero():
        return
    assert type_of_field(Y, contact_form(C2)) == 2


@settings(max_examples=20)
@given(_poly, st.fractions(min_value=-5, max_value=5).filter(lambda q: q != 0))
def test_scale_covariance(f, c):
    c = sp.Rational(c.numerator, c.denominator)
    assert hamiltonian_field(c * f, C2) == c * hamiltonian_field(f, C2)


_xu = st.lists(st.tuples(st.integers(-3, 3), st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=3)


@settings(max_examples=20)
@given(_xu, _xu)
def test_lift_conformal(gs, hs):
    ch = lift_chart()
    x, u, p = ch.coords
    g = sum((c * x ** a * u ** b for c, a, b in gs), sp.Integer(0))
    h = sum((c * x ** a * u ** b for c, a, b in hs), sp.Integer(0))
    X = lift_point_field(g, h, ch)
    assert lie_derivative_ratio(X, contact_form(ch)) is not None
