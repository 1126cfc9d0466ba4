import math
import random

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from contactpde.jets import (
    Chart,
    ChartError,
    KForm,
    ODEChart,
    VectorField,
    all_index_subsets,
    apply,
    bracket,
    contact_distribution_fields,
    contact_form,
    d,
    evaluate_form,
    exterior_derivative,
    identity_map,
    interior_product,
    legendre,
    lie_derivative,
    pullback,
    pushforward,
    top_form_coefficient,
    total_derivative,
    wedge,
    wedge_all,
)

C1 = Chart(1)
C2 = Chart(2)
C3 = Chart(3)


def test_chart_dimensions_and_names():
    for n in (1, 2, 3):
        assert Chart(n).dim == 2 * n + 1
        assert Chart(n, 2).dim == 2 * n + 1 + n * (n + 1) // 2
        names = [c.name for c in Chart(n, 2).coords]
        assert len(set(names)) == len(names)
    assert [c.name for c in C2.coords] == ["x1", "x2", "u", "u1", "u2"]
    assert Chart(2, 2).uij(2, 1) == Chart(2, 2).uij(1, 2)
    with pytest.raises(ChartError):
        C2.sym("u3")


def test_contact_form_examples():
    x1, u, u1 = C1.coords
    assert contact_form(C1) == C1.dcoord(u) - u1 * C1.dcoord(x1)
    x1, x2, u, u1, u2 = C2.coords
    assert contact_form(C2) == C2.dcoord(u) - u1 * C2.dcoord(x1) - u2 * C2.dcoord(x2)
    th = contact_form(C3)
    assert th.coeff(C3.u) == 1 and all(th.coeff(x) == -p for x, p in zip(C3.xs, C3.us))


def test_total_derivative_examples():
    x1, x2, u, u1, u2 = C2.coords
    assert total_derivative(C2, 1) == C2.partial(x1) + u1 * C2.partial(u)
    J = Chart(1, 2)
    x, uu, p, p11 = J.coords
    assert total_derivative(J, 1) == J.partial(x) + p * J.partial(uu) + p11 * J.partial(p)
    K = Chart(2, 2)
    D2 = total_derivative(K, 2)
    assert D2.component(K.sym("u1")) == K.uij(1, 2) and D2.component(K.sym("u2")) == K.uij(2, 2)
    assert D2.component(K.sym("u")) == K.sym("u2")


def test_exterior_derivative_examples():
    x1, u, u1 = C1.coords
    th = contact_form(C1)
    assert exterior_derivative(th) == wedge(C1.dcoord(x1), C1.dcoord(u1))
    x2 = C2.sym("x2")
    w = x2 * C2.dcoord("x1")
    assert exterior_derivative(w) == wedge(C2.dcoord("x2"), C2.dcoord("x1"))
    f = sp.sin(x2) * C2.sym("u1") ** 2
    assert exterior_derivative(d(f, C2)).is_zero()


def test_wedge_examples():
    dx = C1.dcoord("x1")
    assert wedge(dx, dx).is_zero()
    th = contact_form(C1)
    assert wedge(th, dx) == wedge(C1.dcoord("u"), dx)


def test_interior_product_examples():
    th1 = contact_form(C1)
    assert interior_product(C1.partial("u"), th1) == KForm(C1, 0, {(): 1})
    assert interior_product(total_derivative(C2, 1), contact_form(C2)).is_zero()
    assert interior_product(C1.partial("u1"), exterior_derivative(th1)) == -C1.dcoord("x1") or \
        interior_product(C1.partial("u1"), exterior_derivative(th1)) == C1.dcoord("x1")
    # dtheta = dx1 ^ du1, so d/du1 contracts into the second slot: -dx1
    assert interior_product(C1.partial("u1"), exterior_derivative(th1)) == -C1.dcoord("x1")


def test_lie_derivative_examples():
    assert lie_derivative(C1.partial("u1"), contact_form(C1)) == -C1.dcoord("x1")
    X = 2 * C2.partial("x1") - 3 * C2.partial("u2")
    w = wedge(C2.dcoord("x2"), C2.dcoord("u")) + 5 * wedge(C2.dcoord("u1"), C2.dcoord("x1"))
    assert lie_derivative(X, w).is_zero()


def test_bracket_examples():
    assert bracket(C2.partial("x1"), C2.partial("u")).is_zero()
    assert bracket(total_derivative(C2, 1), C2.partial("u1")) == -C2.partial("u")
    u = C2.u
    X = C2.partial("u1") + u * C2.partial("u2")
    Y = total_derivative(C2, 2) - u * total_derivative(C2, 1)
    Z = bracket(X, Y)
    M = sp.Matrix([X.vector(), Y.vector(), Z.vector()])
    assert M.rank() == 3


def test_apply_examples():
    assert apply(total_derivative(C2, 1), C2.u) == C2.sym("u1")
    x1, x2, _ = C3.xs
    X1 = total_derivative(C3, 1) + x1 * total_derivative(C3, 2)
    assert apply(X1, x1 ** 2 - 2 * x2) == 0
    assert apply(C2.partial("u1"), C2.sym("u1") * C2.sym("u2")) == C2.sym("u2")


def test_contact_distribution_fields():
    th = contact_form(C2)
    fields = contact_distribution_fields(C2)
    assert len(fields) == 4
    assert all(evaluate_form(th, X) == 0 for X in fields)


def test_legendre_full_n1():
    m = legendre(C1)
    T = m.target
    xt, ut, pt = T.coords
    x, u, p = C1.coords
    assert m.images[xt] == p and sp.expand(m.images[ut] - (u - p * x)) == 0 and m.images[pt] == -x
    assert pullback(m, contact_form(T)) == contact_form(C1)


def test_legendre_partial_and_identity():
    m = legendre(C2, {1})
    T = m.target
    assert m.images[T.xs[1]] == C2.xs[1] and m.images[T.us[1]] == C2.us[1]
    assert m.images[T.xs[0]] == C2.us[0]
    assert pullback(m, contact_form(T)) == contact_form(C2)
    m0 = legendre(C2, set())
    assert all(m0.images[t] == s for t, s in zip(m0.target.coords, C2.coords))
    assert len(list(all_index_subsets(3))) == 8


def test_pullback_identity_and_pushforward():
    w = C2.sym("x1") * C2.dcoord("u2") + wedge(C2.dcoord("u"), C2.dcoord("x2")).coeff(C2.u, C2.xs[1]) * C2.dcoord("u")
    assert pullback(identity_map(C2), w) == w
    m = legendre(C2)
    X = total_derivative(C2, 1)
    Y = pushforward(m, X)
    assert evaluate_form(contact_form(m.target), Y) == 0


def test_ode_chart():
    J = ODEChart(2)
    assert [c.name for c in J.coords] == ["x", "u", "u1", "u11"]
    Dx = J.total_derivative()
    assert Dx.component(J.sym("u1")) == J.sym("u11")


# ---------------------------------------------------------------------------
# properties

_syms = list(C2.coords)
_coef = st.lists(st.tuples(st.integers(-3, 3), st.lists(st.integers(0, 2), min_size=5, max_size=5)),
                 min_size=1, max_size=3).map(
    lambda ts: sum((c * sp.Mul(*[s ** k for s, k in zip(_syms, ks)]) for c, ks in ts), sp.Integer(0)))


def _form(deg):
    import itertools
    keys = list(itertools.combinations(range(5), deg))
    return st.lists(st.tuples(st.sampled_from(keys), _coef), min_size=1, max_size=3).map(
        lambda items: KForm(C2, deg, {k: v for k, v in items}))


_lin = st.lists(st.tuples(st.integers(-3, 3), st.lists(st.integers(0, 1), min_size=5, max_size=5)),
                min_size=1, max_size=2).map(
    lambda ts: sum((c * sp.Mul(*[s ** k for s, k in zip(_syms, ks)]) for c, ks in ts), sp.Integer(0)))
_small_field = st.lists(_lin, min_size=5, max_size=5).map(lambda cs: VectorField(C2, dict(zip(_syms, cs))))
_field = st.lists(_coef, min_size=5, max_size=5).map(lambda cs: VectorField(C2, dict(zip(_syms, cs))))


@given(st.integers(0, 3).flatmap(_form))
def test_d_squared_zero(w):
    assert exterior_derivative(exterior_derivative(w)).is_zero()


@given(_field, st.integers(1, 2).flatmap(_form))
def test_cartan_formula(X, w):
    lhs = lie_derivative(X, w)
    rhs = interior_product(X, exterior_derivative(w)) + exterior_derivative(interior_product(X, w))
    assert lhs == rhs


@settings(max_examples=20)
@given(_small_field, _small_field, _form(1))
def test_lie_bracket_commutator(X, Y, w):
    lhs = lie_derivative(bracket(X, Y), w)
    rhs = lie_derivative(X, lie_derivative(Y, w)) - lie_derivative(Y, lie_derivative(X, w))
    assert lhs == rhs


@given(_form(1), _form(1))
def test_pullback_commutes_with_d(a, b):
    m = legendre(C2, {2})
    w = KForm(m.target, 1, {k: v.xreplace(dict(zip(C2.coords, m.target.coords))) for k, v in a.coeffs.items()})
    assert pullback(m, exterior_derivative(w)) == exterior_derivative(pullback(m, w))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_contact_volume_form(n):
    c = Chart(n)
    th = contact_form(c)
    vol = wedge_all([th] + [exterior_derivative(th)] * n)
    top = top_form_coefficient(vol)
    assert top.is_Integer and abs(top) == math.factorial(n)
