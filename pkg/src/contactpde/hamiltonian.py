"""Hamiltonian (contact) vector fields, involution and point-field lifts."""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from .distributions import Distribution, is_infinitesimal_symmetry
from .jets import (
    Chart,
    KForm,
    VectorField,
    apply,
    contact_form,
    d,
    evaluate_form,
    exterior_derivative,
    lie_derivative,
    total_derivative,
)
from .linalg import sample_matrix
from .symbolic import is_zero, simplify

__all__ = [
    "hamiltonian_field",
    "in_involution",
    "verify_hamiltonian_identities",
    "HamiltonianReport",
    "lift_point_field",
    "is_infinitesimal_symmetry",
    "lie_derivative_ratio",
]


def hamiltonian_field(f, chart: Chart) -> VectorField:
    """Y_f = sum f_{u_i} D_i - D_i(f) d/du_i on an order-1 chart."""
    if chart.order != 1:
        raise ValueError("Hamiltonian fields are defined on order-1 charts")
    f = sp.sympify(f)
    Y = chart.zero_field()
    for i in range(1, chart.n + 1):
        Di = total_derivative(chart, i)
        Y = Y + sp.diff(f, chart.us[i - 1]) * Di - apply(Di, f) * chart.partial(chart.us[i - 1])
    return Y


def in_involution(f, g, chart: Chart, seed: int = 0) -> bool:
    """Y_f(g) == 0, cross-checked against d(theta)(Y_f, Y_g) = -Y_f(g)."""
    Yf = hamiltonian_field(f, chart)
    val = apply(Yf, g)
    result = bool(is_zero(val))
    Yg = hamiltonian_field(g, chart)
    pairing = evaluate_form(exterior_derivative(contact_form(chart)), Yf, Yg)
    check = simplify(pairing + val)
    if check != 0:
        for _, rows in sample_matrix([[check]], 5, seed):
            if abs(float(rows[0][0])) > 1e-10:
                raise AssertionError("involution cross-check failed")
    return result


@dataclass(frozen=True)
class HamiltonianReport:
    preserves_f: bool
    in_contact_distribution: bool
    lie_derivative_identity: bool

    def __bool__(self):
        return self.preserves_f and self.in_contact_distribution and self.lie_derivative_identity

    def as_dict(self):
        return {
            "Y_f(f)=0": self.preserves_f,
            "theta(Y_f)=0": self.in_contact_distribution,
            "L_Yf theta = df - f_u theta": self.lie_derivative_identity,
        }


def verify_hamiltonian_identities(f, chart: Chart) -> HamiltonianReport:
    f = sp.sympify(f)
    Y = hamiltonian_field(f, chart)
    theta = contact_form(chart)
    a = bool(is_zero(apply(Y, f)))
    b = bool(is_zero(evaluate_form(theta, Y)))
    lhs = lie_derivative(Y, theta)
    rhs = d(f, chart) - sp.diff(f, chart.u) * theta
    c = (lhs - rhs).is_zero()
    return HamiltonianReport(a, b, c)


def lift_chart() -> Chart:
    return Chart(1, 1, x_names=("x",))


def lift_point_field(g, h, chart: Chart | None = None) -> VectorField:
    """Contact lift of g d/dx + h d/du to (x, u, u1)."""
    if chart is None:
        chart = lift_chart()
    x, u, p = chart.xs[0], chart.u, chart.us[0]
    g = sp.sympify(g)
    h = sp.sympify(h)
    if p in (g.free_symbols | h.free_symbols):
        raise ValueError("g and h must depend on x and u only")
    D = lambda e: sp.diff(e, x) + p * sp.diff(e, u)
    f = D(h) - p * D(g)
    return VectorField(chart, {x: g, u: h, p: f})


def lie_derivative_ratio(X: VectorField, theta: KForm):
    """rho with L_X theta = rho * theta, or None when not proportional."""
    L = lie_derivative(X, theta)
    if L.is_zero():
        return sp.Integer(0)
    key = next(iter(theta.coeffs))
    rho = simplify(L.coeffs.get(key, 0) / theta.coeffs[key])
    if (L - rho * theta).is_zero():
        return rho
    return None
