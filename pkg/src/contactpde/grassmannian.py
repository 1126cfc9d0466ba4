"""Lagrangian planes L(U), Pluecker coordinates on the Lie quadric, ranks of
tangent directions and rank-1 line prolongations."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import sympy as sp

from .jets import Chart, VectorField, contact_form, evaluate_form, exterior_derivative, total_derivative
from .linalg import exact_rank, generic_rank
from .symbolic import is_zero, simplify


class GrassmannianError(ValueError):
    pass


def _matrix(U) -> sp.Matrix:
    M = sp.Matrix(U)
    if M.rows != M.cols:
        raise GrassmannianError("matrix must be square")
    return M.applyfunc(sp.sympify)


def is_symmetric(U) -> bool:
    M = _matrix(U)
    return all(simplify(M[i, j] - M[j, i]) == 0 for i in range(M.rows) for j in range(i + 1, M.cols))


@dataclass(frozen=True)
class LagrangianPlane:
    U: sp.Matrix

    def __post_init__(self):
        if not is_symmetric(self.U):
            raise GrassmannianError("U must be symmetric")

    @property
    def n(self) -> int:
        return self.U.rows


def plane_span(U, chart: Chart, check: bool = True) -> list[VectorField]:
    """The fields D_i + sum_j u_ij d/du_j spanning L(U)."""
    M = _matrix(U)
    n = chart.n
    if M.shape != (n, n):
        raise GrassmannianError("matrix size does not match the chart")
    if check and not is_symmetric(M):
        raise GrassmannianError("U must be symmetric for L(U) to be Lagrangian")
    fields = []
    for i in range(n):
        X = total_derivative(chart, i + 1) if chart.order == 1 else _horizontal(chart, i + 1)
        for j in range(n):
            X = X + M[i, j] * chart.partial(chart.us[j])
        fields.append(X)
    return fields


def _horizontal(chart: Chart, i: int) -> VectorField:
    return VectorField(chart, {chart.xs[i - 1]: 1, chart.u: chart.us[i - 1]})


def symplectic_defect(U, chart: Chart) -> sp.Matrix:
    """Matrix of d(theta)(X_i, X_j) on the would-be span of L(U)."""
    fields = plane_span(U, chart, check=False)
    dth = exterior_derivative(contact_form(chart))
    n = len(fields)
    return sp.Matrix(n, n, lambda i, j: evaluate_form(dth, fields[i], fields[j]))


@dataclass(frozen=True)
class PlueckerPoint:
    z: tuple

    def __post_init__(self):
        if len(self.z) != 5:
            raise GrassmannianError("a Pluecker point has five homogeneous coordinates")
        if all(sp.sympify(v) == 0 for v in self.z):
            raise GrassmannianError("all coordinates vanish")

    def __iter__(self):
        return iter(self.z)

    def __eq__(self, other):
        if not isinstance(other, PlueckerPoint):
            return NotImplemented
        # projective equality: all 2x2 minors vanish
        a, b = self.z, other.z
        return all(simplify(a[i] * b[j] - a[j] * b[i]) == 0 for i in range(5) for j in range(i + 1, 5))

    def __hash__(self):
        return hash(len(self.z))


def pluecker(U) -> PlueckerPoint:
    """[1 : u11 : u12 : u22 : det U] for a symmetric 2x2 matrix."""
    M = _matrix(U)
    if M.shape != (2, 2):
        raise GrassmannianError("the Pluecker embedding is implemented for n = 2")
    if not is_symmetric(M):
        raise GrassmannianError("U must be symmetric")
    det = simplify(M[0, 0] * M[1, 1] - M[0, 1] ** 2)
    return PlueckerPoint((sp.Integer(1), M[0, 0], M[0, 1], M[1, 1], det))


def on_lie_quadric(z: PlueckerPoint) -> bool:
    z0, z1, z2, z3, z4 = (sp.sympify(v) for v in z)
    return simplify(z0 * z4 - (z1 * z3 - z2 ** 2)) == 0


def hyperplane_value(z: PlueckerPoint, coeffs: Sequence) -> sp.Expr:
    """Pairing of a Pluecker point with (Dc, A, B, C, N)."""
    return simplify(sum(sp.sympify(c) * sp.sympify(v) for c, v in zip(coeffs, z)))


def rank_of_direction(dU) -> int:
    M = _matrix(dU)
    if not is_symmetric(M):
        raise GrassmannianError("a tangent direction is a symmetric matrix")
    if all(v.is_Rational for v in M):
        return exact_rank([[Fraction(int(v.p), int(v.q)) for v in M.row(i)] for i in range(M.rows)])
    return generic_rank(M.tolist()).rank


def rank_one_direction(xi) -> sp.Matrix:
    xi = [sp.sympify(v) for v in xi]
    return sp.Matrix(len(xi), len(xi), lambda i, j: xi[i] * xi[j])


@dataclass(frozen=True)
class LineProlongation:
    parameter: sp.Symbol
    curve: sp.Matrix          # U(t)
    tangent: sp.Matrix        # xi (x) xi
    parametrized_by: str


def line_prolongation(xi, U0, parameter: sp.Symbol | None = None) -> LineProlongation:
    """The rank-1 family of Lagrangian planes through ker(xi) in L(U0)."""
    xi1, xi2 = (sp.sympify(v) for v in xi)
    M0 = _matrix(U0)
    if M0.shape != (2, 2) or not is_symmetric(M0):
        raise GrassmannianError("U0 must be a symmetric 2x2 matrix")
    t = parameter if parameter is not None else sp.Symbol("t")
    a, b, c = M0[0, 0], M0[0, 1], M0[1, 1]
    if xi1 == 0 and xi2 == 0:
        raise GrassmannianError("xi must be nonzero")
    if xi2 == 0:
        curve = sp.Matrix([[t, b], [b, c]])
        by = "u11"
    elif xi1 == 0:
        curve = sp.Matrix([[a, b], [b, t]])
        by = "u22"
    else:
        curve = sp.Matrix([[a + xi1 / xi2 * (t - b), t], [t, c + xi2 / xi1 * (t - b)]])
        by = "u12"
    curve = curve.applyfunc(simplify)
    return LineProlongation(t, curve, rank_one_direction((xi1, xi2)), by)


def mae_value(coeffs, U) -> sp.Expr:
    Dc, A, B, C, N = (sp.sympify(v) for v in coeffs)
    M = _matrix(U)
    return simplify(Dc + A * M[0, 0] + B * M[0, 1] + C * M[1, 1] + N * (M[0, 0] * M[1, 1] - M[0, 1] ** 2))


def is_strong_characteristic(xi, U0, mae, point=None) -> bool:
    """The MAE vanishes identically along the line prolongation through U0."""
    coeffs = mae.coefficients() if hasattr(mae, "coefficients") else tuple(mae)
    if point:
        table = {sp.Symbol(k) if isinstance(k, str) else k: sp.sympify(v) for k, v in point.items()}
        coeffs = tuple(simplify(sp.sympify(c).xreplace(table)) for c in coeffs)
    if not is_zero(mae_value(coeffs, U0)):
        raise GrassmannianError("the base plane does not lie on the equation")
    lp = line_prolongation(xi, U0)
    along = mae_value(coeffs, lp.curve)
    return simplify(along) == 0


def hyperplane_section(Dc, A, B, C, N, chart: Chart | None = None):
    """The MAE cut out of the Lie quadric by the hyperplane (Dc, A, B, C, N)."""
    from .mae2d import MAE2D, mae_chart

    return MAE2D(sp.sympify(Dc), sp.sympify(A), sp.sympify(B), sp.sympify(C), sp.sympify(N), chart or mae_chart())
