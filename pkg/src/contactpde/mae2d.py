"""Monge-Ampere equations in two independent variables.

An equation Dc + A u11 + B u12 + C u22 + N (u11 u22 - u12^2) = 0 is stored by
its five coefficients, functions on the order-1 chart (x1, x2, u, u1, u2).
Characteristic distributions are written in the basis (D1, D2, d/du1, d/du2)
of the contact distribution.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import sympy as sp

from .distributions import Distribution, derived_flag, symplectic_orthogonal
from .jets import Chart, VectorField, contact_form, evaluate_form, total_derivative
from .linalg import generic_rank, sample_matrix
from .symbolic import compile_exact, eval_exact, is_zero, probe_points, random_rational, simplify

CLASSIFY_PROBES = 50


class MAEError(ValueError):
    pass


class EllipticError(MAEError):
    """A non-elliptic equation was required."""


class NeedsLegendreRotation(MAEError):
    """The distribution yields a constant equation (vertical case)."""


def mae_chart() -> Chart:
    return Chart(2, 1)


@dataclass
class MAE2D:
    Dc: sp.Expr
    A: sp.Expr
    B: sp.Expr
    C: sp.Expr
    N: sp.Expr
    chart: Chart = field(default_factory=mae_chart)

    def __post_init__(self):
        for name in ("Dc", "A", "B", "C", "N"):
            setattr(self, name, simplify(getattr(self, name)))
        if all(c == 0 for c in self.coefficients()):
            raise MAEError("all five coefficients vanish")

    def coefficients(self) -> tuple:
        return (self.Dc, self.A, self.B, self.C, self.N)

    def expr(self, chart2: Chart | None = None) -> sp.Expr:
        c2 = chart2 or self.chart.prolonged()
        u11, u12, u22 = c2.uij(1, 1), c2.uij(1, 2), c2.uij(2, 2)
        return simplify(self.Dc + self.A * u11 + self.B * u12 + self.C * u22 + self.N * (u11 * u22 - u12 ** 2))

    def as_dict(self) -> dict:
        return {k: sp.sstr(v) for k, v in zip(("Dc", "A", "B", "C", "N"), self.coefficients())}

    def is_quasilinear(self) -> bool:
        return self.N == 0


def hyperplane_section(Dc, A, B, C, N, chart: Chart | None = None) -> MAE2D:
    return MAE2D(Dc, A, B, C, N, chart or mae_chart())


def proportional(a: Sequence, b: Sequence) -> sp.Expr | None:
    """The factor k with a = k * b (entrywise), or None."""
    a = [simplify(v) for v in a]
    b = [simplify(v) for v in b]
    k = None
    for x, y in zip(a, b):
        if y != 0:
            k = simplify(x / y)
            break
    if k is None or k == 0:
        return None
    if all(simplify(x - k * y) == 0 for x, y in zip(a, b)):
        return k
    return None


def same_equation(m1: MAE2D, m2: MAE2D) -> bool:
    return proportional(m1.coefficients(), m2.coefficients()) is not None


# --------------------------------------------------------------------------
# discriminant and classification


class MAEClass(enum.Enum):
    ELLIPTIC = "Elliptic"
    PARABOLIC = "Parabolic"
    HYPERBOLIC = "Hyperbolic"
    MIXED = "Mixed"


def discriminant(mae: MAE2D) -> sp.Expr:
    return simplify(mae.B ** 2 - 4 * mae.A * mae.C + 4 * mae.N * mae.Dc)


def _sign_class(v) -> MAEClass:
    if v == 0 or abs(float(v)) < 1e-12:
        return MAEClass.PARABOLIC
    return MAEClass.HYPERBOLIC if v > 0 else MAEClass.ELLIPTIC


def _region_points(symbols, count, seed, region):
    rng = random.Random(seed)
    while True:
        pt = {}
        for s in symbols:
            key = s if s in region else s.name
            if region and key in region:
                lo, hi = (Fraction(v).limit_denominator(10 ** 6) for v in region[key])
                q = rng.randint(1, 97)
                p = rng.randint(int(lo * q), int(hi * q))
                pt[s] = Fraction(p, q)
            else:
                pt[s] = random_rational(rng)
        yield pt


def classify(mae: MAE2D, point: Mapping | None = None, probe_count: int = CLASSIFY_PROBES, seed: int = 0,
             region: Mapping | None = None) -> MAEClass:
    """Sign of the discriminant at a point, or over a sampled region."""
    delta = discriminant(mae)
    if point is not None:
        table = {sp.Symbol(k) if isinstance(k, str) else k: v for k, v in point.items()}
        return _sign_class(eval_exact(delta, table))
    syms = sorted(delta.free_symbols, key=lambda s: s.name)
    if not syms:
        return _sign_class(eval_exact(delta, {}))
    fn = compile_exact([delta], syms)
    signs = set()
    gen = _region_points(syms, probe_count, seed, region or {})
    got = 0
    tries = 0
    while got < probe_count and tries < 50 * probe_count:
        tries += 1
        pt = next(gen)
        try:
            v = fn(*[pt[s] for s in syms])[0]
        except (ZeroDivisionError, ValueError):
            continue
        got += 1
        signs.add(_sign_class(v))
    if MAEClass.ELLIPTIC in signs and MAEClass.HYPERBOLIC in signs:
        return MAEClass.MIXED
    if MAEClass.ELLIPTIC in signs:
        return MAEClass.ELLIPTIC
    if MAEClass.HYPERBOLIC in signs:
        return MAEClass.HYPERBOLIC
    return MAEClass.PARABOLIC


def _delta_sign_profile(delta, probe_count: int = 25, seed: int = 0):
    syms = sorted(delta.free_symbols, key=lambda s: s.name)
    if not syms:
        v = eval_exact(delta, {})
        return [v]
    return [rows[0][0] for _, rows in sample_matrix([[delta]], probe_count, seed)]


def require_non_elliptic(mae: MAE2D):
    vals = _delta_sign_profile(discriminant(mae))
    if all(v < 0 and abs(float(v)) > 1e-12 for v in vals):
        raise EllipticError("the equation is elliptic (negative discriminant at every probe)")


# --------------------------------------------------------------------------
# symbol


@dataclass
class QuadraticForm:
    """a11 xi1^2 + a12 xi1 xi2 + a22 xi2^2"""

    a11: sp.Expr
    a12: sp.Expr
    a22: sp.Expr

    def __call__(self, xi1, xi2):
        return simplify(self.a11 * xi1 ** 2 + self.a12 * xi1 * xi2 + self.a22 * xi2 ** 2)

    def coefficients(self):
        return (self.a11, self.a12, self.a22)

    def discriminant(self):
        return simplify(self.a12 ** 2 - 4 * self.a11 * self.a22)


def symbol(F, point: Mapping | None = None, chart2: Chart | None = None, tol: float = 1e-9) -> QuadraticForm:
    """Coefficients F_{u_ij} of the symbol, evaluated at a point of F = 0."""
    chart2 = chart2 or Chart(2, 2)
    F = sp.sympify(F)
    a11 = sp.diff(F, chart2.uij(1, 1))
    a12 = sp.diff(F, chart2.uij(1, 2))
    a22 = sp.diff(F, chart2.uij(2, 2))
    if point is not None:
        table = {chart2.sym(k) if isinstance(k, str) and k in chart2 else (sp.Symbol(k) if isinstance(k, str) else k): sp.sympify(v)
                 for k, v in point.items()}
        val = simplify(F.xreplace(table))
        if not val.free_symbols and abs(float(val)) > tol:
            raise MAEError(f"point is off the equation (F = {val})")
        a11, a12, a22 = (e.xreplace(table) for e in (a11, a12, a22))
    return QuadraticForm(simplify(a11), simplify(a12), simplify(a22))


def symbol_factors(mae: MAE2D, chart2: Chart | None = None):
    """The two linear factors (coefficients of xi1, xi2) of the MAE symbol,
    with u11 eliminated through the equation."""
    chart2 = chart2 or mae.chart.prolonged()
    u12, u22 = chart2.uij(1, 2), chart2.uij(2, 2)
    r = simplify(sp.sqrt(discriminant(mae)))
    a = mae.A + mae.N * u22
    f1 = (a, -(-mae.B / 2 + mae.N * u12 + r / 2))
    f2 = (a, -(-mae.B / 2 + mae.N * u12 - r / 2))
    return f1, f2


def eliminate_u11(mae: MAE2D, chart2: Chart | None = None) -> sp.Expr:
    chart2 = chart2 or mae.chart.prolonged()
    u12, u22 = chart2.uij(1, 2), chart2.uij(2, 2)
    return simplify(-(mae.Dc + mae.B * u12 + mae.C * u22 - mae.N * u12 ** 2) / (mae.A + mae.N * u22))


# --------------------------------------------------------------------------
# characteristic distributions


def _basis_fields(chart: Chart):
    return [total_derivative(chart, 1), total_derivative(chart, 2), chart.partial(chart.us[0]), chart.partial(chart.us[1])]


def fields_from_rows(rows, chart: Chart) -> list[VectorField]:
    basis = _basis_fields(chart)
    out = []
    for row in rows:
        X = chart.zero_field()
        for c, b in zip(row, basis):
            X = X + c * b
        out.append(X)
    return out


def contact_coordinates(X: VectorField) -> list:
    """Components of a field of the contact distribution in (D1, D2, d/du1, d/du2)."""
    chart = X.chart
    row = [X.component(chart.xs[0]), X.component(chart.xs[1]), X.component(chart.us[0]), X.component(chart.us[1])]
    theta = contact_form(chart)
    if not is_zero(evaluate_form(theta, X)):
        raise MAEError("field is not contained in the contact distribution")
    return row


def structure_operator(mae: MAE2D) -> sp.Matrix:
    """K with K^2 = (Delta/4) I; its eigenspaces are the characteristic distributions."""
    Dc, A, B, C, N = mae.coefficients()
    h = sp.Rational(1, 2)
    return sp.Matrix([
        [h * B, -A, 0, -N],
        [C, -h * B, N, 0],
        [0, Dc, h * B, C],
        [-Dc, 0, -A, -h * B],
    ])


_COLUMN_PAIRS = [(2, 3), (0, 1), (0, 3), (1, 2), (0, 2), (1, 3)]


def _eigen_rows(mae: MAE2D, lam) -> list:
    K = structure_operator(mae) + lam * sp.eye(4)
    cols = [[simplify(-K[i, j]) for i in range(4)] for j in range(4)]
    for a, b in _COLUMN_PAIRS:
        if generic_rank([cols[a], cols[b]]).rank == 2:
            return [cols[a], cols[b]]
    raise MAEError("characteristic distribution degenerates")


@dataclass
class CharacteristicPair:
    D: Distribution
    D_perp: Distribution
    sqrt_delta: sp.Expr
    rows: list
    rows_perp: list


def characteristic_distributions(mae: MAE2D, seed: int = 0) -> CharacteristicPair:
    """D spans the image of K + sqrt(Delta)/2 and D_perp that of K - sqrt(Delta)/2.

    For N != 0 the first choice of columns reproduces the generators
    -N D2 - (B + r)/2 d/du1 + A d/du2 and N D1 - C d/du1 + (B - r)/2 d/du2
    with r = sqrt(Delta)."""
    require_non_elliptic(mae)
    r = simplify(sp.sqrt(discriminant(mae)))
    rows = _eigen_rows(mae, r / 2)
    rows_perp = _eigen_rows(mae, -r / 2)
    chart = mae.chart
    D = Distribution(chart, fields_from_rows(rows, chart), seed)
    Dp = Distribution(chart, fields_from_rows(rows_perp, chart), seed)
    return CharacteristicPair(D, Dp, r, rows, rows_perp)


def _det_expansion(rows, chart2: Chart) -> sp.Expr:
    u11, u12, u22 = chart2.uij(1, 1), chart2.uij(1, 2), chart2.uij(2, 2)
    M = sp.Matrix([rows[0], rows[1], [1, 0, u11, u12], [0, 1, u12, u22]])
    return sp.expand(M.det(method="berkowitz"))


def _normalize_graphical(rows):
    P = sp.Matrix([[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]])
    detP = simplify(P.det())
    if detP == 0:
        return None
    Pinv = P.inv()
    G = sp.Matrix(rows)
    return (Pinv * G).applyfunc(simplify).tolist()


def mae_from_rows(rows, chart: Chart | None = None) -> MAE2D:
    chart = chart or mae_chart()
    chart2 = chart.prolonged()
    norm = _normalize_graphical(rows)
    use = norm if norm is not None else rows
    e = simplify(_det_expansion(use, chart2))
    num, den = sp.fraction(e)
    u11, u12, u22 = chart2.uij(1, 1), chart2.uij(1, 2), chart2.uij(2, 2)
    poly = sp.Poly(sp.expand(num), u11, u12, u22)
    coeff = lambda m: simplify(poly.coeff_monomial(m) / den)
    Dc = coeff(1)
    A = coeff(u11)
    B = coeff(u12)
    C = coeff(u22)
    N = coeff(u11 * u22)
    if simplify(coeff(u12 ** 2) + N) != 0:
        raise MAEError("determinant is not of Monge-Ampere type")
    if A == 0 and B == 0 and C == 0 and N == 0:
        raise NeedsLegendreRotation("the distribution gives a constant equation; apply a partial Legendre map")
    return MAE2D(Dc, A, B, C, N, chart)


def mae_from_distribution(D: Distribution) -> MAE2D:
    """The equation L(U) meets D nontrivially, as an MAE."""
    if D.rank != 2:
        raise MAEError("distribution must have rank 2")
    rows = [contact_coordinates(X) for X in D.generators]
    return mae_from_rows(rows, D.chart)


# --------------------------------------------------------------------------
# Goursat form


@dataclass
class GoursatForm2D:
    F: sp.Matrix | None
    scale: sp.Expr
    rows: list
    graphical: bool
    diagnostics: list = field(default_factory=list)

    def equation(self, chart2: Chart | None = None) -> sp.Expr:
        chart2 = chart2 or Chart(2, 2)
        if self.F is not None:
            U = chart2.hessian()
            return simplify((U - self.F).det())
        return simplify(_det_expansion(self.rows, chart2))


def goursat_form(mae: MAE2D) -> GoursatForm2D:
    """F with mae = scale * det(U - F); for N = 0 the characteristic
    distribution is returned as a general 2x4 generator matrix."""
    require_non_elliptic(mae)
    Dc, A, B, C, N = mae.coefficients()
    if N != 0:
        r = simplify(sp.sqrt(discriminant(mae)))
        f11 = simplify(-C / N)
        f22 = simplify(-A / N)
        f12 = simplify((B + r) / (2 * N))
        f21 = simplify((B - r) / (2 * N))
        F = sp.Matrix([[f11, f12], [f21, f22]])
        rows = [[1, 0, f11, f12], [0, 1, f21, f22]]
        return GoursatForm2D(F, N, rows, True)
    pair = characteristic_distributions(mae)
    rows = pair.rows
    recovered = mae_from_rows(rows, mae.chart)
    k = proportional(mae.coefficients(), recovered.coefficients())
    if k is None:
        raise MAEError("quasi-linear reconstruction failed")
    return GoursatForm2D(None, k, rows, False,
                         ["quasi-linear equation: the characteristic distribution is not graphical over the horizontal plane"])


def goursat_to_mae(F, chart: Chart | None = None) -> MAE2D:
    """Coefficients of det(U - F) = det F - f22 u11 + (f12 + f21) u12 - f11 u22 + det U."""
    F = sp.Matrix(F)
    return MAE2D(F.det(), -F[1, 1], F[0, 1] + F[1, 0], -F[0, 0], 1, chart or mae_chart())


# --------------------------------------------------------------------------
# parabolic classes


class FlagClass(enum.Enum):
    I22 = "I22"
    I2344 = "I2344"
    I2345 = "I2345"
    GENERIC235 = "Generic235"


TEMPLATES = {
    FlagClass.I22: "u11 = 0 (equivalently u11*u22 - u12^2 = 0)",
    FlagClass.I2344: "u22 - 2*a*u12 + a^2*u11 = b with a = 0",
    FlagClass.I2345: "u22 - 2*a*u12 + a^2*u11 = b with a = u",
    FlagClass.GENERIC235: "u22 - 2*a*u12 + a^2*u11 = b (generic flag; a, b arbitrary)",
}

_FLAGS = {
    (2, 2): FlagClass.I22,
    (2, 3, 4, 4): FlagClass.I2344,
    (2, 3, 4, 5): FlagClass.I2345,
    (2, 3, 5): FlagClass.GENERIC235,
}


@dataclass
class FlagReport:
    flag: tuple
    cls: FlagClass
    template: str


def parabolic_flag_classify(D: Distribution) -> FlagReport:
    theta = contact_form(D.chart)
    if D.rank != 2:
        raise MAEError("expected a rank-2 distribution")
    Dp = symplectic_orthogonal(D, theta)
    if not D.same_span(Dp):
        raise MAEError("distribution is not Lagrangian")
    flag = tuple(derived_flag(D))
    if flag not in _FLAGS:
        raise MAEError(f"unexpected derived flag {flag}")
    cls = _FLAGS[flag]
    return FlagReport(flag, cls, TEMPLATES[cls])
