"""Goursat-type Monge-Ampere equations in n variables, n-forms, intermediate
integrals and the generalized Monge method."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .distributions import Distribution, DistributionError, symplectic_orthogonal
from .first_order import CauchyDatum, FirstOrderPDE, FlowSolution, _vectorize, integrate_characteristics
from .jets import (
    Chart,
    KForm,
    VectorField,
    all_index_subsets,
    apply,
    contact_form,
    evaluate_form,
    exterior_derivative,
    legendre,
    lie_derivative,
    pushforward,
    wedge_all,
)
from .symbolic import is_zero, simplify


class GoursatError(ValueError):
    pass


class NonGraphicalError(GoursatError):
    pass


class MongeConditionError(GoursatError):
    pass


class NoRelationError(GoursatError):
    pass


# --------------------------------------------------------------------------
# restriction of n-forms to Lagrangian planes


def _plane_rows(chart: Chart, U: sp.Matrix) -> list:
    """dx^i, du, du_i written in the dx basis on the plane L(U)."""
    n = chart.n
    rows = []
    for c in chart.coords:
        if c in chart.xs:
            i = chart.xs.index(c)
            rows.append([sp.Integer(1) if j == i else sp.Integer(0) for j in range(n)])
        elif c == chart.u:
            rows.append(list(chart.us))
        elif c in chart.us:
            i = chart.us.index(c)
            rows.append([U[i, j] for j in range(n)])
        else:
            raise GoursatError(f"coordinate {c} is not on an order-1 chart")
    return rows


def restrict_form_to_plane(omega: KForm, U=None, chart2: Chart | None = None) -> sp.Expr:
    """Coefficient of dx^1 ^ ... ^ dx^n of omega restricted to L(U)."""
    chart = omega.chart
    n = chart.n
    if omega.degree != n:
        raise GoursatError(f"expected an {n}-form, got degree {omega.degree}")
    if U is None:
        U = (chart2 or chart.prolonged()).hessian()
    U = sp.Matrix(U)
    rows = _plane_rows(chart, U)
    total = sp.Integer(0)
    for key, c in omega.coeffs.items():
        total += c * sp.Matrix([rows[k] for k in key]).det()
    return simplify(sp.expand(total))


# --------------------------------------------------------------------------
# Goursat equations


def _contact_row(X: VectorField) -> list:
    chart = X.chart
    return [X.component(x) for x in chart.xs] + [X.component(p) for p in chart.us]


def _check_in_contact(D: Distribution):
    theta = contact_form(D.chart)
    for g in D.generators:
        if not is_zero(evaluate_form(theta, g)):
            raise DistributionError("distribution is not contained in the contact distribution")


def _determinant_equation(D: Distribution, chart2: Chart):
    """det of the 2n x 2n matrix stacking D and L(U); normalized by the
    horizontal block when that block is invertible."""
    n = D.chart.n
    G = sp.Matrix([_contact_row(X) for X in D.generators])
    P = G[:, :n]
    detP = simplify(P.det())
    graphical = detP != 0
    if graphical:
        G = (P.inv() * G).applyfunc(simplify)
    U = chart2.hessian()
    H = sp.eye(n).row_join(U)
    e = simplify(sp.expand(G.col_join(H).det(method="berkowitz")))
    return e, graphical, G


def _is_constant_in(e: sp.Expr, chart2: Chart) -> bool:
    hess = {chart2.uij(i, j) for i in range(1, chart2.n + 1) for j in range(i, chart2.n + 1)}
    return not (e.free_symbols & hess)


@dataclass
class GoursatMAE:
    """E_D: Lagrangian planes meeting the rank-n distribution D."""

    D: Distribution
    expr: sp.Expr = None
    graphical: bool = False
    chart2: Chart = None
    legendre_subset: tuple | None = None
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        chart = self.D.chart
        if not isinstance(chart, Chart) or chart.order != 1:
            raise GoursatError("D must live on an order-1 chart")
        if self.D.rank != chart.n:
            raise GoursatError(f"D must have rank {chart.n}, got {self.D.rank}")
        _check_in_contact(self.D)
        if self.expr is None:
            self._build()

    @property
    def chart(self) -> Chart:
        return self.D.chart

    @property
    def n(self) -> int:
        return self.D.chart.n

    def _build(self):
        chart2 = self.chart.prolonged()
        e, graphical, _ = _determinant_equation(self.D, chart2)
        self.graphical = graphical
        if not graphical:
            self.diagnostics.append("D is not graphical over the horizontal plane; general determinant used")
        if _is_constant_in(e, chart2):
            self.diagnostics.append("needs Legendre rotation: the determinant does not depend on the second derivatives")
            for S in all_index_subsets(self.n):
                if not S:
                    continue
                m = legendre(self.chart, S)
                Dt = Distribution(m.target, [pushforward(m, X) for X in self.D.generators], self.D.seed)
                c2 = m.target.prolonged()
                et, g2, _ = _determinant_equation(Dt, c2)
                if not _is_constant_in(et, c2):
                    self.expr, self.chart2, self.legendre_subset, self.graphical = et, c2, tuple(S), g2
                    self.diagnostics.append(f"equation written after the partial Legendre map on indices {list(S)}")
                    return
            raise NonGraphicalError("no partial Legendre map yields a nonconstant equation")
        self.expr = e
        self.chart2 = chart2

    def orthogonal(self) -> Distribution:
        return symplectic_orthogonal(self.D, contact_form(self.chart))


def goursat_mae(generators: Sequence[VectorField], chart: Chart | None = None, seed: int = 0) -> GoursatMAE:
    chart = chart or generators[0].chart
    return GoursatMAE(Distribution(chart, generators, seed))


def equation_expr(g: GoursatMAE) -> sp.Expr:
    return g.expr


def graphical_matrix(g: GoursatMAE) -> sp.Matrix:
    """F with E_D = {det(U - F) = 0}; only for graphical D."""
    if not g.graphical or g.legendre_subset is not None:
        raise NonGraphicalError("D is not graphical over the horizontal plane; try a partial Legendre map")
    n = g.n
    G = sp.Matrix([_contact_row(X) for X in g.D.generators])
    G = (G[:, :n].inv() * G).applyfunc(simplify)
    return G[:, n:]


def omega_from_distribution(D: Distribution) -> KForm:
    """L_{Y_1} theta ^ ... ^ L_{Y_n} theta for generators Y_i of the orthogonal."""
    chart = D.chart
    if D.rank != chart.n:
        raise GoursatError(f"D must have rank {chart.n}")
    _check_in_contact(D)
    theta = contact_form(chart)
    Dp = symplectic_orthogonal(D, theta)
    return wedge_all([lie_derivative(Y, theta) for Y in Dp.generators])


def quotient_factor(a: sp.Expr, b: sp.Expr, chart2: Chart | None = None):
    """a / b when it is free of second derivatives, else None."""
    if b == 0:
        return None
    q = simplify(sp.cancel(sp.together(a / b)))
    if q == 0:
        return None
    if chart2 is not None and not _is_constant_in(q, chart2):
        return None
    return q


# --------------------------------------------------------------------------
# intermediate integrals


def is_first_integral(f, D: Distribution) -> bool:
    f = sp.sympify(f)
    return all(is_zero(apply(X, f)) for X in D.generators)


def is_intermediate_integral(f, g: GoursatMAE) -> bool:
    return is_first_integral(f, g.D) or is_first_integral(f, g.orthogonal())


@dataclass
class MongeProblem:
    goursat: GoursatMAE
    datum: CauchyDatum
    integrals: list
    psi: sp.Expr | None = None
    side: str = "D"

    def __post_init__(self):
        if self.goursat.n < 2:
            raise GoursatError("the Monge method needs n >= 2")
        self.integrals = [sp.sympify(l) for l in self.integrals]
        if len(self.datum.params) != self.goursat.n - 1:
            raise GoursatError(f"a Cauchy datum has {self.goursat.n - 1} parameters")
        if not self.datum.is_integral():
            raise GoursatError("datum violates the contact condition")
        if self.integrals:
            for side, dist in (("D", self.goursat.D), ("D_perp", self.goursat.orthogonal())):
                if all(is_first_integral(l, dist) for l in self.integrals):
                    self.side = side
                    break
            else:
                raise GoursatError("integrals are not first integrals of D or of its orthogonal")

    def integral_symbols(self):
        return sp.symbols(f"l1:{len(self.integrals) + 1}")


def _monomials(k: int, degree: int):
    out = []
    for d in range(degree + 1):
        out.extend(itertools.combinations_with_replacement(range(k), d))
    return out


def _sample_params(params, count: int):
    pts = []
    for a in range(count):
        # distinct small rationals, deterministic
        pts.append({p: sp.Rational(1 + ((a * (3 + 2 * j) + j) % 17), 2 + (a + j) % 5) for j, p in enumerate(params)})
    return pts


def find_vanishing_integral(problem: MongeProblem, max_degree: int = 2) -> sp.Expr:
    """f = psi(lambda_1, ...) vanishing on the datum, psi of lowest degree <= max_degree."""
    lams = problem.integrals
    datum = problem.datum
    if problem.psi is not None:
        syms = problem.integral_symbols()
        f = simplify(sp.sympify(problem.psi).xreplace(dict(zip(syms, lams))))
        if not is_zero(f.xreplace(datum.components)):
            raise NoRelationError("the supplied relation does not vanish on the datum")
        return f
    if len(lams) < problem.goursat.n:
        raise NoRelationError(f"at least {problem.goursat.n} first integrals are required")
    bars = [simplify(l.xreplace(datum.components)) for l in lams]
    for degree in range(1, max_degree + 1):
        monos = _monomials(len(lams), degree)
        pts = _sample_params(datum.params, 3 * len(monos))
        rows = []
        for pt in pts:
            vals = [sp.nsimplify(b.xreplace(pt)) for b in bars]
            rows.append([sp.Mul(*[vals[i] for i in m]) for m in monos])
        null = sp.Matrix(rows).nullspace()
        for v in null:
            if all(v[i] == 0 for i, m in enumerate(monos) if len(m) > 0):
                continue
            den = sp.ilcm(*[sp.fraction(c)[1] for c in v])
            v = [sp.nsimplify(c * den) for c in v]
            lead = next(c for c in v if c != 0)
            if lead < 0:
                v = [-c for c in v]
            f = sum((c * sp.Mul(*[lams[i] for i in m]) for c, m in zip(v, monos)), sp.Integer(0))
            f = simplify(f)
            if is_zero(f.xreplace(datum.components)):
                return f
    raise NoRelationError(f"no relation of degree <= {max_degree}; supply psi")


def monge_condition(problem: MongeProblem, f) -> list:
    """d(theta)(datum tangent, Y_f) along the datum, one Expr per parameter."""
    from .hamiltonian import hamiltonian_field

    chart = problem.goursat.chart
    Y = hamiltonian_field(f, chart)
    comps = problem.datum.components
    yv = [simplify(Y.component(c).xreplace(comps)) for c in chart.coords]
    xi = [chart.index(x) for x in chart.xs]
    pi = [chart.index(p) for p in chart.us]
    out = []
    for T in problem.datum.tangent_exprs():
        val = sum((T[a] * yv[b] - T[b] * yv[a] for a, b in zip(xi, pi)), sp.Integer(0))
        out.append(simplify(val))
    return out


def _hessian_residual(g: GoursatMAE, chart: Chart, field_fn):
    """Residual of the equation on the surface spanned by transported tangents and the field."""
    n = chart.n
    c2 = g.chart2
    hess = [c2.uij(i, j) for i in range(1, n + 1) for j in range(i, n + 1)]
    base = [c2.sym(c.name) for c in chart.coords]
    eq = _vectorize([g.expr], base + hess)
    xi = [chart.index(x) for x in chart.xs]
    pi = [chart.index(p) for p in chart.us]

    def residual(Z, T):
        M, K, dim = Z.shape
        flat = Z.reshape(M * K, dim)
        yv = field_fn(flat).reshape(M, K, 1, dim)
        tan = np.concatenate([T, yv], axis=2)
        X = tan[..., xi]
        P = tan[..., pi]
        # singular projections are folds; they are trimmed by fold detection afterwards
        sing = np.abs(np.linalg.det(X)) <= 1e-12
        X = np.where(sing[..., None, None], np.eye(n), X)
        U = np.linalg.solve(X, P)
        asym = np.max(np.abs(U - np.swapaxes(U, -1, -2)), axis=(-1, -2))
        U = 0.5 * (U + np.swapaxes(U, -1, -2))
        args = [Z[..., k] for k in range(dim)]
        args += [U[..., i - 1, j - 1] for i in range(1, n + 1) for j in range(i, n + 1)]
        val = eq(*args)[0]
        return np.where(sing, 0.0, np.maximum(np.abs(val), asym))

    return residual


def _check_graphical_sweep(datum: CauchyDatum, chart: Chart, field_fn, param_grid):
    """The datum tangents and Y_f must project onto independent x-directions."""
    from .first_order import _param_grid

    grid, _ = _param_grid(datum.params, param_grid)
    z0 = datum.sample(grid)
    tans = datum.sample_tangents(grid)
    yv = field_fn(z0)[:, None, :]
    xi = [chart.index(x) for x in chart.xs]
    X = np.concatenate([tans, yv], axis=1)[..., xi]
    dets = np.abs(np.linalg.det(X))
    if np.any(dets <= 1e-12 * max(1.0, float(np.max(np.abs(X))))):
        raise GoursatError("the swept surface is not graphical over x at the datum (Y_f projects into the datum)")


def monge_extend(problem: MongeProblem, f=None, s_range=(0.0, 1.0), h: float = 0.01,
                 param_grid=None) -> FlowSolution:
    """Sweep the datum along the Hamiltonian field of a vanishing intermediate integral."""
    from .first_order import _field_functions

    g = problem.goursat
    if g.legendre_subset is not None:
        raise GoursatError("the equation is only available after a Legendre map; transform the datum first")
    if f is None:
        f = find_vanishing_integral(problem)
    f = sp.sympify(f)
    if not is_zero(f.xreplace(problem.datum.components)):
        raise GoursatError("f does not vanish on the datum")
    bad = [e for e in monge_condition(problem, f) if not is_zero(e)]
    if bad:
        raise MongeConditionError(f"d(theta)(T Sigma, Y_f) does not vanish: {bad[0]}")
    # the condition above follows from f = 0 on the datum; the integral test is the real guard
    if not is_intermediate_integral(f, g):
        raise MongeConditionError("f is not a first integral of D or of its orthogonal")
    pde = FirstOrderPDE(g.chart, f)
    field_fn, _ = _field_functions(pde.field(), False)
    _check_graphical_sweep(problem.datum, g.chart, field_fn, param_grid)
    extra = _hessian_residual(g, g.chart, field_fn)
    sol = integrate_characteristics(pde, problem.datum, s_range, h, param_grid, extra_residual=extra)
    sol.method = "monge-extend"
    return sol


def choose_branch(branches: Sequence[sp.Expr], target: sp.Symbol, point: Mapping) -> int:
    """Index of the closed-form branch matching point[target] at a datum point."""
    vals = [abs(complex(sp.N(b.xreplace(point))) - complex(sp.N(point[target]))) for b in branches]
    best = min(range(len(branches)), key=lambda i: vals[i])
    if sum(1 for v in vals if abs(v - vals[best]) < 1e-12) > 1:
        raise GoursatError("branches coincide at the chosen point")
    return best


# --------------------------------------------------------------------------
# (para-)complex forms


def _one_forms(chart: Chart, k: int, sign: int = 1):
    return chart.dcoord(chart.xs[k]), sign * chart.dcoord(chart.us[k])


def complex_mae(n: int, mode: str = "complex", xi=1, eta=1):
    """Restrictions of the two real components of the holomorphic volume form.

    complex: Omega = (dx^1 + i du_1) ^ ... ^ (dx^n + i du_n) = Omega_1 + i Omega_2.
    para: null coordinates y = x, v = (u_1..u_n); Omega = e xi d^n y + ebar eta d^n v
    with e, ebar idempotent, and Omega_1 = xi d^n y + eta d^n v,
    Omega_2 = xi d^n y - eta d^n v.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    chart = Chart(n, 1)
    if mode == "complex":
        factors = [chart.dcoord(chart.xs[k]) + sp.I * chart.dcoord(chart.us[k]) for k in range(n)]
        omega = wedge_all(factors)
        e = restrict_form_to_plane(omega)
        parts = sp.collect(sp.expand(e), sp.I, evaluate=False)
        re = simplify(parts.get(sp.Integer(1), sp.Integer(0)))
        im = simplify(parts.get(sp.I, sp.Integer(0)))
        return re, im
    if mode == "para":
        ey, ev = para_components(chart, xi, eta)
        return simplify(ey + ev), simplify(ey - ev)
    raise ValueError(f"unknown mode {mode!r}")


def para_components(chart: Chart, xi=1, eta=1):
    """Restrictions of the e- and ebar-components xi d^n y and eta d^n v."""
    n = chart.n
    xi = sp.sympify(xi).xreplace({sp.Symbol(f"y{i}"): chart.xs[i - 1] for i in range(1, n + 1)})
    eta = sp.sympify(eta).xreplace({sp.Symbol(f"v{i}"): chart.us[i - 1] for i in range(1, n + 1)})
    dy = wedge_all([chart.dcoord(x) for x in chart.xs])
    dv = wedge_all([chart.dcoord(p) for p in chart.us])
    return restrict_form_to_plane(xi * dy), restrict_form_to_plane(eta * dv)


class Para:
    """Para-complex number a e + b ebar in the idempotent basis."""

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    @classmethod
    def from_tau(cls, x, p):
        # x + tau p = (x - p) e + (x + p) ebar
        return cls(x - p, x + p)

    def to_tau(self):
        return ((self.a + self.b) / 2, (self.b - self.a) / 2)

    def __add__(self, o):
        return Para(self.a + o.a, self.b + o.b)

    def __mul__(self, o):
        return Para(self.a * o.a, self.b * o.b)

    def __eq__(self, o):
        return isinstance(o, Para) and simplify(self.a - o.a) == 0 and simplify(self.b - o.b) == 0


def pythagorean_angle(m: int, k: int):
    """(cos phi, sin phi) rational from the triple (m^2 - k^2, 2mk, m^2 + k^2)."""
    r = m * m + k * k
    return sp.Rational(m * m - k * k, r), sp.Rational(2 * m * k, r)


def phase_rotation_check(n: int, c, s) -> bool:
    """Under z -> e^{i phi} z the pair (Omega_1, Omega_2) rotates by n phi."""
    chart = Chart(n, 1)
    c, s = sp.sympify(c), sp.sympify(s)
    if simplify(c ** 2 + s ** 2 - 1) != 0:
        raise ValueError("(c, s) must lie on the unit circle")
    rotated = []
    for k in range(n):
        dx, du = chart.dcoord(chart.xs[k]), chart.dcoord(chart.us[k])
        # e^{i phi}(dx + i du) = (c dx - s du) + i (s dx + c du)
        rotated.append((c * dx - s * du) + sp.I * (s * dx + c * du))
    e = restrict_form_to_plane(wedge_all(rotated))
    parts = sp.collect(sp.expand(e), sp.I, evaluate=False)
    re2 = parts.get(sp.Integer(1), sp.Integer(0))
    im2 = parts.get(sp.I, sp.Integer(0))
    re, im = complex_mae(n)
    w = sp.expand((c + sp.I * s) ** n)
    cn, sn = sp.re(w), sp.im(w)
    return simplify(re2 - (cn * re - sn * im)) == 0 and simplify(im2 - (sn * re + cn * im)) == 0


def monge_kantorovich_pde(xi, eta, n: int, chart2: Chart | None = None) -> sp.Expr:
    """det(U) eta(u_1..u_n) - xi(x^1..x^n); y and v name the null coordinates."""
    chart2 = chart2 or Chart(n, 2)
    xi = sp.sympify(xi).xreplace({sp.Symbol(f"y{i}"): chart2.xs[i - 1] for i in range(1, n + 1)})
    eta = sp.sympify(eta).xreplace({sp.Symbol(f"v{i}"): chart2.us[i - 1] for i in range(1, n + 1)})
    return simplify(chart2.hessian().det() * eta - xi)
