"""Darboux charts, vector fields, differential forms and coordinate maps.

Coordinates are ordered (x1..xn, u, u1..un, u11, u12, ..., unn); every wedge
sign derives from this order.  Forms are stored sparsely as
{sorted index tuple: coefficient}.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .symbolic import simplify


class ChartError(ValueError):
    pass


class CoordinateSystem:
    """An ordered tuple of coordinate symbols."""

    def __init__(self, coords: Sequence[sp.Symbol]):
        coords = tuple(coords)
        names = [c.name for c in coords]
        if len(set(names)) != len(names):
            raise ChartError("coordinate names must be distinct")
        self.coords = coords
        self._index = {c: i for i, c in enumerate(coords)}
        self._by_name = {c.name: c for c in coords}

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, s) -> int:
        if isinstance(s, str):
            s = self._by_name[s]
        return self._index[s]

    def sym(self, name: str) -> sp.Symbol:
        try:
            return self._by_name[name]
        except KeyError:
            raise ChartError(f"unknown coordinate {name!r}; chart has {', '.join(self._by_name)}") from None

    def __contains__(self, s) -> bool:
        if isinstance(s, str):
            return s in self._by_name
        return s in self._index

    def __eq__(self, other):
        return isinstance(other, CoordinateSystem) and self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    # convenience constructors
    def partial(self, s) -> "VectorField":
        if isinstance(s, str):
            s = self.sym(s)
        return VectorField(self, {s: sp.Integer(1)})

    def dcoord(self, s) -> "KForm":
        if isinstance(s, str):
            s = self.sym(s)
        return KForm(self, 1, {(self.index(s),): sp.Integer(1)})

    def zero_field(self) -> "VectorField":
        return VectorField(self, {})

    def function(self, f) -> "KForm":
        return KForm(self, 0, {(): f})


class Chart(CoordinateSystem):
    """Darboux chart of the 1-jet space (order 1) or its prolongation (order 2)."""

    def __init__(self, n: int, order: int = 1, x_names: Sequence[str] | None = None, suffix: str = ""):
        if n < 1:
            raise ChartError("n must be positive")
        if order not in (1, 2):
            raise ChartError("order must be 1 or 2")
        if x_names is None:
            x_names = [f"x{i}" for i in range(1, n + 1)]
        if len(x_names) != n:
            raise ChartError("x_names must have n entries")
        self.n = n
        self.order = order
        self.suffix = suffix
        self.x_names = tuple(x_names)
        self.xs = tuple(sp.Symbol(f"{name}{suffix}") for name in x_names)
        self.u = sp.Symbol(f"u{suffix}")
        self.us = tuple(sp.Symbol(f"u{i}{suffix}") for i in range(1, n + 1))
        self.second = {}
        coords = list(self.xs) + [self.u] + list(self.us)
        if order == 2:
            for i in range(1, n + 1):
                for j in range(i, n + 1):
                    s = sp.Symbol(f"u{i}{j}{suffix}")
                    self.second[(i, j)] = s
                    coords.append(s)
        super().__init__(coords)
        expected = 2 * n + 1 + (n * (n + 1) // 2 if order == 2 else 0)
        assert self.dim == expected

    def __repr__(self):
        return f"Chart(n={self.n}, order={self.order})"

    def uij(self, i: int, j: int) -> sp.Symbol:
        """Second-derivative symbol u_ij (symmetric in i, j); 1-based."""
        i, j = min(i, j), max(i, j)
        if (i, j) in self.second:
            return self.second[(i, j)]
        return sp.Symbol(f"u{i}{j}{self.suffix}")

    def hessian(self) -> sp.Matrix:
        return sp.Matrix(self.n, self.n, lambda a, b: self.uij(a + 1, b + 1))

    def first_order(self) -> "Chart":
        if self.order == 1:
            return self
        return Chart(self.n, 1, self.x_names, self.suffix)

    def prolonged(self) -> "Chart":
        if self.order == 2:
            return self
        return Chart(self.n, 2, self.x_names, self.suffix)


class ODEChart(CoordinateSystem):
    """Coordinates (x, u, p1..pr) for a scalar ODE of order r.

    Derivative names default to u1, u11, u111, ... (p_k is u with k ones).
    """

    def __init__(self, r: int, derivative_names: Sequence[str] | None = None):
        if r < 1:
            raise ChartError("order must be positive")
        if derivative_names is None:
            derivative_names = ["u" + "1" * k for k in range(1, r + 1)]
        self.r = r
        self.x = sp.Symbol("x")
        self.u = sp.Symbol("u")
        self.ps = tuple(sp.Symbol(nm) for nm in derivative_names)
        super().__init__([self.x, self.u, *self.ps])

    def __repr__(self):
        return f"ODEChart(r={self.r})"

    def total_derivative(self) -> "VectorField":
        comps = {self.x: sp.Integer(1), self.u: self.ps[0]}
        for k in range(self.r - 1):
            comps[self.ps[k]] = self.ps[k + 1]
        return VectorField(self, comps)

    def top_vertical(self) -> "VectorField":
        return self.partial(self.ps[-1])


# --------------------------------------------------------------------------
# vector fields


class VectorField:
    __slots__ = ("chart", "components")

    def __init__(self, chart: CoordinateSystem, components: Mapping):
        comps = {}
        for k, v in components.items():
            if isinstance(k, str):
                k = chart.sym(k)
            elif isinstance(k, int):
                k = chart.coords[k]
            elif k not in chart:
                raise ChartError(f"{k} is not a coordinate of {chart!r}")
            v = simplify(v)
            if v != 0:
                comps[k] = v
        self.chart = chart
        self.components = comps

    def component(self, s) -> sp.Expr:
        if isinstance(s, str):
            s = self.chart.sym(s)
        return self.components.get(s, sp.Integer(0))

    def vector(self) -> list:
        return [self.components.get(c, sp.Integer(0)) for c in self.chart.coords]

    def _check(self, other):
        if not isinstance(other, VectorField) or other.chart != self.chart:
            raise ChartError("vector fields live on different charts")

    def __add__(self, other):
        self._check(other)
        comps = dict(self.components)
        for k, v in other.components.items():
            comps[k] = comps.get(k, 0) + v
        return VectorField(self.chart, comps)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return VectorField(self.chart, {k: -v for k, v in self.components.items()})

    def __mul__(self, f):
        if isinstance(f, VectorField):
            return NotImplemented
        return VectorField(self.chart, {k: f * v for k, v in self.components.items()})

    __rmul__ = __mul__

    def __call__(self, f):
        return apply(self, f)

    def is_zero(self) -> bool:
        return not self.components

    def __eq__(self, other):
        if not isinstance(other, VectorField) or other.chart != self.chart:
            return False
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.chart, tuple(sorted((k.name, sp.srepr(v)) for k, v in self.components.items()))))

    def __repr__(self):
        if not self.components:
            return "0"
        parts = []
        for c in self.chart.coords:
            if c in self.components:
                parts.append(f"({sp.sstr(self.components[c])})*d_{c.name}")
        return " + ".join(parts)

    def subs(self, bindings: Mapping) -> "VectorField":
        table = {sp.sympify(k): sp.sympify(v) for k, v in bindings.items()}
        return VectorField(self.chart, {k: v.xreplace(table) for k, v in self.components.items()})


def apply(X: VectorField, f) -> sp.Expr:
    """Directional derivative X(f)."""
    f = sp.sympify(f)
    total = sp.Integer(0)
    for k, v in X.components.items():
        total += v * sp.diff(f, k)
    return simplify(total)


def bracket(X: VectorField, Y: VectorField) -> VectorField:
    X._check(Y)
    comps = {}
    for c in X.chart.coords:
        val = apply(X, Y.component(c)) - apply(Y, X.component(c))
        comps[c] = val
    return VectorField(X.chart, comps)


def total_derivative(chart: Chart, i: int) -> VectorField:
    """D_{x^i}; on order-2 charts includes the u_ij d/du_j terms.  1-based i."""
    if isinstance(chart, ODEChart):
        if i != 1:
            raise ChartError("index out of range")
        return chart.total_derivative()
    if not 1 <= i <= chart.n:
        raise ChartError(f"index {i} out of range 1..{chart.n}")
    comps = {chart.xs[i - 1]: sp.Integer(1), chart.u: chart.us[i - 1]}
    if chart.order == 2:
        for j in range(1, chart.n + 1):
            comps[chart.us[j - 1]] = chart.uij(i, j)
    return VectorField(chart, comps)


def contact_distribution_fields(chart: Chart) -> list[VectorField]:
    """Generators of the contact (Cartan) distribution of the chart."""
    fields = [total_derivative(chart, i) for i in range(1, chart.n + 1)]
    if chart.order == 1:
        fields += [chart.partial(p) for p in chart.us]
    else:
        fields += [chart.partial(s) for s in chart.second.values()]
    return fields


# --------------------------------------------------------------------------
# differential forms


def _sort_with_sign(idx: Sequence[int]):
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return None, 0
    sign = 1
    # bubble sort parity
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return tuple(idx), sign


class KForm:
    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart: CoordinateSystem, degree: int, coeffs: Mapping | None = None, normalize: bool = True):
        self.chart = chart
        self.degree = degree
        out = {}
        for key, val in (coeffs or {}).items():
            key = tuple(chart.index(k) if not isinstance(k, int) else k for k in key)
            if len(key) != degree:
                raise ValueError("index tuple length must equal the degree")
            skey, sign = _sort_with_sign(key)
            if skey is None:
                continue
            out[skey] = out.get(skey, 0) + sign * sp.sympify(val)
        if normalize:
            out = {k: simplify(v) for k, v in out.items()}
        self.coeffs = {k: v for k, v in out.items() if v != 0}

    @classmethod
    def zero(cls, chart, degree: int) -> "KForm":
        return cls(chart, degree, {})

    def coeff(self, *keys) -> sp.Expr:
        """Coefficient on the given coordinates (any order; sign applied)."""
        idx = [self.chart.index(k) if not isinstance(k, int) else k for k in keys]
        skey, sign = _sort_with_sign(idx)
        if skey is None:
            return sp.Integer(0)
        return sign * self.coeffs.get(skey, sp.Integer(0))

    def _check(self, other):
        if not isinstance(other, KForm) or other.chart != self.chart:
            raise ChartError("forms live on different charts")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            raise ValueError("cannot add forms of different degree")
        c = dict(self.coeffs)
        for k, v in other.coeffs.items():
            c[k] = c.get(k, 0) + v
        return KForm(self.chart, self.degree, c)

    def __neg__(self):
        return KForm(self.chart, self.degree, {k: -v for k, v in self.coeffs.items()}, normalize=False)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, f):
        if isinstance(f, KForm):
            return NotImplemented
        return KForm(self.chart, self.degree, {k: f * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, KForm) or other.chart != self.chart or other.degree != self.degree:
            return False
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.chart, self.degree, tuple(sorted(self.coeffs))))

    def __call__(self, *vectors: VectorField) -> sp.Expr:
        return evaluate_form(self, *vectors)

    def __repr__(self):
        if not self.coeffs:
            return "0"
        names = [c.name for c in self.chart.coords]
        parts = []
        for k in sorted(self.coeffs):
            basis = "^".join(f"d{names[i]}" for i in k) or "1"
            parts.append(f"({sp.sstr(self.coeffs[k])})*{basis}")
        return " + ".join(parts)

    def subs(self, bindings: Mapping) -> "KForm":
        table = {sp.sympify(k): sp.sympify(v) for k, v in bindings.items()}
        return KForm(self.chart, self.degree, {k: v.xreplace(table) for k, v in self.coeffs.items()})


def wedge(alpha: KForm, beta: KForm) -> KForm:
    alpha._check(beta)
    deg = alpha.degree + beta.degree
    if deg > alpha.chart.dim:
        raise ValueError("degree overflow")
    out = {}
    for I, a in alpha.coeffs.items():
        for J, b in beta.coeffs.items():
            if set(I) & set(J):
                continue
            key, sign = _sort_with_sign(I + J)
            out[key] = out.get(key, 0) + sign * a * b
    return KForm(alpha.chart, deg, out)


def wedge_all(forms: Sequence[KForm]) -> KForm:
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def exterior_derivative(omega: KForm) -> KForm:
    chart = omega.chart
    out = {}
    for I, c in omega.coeffs.items():
        for k, s in enumerate(chart.coords):
            if k in I:
                continue
            dc = sp.diff(c, s)
            if dc == 0:
                continue
            key, sign = _sort_with_sign((k,) + I)
            out[key] = out.get(key, 0) + sign * dc
    return KForm(chart, omega.degree + 1, out)


def d(f, chart: CoordinateSystem) -> KForm:
    """Differential of a function, as a 1-form."""
    return exterior_derivative(KForm(chart, 0, {(): f}))


def interior_product(X: VectorField, omega: KForm) -> KForm:
    if X.chart != omega.chart:
        raise ChartError("chart mismatch")
    if omega.degree < 1:
        raise ValueError("cannot contract a 0-form")
    coords = omega.chart.coords
    out = {}
    for I, c in omega.coeffs.items():
        for p, k in enumerate(I):
            xk = X.components.get(coords[k])
            if xk is None:
                continue
            key = I[:p] + I[p + 1:]
            out[key] = out.get(key, 0) + (-1) ** p * xk * c
    return KForm(omega.chart, omega.degree - 1, out)


def lie_derivative(X: VectorField, omega: KForm) -> KForm:
    """Cartan formula L_X = X _| d + d(X _| .)."""
    first = interior_product(X, exterior_derivative(omega))
    if omega.degree == 0:
        return first
    return first + exterior_derivative(interior_product(X, omega))


def evaluate_form(omega: KForm, *vectors: VectorField) -> sp.Expr:
    if len(vectors) != omega.degree:
        raise ValueError("number of vectors must equal the degree")
    if omega.degree == 0:
        return omega.coeffs.get((), sp.Integer(0))
    coords = omega.chart.coords
    total = sp.Integer(0)
    for I, c in omega.coeffs.items():
        m = sp.Matrix([[v.component(coords[k]) for k in I] for v in vectors])
        total += c * m.det()
    return simplify(total)


def contact_form(chart: Chart) -> KForm:
    """theta = du - sum u_i dx^i."""
    coeffs = {(chart.index(chart.u),): sp.Integer(1)}
    for x, p in zip(chart.xs, chart.us):
        coeffs[(chart.index(x),)] = -p
    return KForm(chart, 1, coeffs)


def ode_contact_forms(chart: ODEChart) -> list[KForm]:
    """du - p1 dx, dp1 - p2 dx, ... on an ODE jet chart."""
    seq = [chart.u, *chart.ps]
    return [KForm(chart, 1, {(chart.index(seq[k]),): 1, (chart.index(chart.x),): -seq[k + 1]}) for k in range(chart.r)]


def top_form_coefficient(omega: KForm) -> sp.Expr:
    if omega.degree != omega.chart.dim:
        raise ValueError("not a top-degree form")
    return omega.coeffs.get(tuple(range(omega.chart.dim)), sp.Integer(0))


# --------------------------------------------------------------------------
# coordinate maps


class CoordinateMap:
    """target coordinate -> expression in source coordinates."""

    def __init__(self, source: CoordinateSystem, target: CoordinateSystem, images: Mapping, inverse: Mapping | None = None):
        self.source = source
        self.target = target
        imgs = {}
        for t in target.coords:
            key = t if t in images else t.name
            if key not in images:
                raise ChartError(f"missing image for {t}")
            imgs[t] = simplify(images[key])
        self.images = imgs
        self.inverse_images = None
        if inverse is not None:
            self.inverse_images = {s: simplify(inverse[s]) for s in source.coords}

    def __repr__(self):
        return "CoordinateMap(" + ", ".join(f"{k.name}={sp.sstr(v)}" for k, v in self.images.items()) + ")"

    def pull_function(self, f) -> sp.Expr:
        return simplify(sp.sympify(f).xreplace(self.images))

    def inverse(self) -> "CoordinateMap":
        if self.inverse_images is None:
            raise ValueError("inverse not known")
        return CoordinateMap(self.target, self.source, self.inverse_images, self.images)


def identity_map(chart: CoordinateSystem) -> CoordinateMap:
    imgs = {c: c for c in chart.coords}
    return CoordinateMap(chart, chart, imgs, imgs)


def pullback(m: CoordinateMap, omega: KForm) -> KForm:
    if omega.chart != m.target:
        raise ChartError("form does not live on the target chart")
    src = m.source
    dimg = [d(m.images[t], src) for t in m.target.coords]
    result = KForm.zero(src, omega.degree)
    for I, c in omega.coeffs.items():
        term = KForm(src, 0, {(): m.pull_function(c)})
        for k in I:
            term = wedge(term, dimg[k])
        result = result + term
    return result


def pushforward(m: CoordinateMap, X: VectorField) -> VectorField:
    """Push a field forward along an invertible map (target coordinates)."""
    if m.inverse_images is None:
        raise ValueError("pushforward needs the inverse map")
    if X.chart != m.source:
        raise ChartError("field does not live on the source chart")
    comps = {}
    for t in m.target.coords:
        val = apply(X, m.images[t])
        comps[t] = simplify(val.xreplace(m.inverse_images))
    return VectorField(m.target, comps)


def legendre(chart: Chart, subset: Iterable[int] = None, target: Chart | None = None) -> CoordinateMap:
    """(Partial) Legendre map on the 1-based index subset (default: all)."""
    if chart.order != 1:
        raise ChartError("Legendre maps act on order-1 charts")
    n = chart.n
    S = sorted(set(range(1, n + 1) if subset is None else subset))
    if any(not 1 <= a <= n for a in S):
        raise ChartError("subset indices out of range")
    if target is None:
        target = Chart(n, 1, suffix="~")
    imgs = {}
    inv = {}
    for a in range(1, n + 1):
        x, p = chart.xs[a - 1], chart.us[a - 1]
        xt, pt = target.xs[a - 1], target.us[a - 1]
        if a in S:
            imgs[xt] = p
            imgs[pt] = -x
            inv[x] = -pt
            inv[p] = xt
        else:
            imgs[xt] = x
            imgs[pt] = p
            inv[x] = xt
            inv[p] = pt
    imgs[target.u] = chart.u - sum((chart.us[a - 1] * chart.xs[a - 1] for a in S), sp.Integer(0))
    inv[chart.u] = target.u - sum((target.xs[a - 1] * target.us[a - 1] for a in S), sp.Integer(0))
    return CoordinateMap(chart, target, imgs, inv)


def all_index_subsets(n: int):
    for k in range(n + 1):
        yield from itertools.combinations(range(1, n + 1), k)
