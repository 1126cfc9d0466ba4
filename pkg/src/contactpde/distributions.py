"""Distributions spanned by vector fields: derived flags, Frobenius test,
annihilators, symplectic orthogonals and the type of a contact field."""

from __future__ import annotations

from typing import Sequence

import sympy as sp

from .jets import (
    Chart,
    CoordinateSystem,
    KForm,
    VectorField,
    bracket,
    evaluate_form,
    exterior_derivative,
    interior_product,
    lie_derivative,
    wedge,
)
from .linalg import DEFAULT_PROBES, generic_rank, independent_rows, nullspace, sample_matrix, value_rank
from .symbolic import is_zero, simplify


class DistributionError(ValueError):
    pass


class NonConstantRankError(DistributionError):
    def __init__(self, witnesses):
        super().__init__(f"non-constant rank: {witnesses}")
        self.witnesses = witnesses


class Distribution:
    """Span of vector fields on a chart, reduced to independent generators."""

    def __init__(self, chart: CoordinateSystem, generators: Sequence[VectorField],
                 seed: int = 0, probe_count: int = DEFAULT_PROBES, strict: bool = False):
        gens = list(generators)
        for g in gens:
            if g.chart != chart:
                raise DistributionError("generator on a different chart")
        self.chart = chart
        self.seed = seed
        self.probe_count = probe_count
        rows = [g.vector() for g in gens]
        if rows:
            keep = independent_rows(rows, probe_count, seed)
            gens = [gens[i] for i in keep]
        self.generators = gens
        if gens:
            report = generic_rank([g.vector() for g in gens], probe_count, seed)
            self.rank = report.rank
            self.rank_witnesses = report.witnesses
        else:
            self.rank = 0
            self.rank_witnesses = []
        if strict and self.rank_witnesses:
            raise NonConstantRankError(self.rank_witnesses)

    def __repr__(self):
        return f"Distribution(rank={self.rank}, generators={self.generators})"

    def __len__(self):
        return self.rank

    def matrix(self):
        return [g.vector() for g in self.generators]

    def _with(self, gens):
        return Distribution(self.chart, gens, self.seed, self.probe_count)

    def contains(self, X: VectorField) -> bool:
        """X lies in the span at every probe point."""
        return _pointwise_contains(self.generators, [X], self.probe_count, self.seed)

    def contains_all(self, fields: Sequence[VectorField]) -> bool:
        return _pointwise_contains(self.generators, list(fields), self.probe_count, self.seed)

    def same_span(self, other: "Distribution") -> bool:
        return self.rank == other.rank and self.contains_all(other.generators) and other.contains_all(self.generators)


def span_rank(fields: Sequence[VectorField], probe_count: int = DEFAULT_PROBES, seed: int = 0) -> int:
    if not fields:
        return 0
    return generic_rank([f.vector() for f in fields], probe_count, seed).rank


def _pointwise_contains(base: Sequence[VectorField], extra: Sequence[VectorField], probe_count, seed) -> bool:
    if not extra:
        return True
    if not base:
        return all(X.is_zero() for X in extra)
    rows = [g.vector() for g in base] + [X.vector() for X in extra]
    nb = len(base)
    for _, vals in sample_matrix(rows, probe_count, seed):
        rb = value_rank(vals[:nb])
        if value_rank(vals) != rb:
            return False
    return True


def annihilator(D: Distribution) -> list[KForm]:
    """Independent 1-forms whose common kernel is D."""
    chart = D.chart
    if not D.generators:
        return [chart.dcoord(c) for c in chart.coords]
    basis = nullspace(D.matrix(), chart.dim)
    return [KForm(chart, 1, {(k,): v for k, v in enumerate(_clear_denominators(vec))}) for vec in basis]


def _clear_denominators(vec):
    """Rescale a kernel vector by the lcm of its denominators (same kernel)."""
    dens = [sp.fraction(sp.together(v))[1] for v in vec]
    m = sp.Integer(1)
    for q in dens:
        m = sp.lcm(m, q)
    if m == 1:
        return vec
    return [simplify(v * m) for v in vec]


def kernel_of_forms(chart: CoordinateSystem, forms: Sequence[KForm]) -> list[VectorField]:
    """Vector fields annihilated by every given 1-form."""
    if not forms:
        return [chart.partial(c) for c in chart.coords]
    rows = [[f.coeffs.get((k,), sp.Integer(0)) for k in range(chart.dim)] for f in forms]
    return [VectorField(chart, dict(zip(chart.coords, vec))) for vec in nullspace(rows, chart.dim)]


def derived(D: Distribution) -> Distribution:
    gens = list(D.generators)
    extra = []
    for i in range(len(gens)):
        for j in range(i + 1, len(gens)):
            extra.append(bracket(gens[i], gens[j]))
    return D._with(gens + extra)


def derived_flag(D: Distribution, max_steps: int = 10) -> list[int]:
    """Ranks of D, D', D'', ... until they stabilize or fill the tangent space."""
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    ranks = [D.rank]
    cur = D
    for _ in range(max_steps):
        if ranks[-1] == D.chart.dim:
            break
        cur = derived(cur)
        ranks.append(cur.rank)
        if ranks[-1] == ranks[-2]:
            break
    return ranks


def is_involutive(D: Distribution) -> bool:
    return derived(D).rank == D.rank


def _form_is_zero(omega: KForm, probe_count: int = 20, seed: int = 0) -> bool:
    return all(is_zero(c, probe_count, seed) for c in omega.coeffs.values())


def non_integrability_degree(theta: KForm, chart: CoordinateSystem | None = None) -> int:
    """Largest m with theta ^ (d theta)^m nonzero."""
    if theta.degree != 1:
        raise ValueError("expected a 1-form")
    if _form_is_zero(theta):
        raise ValueError("the zero form has no integrability degree")
    dth = exterior_derivative(theta)
    m = 0
    acc = theta
    while True:
        if acc.degree + 2 > theta.chart.dim:
            return m
        nxt = wedge(acc, dth)
        if _form_is_zero(nxt):
            return m
        acc = nxt
        m += 1


def form_matrix(forms: Sequence[KForm]):
    dim = forms[0].chart.dim
    return [[f.coeffs.get((k,), sp.Integer(0)) for k in range(dim)] for f in forms]


def type_of_field(Y: VectorField, theta: KForm, probe_count: int = DEFAULT_PROBES, seed: int = 0) -> int:
    """Rank of {theta, L_Y theta, ..., L_Y^(2n-1) theta}."""
    if not is_zero(evaluate_form(theta, Y)):
        raise DistributionError("the field does not lie in the contact distribution")
    n = (theta.chart.dim - 1) // 2
    forms = [theta]
    cur = theta
    for _ in range(2 * n - 1):
        cur = lie_derivative(Y, cur)
        forms.append(cur)
    return generic_rank(form_matrix(forms), probe_count, seed).rank


def symplectic_orthogonal(D: Distribution, theta: KForm) -> Distribution:
    """The d(theta)-orthogonal of D inside ker(theta)."""
    chart = D.chart
    for g in D.generators:
        if not is_zero(evaluate_form(theta, g)):
            raise DistributionError("distribution is not contained in the contact distribution")
    dth = exterior_derivative(theta)
    forms = [theta] + [interior_product(g, dth) for g in D.generators]
    return D._with(kernel_of_forms(chart, forms))


def is_infinitesimal_symmetry(X: VectorField, D: Distribution) -> bool:
    """[X, Y] stays in D for every generator Y."""
    brackets = [bracket(X, Y) for Y in D.generators]
    return _pointwise_contains(D.generators, brackets, D.probe_count, D.seed)


def form_vanishes_on(omega: KForm, D: Distribution) -> bool:
    """A 1-form lies in the Pfaffian system of D iff it kills every generator."""
    return all(is_zero(evaluate_form(omega, g)) for g in D.generators)


def derived_pfaffian_check(D: Distribution) -> bool:
    """Every rho annihilating D' has L_X rho in the Pfaffian system of D, X in D."""
    Dp = derived(D)
    for rho in annihilator(Dp):
        for X in D.generators:
            if not form_vanishes_on(lie_derivative(X, rho), D):
                return False
    return True
