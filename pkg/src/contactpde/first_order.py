"""First-order scalar PDEs f = 0 on a contact chart: Cauchy data, the
characteristic flow of Y_f, residual checks, and characteristic fields of
scalar ODEs of any order."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .hamiltonian import hamiltonian_field
from .jets import Chart, CoordinateSystem, ODEChart, VectorField, apply, contact_form
from .linalg import generic_rank
from .symbolic import eval_exact, is_zero, simplify

MAX_HALVINGS = 12


class DatumError(ValueError):
    pass


class NoRealSolutionError(DatumError):
    pass


class AmbiguousBranchError(DatumError):
    def __init__(self, roots):
        super().__init__(f"ambiguous branch; candidate roots: {roots}")
        self.roots = roots


class ResidualBoundError(ArithmeticError):
    pass


@dataclass
class FirstOrderPDE:
    chart: Chart
    f: sp.Expr

    def __post_init__(self):
        self.f = simplify(self.f)
        if self.chart.order != 1:
            raise ValueError("first-order PDEs live on order-1 charts")
        extra = self.f.free_symbols - set(self.chart.coords)
        if extra:
            raise ValueError(f"f uses symbols outside the chart: {sorted(s.name for s in extra)}")
        if all(sp.diff(self.f, c) == 0 for c in self.chart.coords):
            raise ValueError("df vanishes identically")

    def field(self) -> VectorField:
        return hamiltonian_field(self.f, self.chart)


# --------------------------------------------------------------------------
# Cauchy data


def _vectorize(exprs, syms):
    """numpy callable returning an array of shape (len(exprs), ...)."""
    fn = sp.lambdify(list(syms), list(exprs), modules="numpy")

    def call(*args):
        vals = fn(*args)
        shape = np.broadcast(*args).shape if args else ()
        return np.array([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in vals])

    return call


@dataclass
class CauchyDatum:
    """An (n-1)-parameter family of points of the chart satisfying the
    contact condition; components map every chart coordinate to Expr(params)."""

    chart: Chart
    params: tuple
    components: dict
    completed: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = tuple(self.params)
        comps = {}
        for k, v in self.components.items():
            if isinstance(k, str):
                k = self.chart.sym(k)
            comps[k] = simplify(v)
        self.components = comps

    def component(self, s):
        if isinstance(s, str):
            s = self.chart.sym(s)
        return self.components[s]

    def contact_defects(self) -> list:
        """dU/dt_a - sum U_i dX^i/dt_a for each parameter."""
        c = self.chart
        out = []
        for t in self.params:
            expr = sp.diff(self.components[c.u], t)
            for x, p in zip(c.xs, c.us):
                expr -= self.components[p] * sp.diff(self.components[x], t)
            out.append(simplify(expr))
        return out

    def is_integral(self) -> bool:
        return all(is_zero(e) for e in self.contact_defects())

    def tangent_exprs(self):
        return [[sp.diff(self.components[c], t) for c in self.chart.coords] for t in self.params]

    def sample(self, grid: np.ndarray) -> np.ndarray:
        """Evaluate at parameter samples (shape (M, p)) -> (M, dim)."""
        grid = np.atleast_2d(np.asarray(grid, dtype=float))
        exprs = [self.components[c] for c in self.chart.coords]
        fn = _vectorize(exprs, self.params)
        args = [grid[:, a] for a in range(len(self.params))]
        if not args:
            return np.array([[float(sp.N(e)) for e in exprs]])
        return fn(*args).T.copy()

    def sample_tangents(self, grid: np.ndarray) -> np.ndarray:
        """(M, p, dim) derivatives of the datum with respect to each parameter."""
        grid = np.atleast_2d(np.asarray(grid, dtype=float))
        p = len(self.params)
        if p == 0:
            return np.zeros((1, 0, self.chart.dim))
        rows = self.tangent_exprs()
        flat = [e for row in rows for e in row]
        fn = _vectorize(flat, self.params)
        vals = fn(*[grid[:, a] for a in range(p)])
        return vals.T.reshape(grid.shape[0], p, self.chart.dim)


def _infer_params(chart: CoordinateSystem, partial: Mapping) -> tuple:
    syms = set()
    for v in partial.values():
        syms |= sp.sympify(v).free_symbols
    return tuple(sorted((s for s in syms if s not in chart), key=lambda s: s.name))


def _root_norm(sol: dict, point: dict) -> float:
    vals = [complex(sp.N(v.xreplace(point))) for v in sol.values()]
    return float(np.sqrt(sum(abs(v) ** 2 for v in vals)))


def _is_real_at(sol: dict, point: dict) -> bool:
    for v in sol.values():
        z = complex(sp.N(v.xreplace(point)))
        if abs(z.imag) > 1e-12 or not np.isfinite(z.real):
            return False
    return True


def complete_contact(chart: Chart, partial: Mapping, params=None, pde: FirstOrderPDE | None = None,
                     hint=None, first_sample: Mapping | None = None) -> CauchyDatum:
    """Solve the contact conditions (and f = 0 when a PDE is given) for the
    missing momenta u_i of a partial datum."""
    table = {}
    for k, v in partial.items():
        key = chart.sym(k) if isinstance(k, str) else k
        table[key] = sp.sympify(v)
    if params is None:
        params = _infer_params(chart, table)
    params = tuple(sp.Symbol(p) if isinstance(p, str) else p for p in params)
    for s in list(chart.xs) + [chart.u]:
        if s not in table:
            raise DatumError(f"datum must give {s.name}")
    missing = [p for p in chart.us if p not in table]
    if first_sample is None:
        first_sample = {t: sp.Rational(1, 2) for t in params}
    else:
        first_sample = {sp.Symbol(k) if isinstance(k, str) else k: sp.nsimplify(v) for k, v in first_sample.items()}
    unknowns = [sp.Dummy(p.name) for p in missing]
    sub = dict(table)
    sub.update(dict(zip(missing, unknowns)))
    eqs = []
    for t in params:
        e = sp.diff(sub[chart.u], t)
        for x, p in zip(chart.xs, chart.us):
            e -= sub[p] * sp.diff(sub[x], t)
        eqs.append(e)
    if pde is not None:
        eqs.append(pde.f.xreplace(sub))
    eqs = [simplify(e) for e in eqs]
    eqs = [e for e in eqs if e != 0]
    meta = {"method": "symbolic"}
    if not unknowns:
        bad = [e for e in eqs if not is_zero(e)]
        if bad:
            raise DatumError("datum violates the contact condition or the equation")
        return CauchyDatum(chart, params, table, True, meta)
    sols = sp.solve(eqs, unknowns, dict=True) if eqs else []
    sols = [s for s in sols if all(u in s for u in unknowns)]
    if not sols:
        raise NoRealSolutionError("no solution for the missing momenta")
    real = [s for s in sols if _is_real_at(s, first_sample)]
    if not real:
        raise NoRealSolutionError(f"no real solution at the first sample {first_sample}")
    if len(real) > 1:
        if hint is not None:
            if isinstance(hint, int):
                chosen = real[hint]
            else:
                target = {sp.Dummy: None}
                want = {chart.sym(k) if isinstance(k, str) else k: float(v) for k, v in hint.items()}

                def dist(s):
                    tot = 0.0
                    for u, p in zip(unknowns, missing):
                        if p in want:
                            tot += abs(complex(sp.N(s[u].xreplace(first_sample))).real - want[p])
                    return tot

                chosen = min(real, key=dist)
            meta["branch"] = "hint"
        else:
            norms = [_root_norm(s, first_sample) for s in real]
            order = sorted(range(len(real)), key=lambda i: norms[i])
            if abs(norms[order[0]] - norms[order[1]]) < 1e-12:
                roots = [{p.name: sp.sstr(s[u]) for u, p in zip(unknowns, missing)} for s in real]
                raise AmbiguousBranchError(roots)
            chosen = real[order[0]]
            meta["branch"] = "smallest magnitude at first sample"
        meta["candidates"] = [{p.name: sp.sstr(s[u]) for u, p in zip(unknowns, missing)} for s in real]
    else:
        chosen = real[0]
    comps = dict(table)
    for u, p in zip(unknowns, missing):
        comps[p] = chosen[u]
    return CauchyDatum(chart, params, comps, True, meta)


def complete_datum(pde: FirstOrderPDE, partial: Mapping, params=None, hint=None,
                   first_sample: Mapping | None = None) -> CauchyDatum:
    return complete_contact(pde.chart, partial, params, pde, hint, first_sample)


@dataclass
class TransversalityReport:
    flags: list
    messages: list

    def __bool__(self):
        return all(self.flags)


def is_noncharacteristic(datum: CauchyDatum, pde: FirstOrderPDE, grid=None) -> TransversalityReport:
    """Rank of (datum tangents, Y_f) equals n at every sample."""
    n = pde.chart.n
    Y = pde.field()
    ycomp = [Y.component(c) for c in pde.chart.coords]
    if grid is None:
        grid = np.array([[0.5] * len(datum.params)]) if datum.params else np.zeros((1, 0))
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    pts = datum.sample(grid)
    tans = datum.sample_tangents(grid)
    yfn = _vectorize(ycomp, pde.chart.coords)
    yv = yfn(*[pts[:, k] for k in range(pts.shape[1])]).T
    flags, msgs = [], []
    for m in range(pts.shape[0]):
        if np.max(np.abs(yv[m])) < 1e-12:
            flags.append(False)
            msgs.append("field vanishes")
            continue
        mat = np.vstack([tans[m], yv[m][None, :]]) if tans.shape[1] else yv[m][None, :]
        s = np.linalg.svd(mat, compute_uv=False)
        ok = int(np.sum(s > 1e-10 * max(1.0, s[0]))) == n
        flags.append(ok)
        msgs.append(None if ok else "datum tangent to the characteristic field")
    return TransversalityReport(flags, msgs)


# --------------------------------------------------------------------------
# flows


@dataclass
class FlowSolution:
    chart: CoordinateSystem
    param_names: tuple
    params: np.ndarray          # (M, p)
    s: np.ndarray               # (K,)
    points: np.ndarray          # (M, K, dim)
    residuals: np.ndarray       # (M, K)
    h: float
    substeps: int = 1
    method: str = "rk4"
    order: int = 4
    bound: float = float("inf")
    tangents: np.ndarray | None = None   # (M, K, p+1, dim): transported datum tangents and the field
    diagnostics: list = field(default_factory=list)
    param_shape: tuple = ()

    def column(self, name) -> np.ndarray:
        idx = self.chart.index(name)
        return self.points[:, :, idx]

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    def rows(self):
        for m in range(self.points.shape[0]):
            for k in range(self.points.shape[1]):
                yield m, k

    def to_csv(self, out=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        # a datum parameter named like a fixed column gets a suffix
        fixed = {"s", "residual"} | {c.name for c in self.chart.coords}
        pnames = [p + "_param" if p in fixed else p for p in self.param_names]
        w.writerow(pnames + ["s"] + [c.name for c in self.chart.coords] + ["residual"])
        for m, k in self.rows():
            row = [repr(float(v)) for v in self.params[m]] + [repr(float(self.s[k]))]
            row += [repr(float(v)) for v in self.points[m, k]] + [repr(float(self.residuals[m, k]))]
            w.writerow(row)
        text = buf.getvalue()
        if out is not None:
            if hasattr(out, "write"):
                out.write(text)
            else:
                with open(out, "w", newline="") as fh:
                    fh.write(text)
        return text


def _field_functions(X: VectorField, with_jacobian: bool):
    coords = X.chart.coords
    comps = [X.component(c) for c in coords]
    F = _vectorize(comps, coords)
    J = None
    if with_jacobian:
        jac = [sp.diff(e, c) for e in comps for c in coords]
        J = _vectorize(jac, coords)
    dim = len(coords)

    def field_fn(z):
        return F(*[z[:, k] for k in range(dim)]).T

    def jac_fn(z):
        vals = J(*[z[:, k] for k in range(dim)])  # (dim*dim, M)
        return vals.T.reshape(z.shape[0], dim, dim)

    return field_fn, (jac_fn if with_jacobian else None)


def _rk4(field_fn, jac_fn, z, tans, dt):
    """One classical RK4 step for z' = F(z) and the variational system."""
    if jac_fn is None or tans is None:
        k1 = field_fn(z)
        k2 = field_fn(z + 0.5 * dt * k1)
        k3 = field_fn(z + 0.5 * dt * k2)
        k4 = field_fn(z + dt * k3)
        return z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), tans

    def rhs(zz, tt):
        J = jac_fn(zz)
        return field_fn(zz), np.einsum("mij,mpj->mpi", J, tt)

    k1, l1 = rhs(z, tans)
    k2, l2 = rhs(z + 0.5 * dt * k1, tans + 0.5 * dt * l1)
    k3, l3 = rhs(z + 0.5 * dt * k2, tans + 0.5 * dt * l2)
    k4, l4 = rhs(z + dt * k3, tans + dt * l3)
    z2 = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    t2 = tans + dt / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4)
    return z2, t2


def _time_grid(s_range, h):
    s0, s1 = float(s_range[0]), float(s_range[1])
    if s0 > s1:
        s0, s1 = s1, s0
    if h <= 0:
        raise ValueError("h must be positive")
    if s0 > 0 or s1 < 0:
        raise ValueError("the flow-time range must contain 0 (the datum)")
    kmin = int(np.ceil(s0 / h - 1e-9))
    kmax = int(np.floor(s1 / h + 1e-9))
    return np.arange(kmin, kmax + 1), kmin, kmax


def flow(X: VectorField, z0: np.ndarray, s_range, h: float, substeps: int = 1, tangents0=None):
    """RK4 flow from z0 (M, dim) on the grid k*h in s_range.

    Returns (s, Z (M, K, dim), T (M, K, q, dim) or None)."""
    ks, kmin, kmax = _time_grid(s_range, h)
    with_tan = tangents0 is not None
    field_fn, jac_fn = _field_functions(X, with_tan)
    M, dim = z0.shape
    K = len(ks)
    Z = np.empty((M, K, dim))
    T = np.empty((M, K) + tangents0.shape[1:]) if with_tan else None
    i0 = -kmin
    Z[:, i0] = z0
    if with_tan:
        T[:, i0] = tangents0
    dt = h / substeps
    for direction, rng in ((1, range(i0 + 1, K)), (-1, range(i0 - 1, -1, -1))):
        z = z0.copy()
        t = tangents0.copy() if with_tan else None
        for i in rng:
            for _ in range(substeps):
                z, t = _rk4(field_fn, jac_fn, z, t, direction * dt)
            Z[:, i] = z
            if with_tan:
                T[:, i] = t
    return ks * h, Z, T


def _param_grid(params, param_grid):
    p = len(params)
    if p == 0:
        return np.zeros((1, 0)), ()
    if param_grid is None:
        raise ValueError("a parameter grid is required for datum with parameters")
    if p == 1 and np.ndim(param_grid) == 1 and not isinstance(param_grid[0], (list, tuple, np.ndarray)):
        axes = [np.asarray(param_grid, dtype=float)]
    else:
        axes = [np.asarray(a, dtype=float) for a in param_grid]
    if len(axes) != p:
        raise ValueError("one grid axis per datum parameter is required")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts, tuple(len(a) for a in axes)


def default_scale(points: np.ndarray, s_range) -> float:
    span = max(1.0, abs(float(s_range[1]) - float(s_range[0])))
    mag = 1.0 + float(np.max(np.abs(points))) if points.size else 1.0
    return span * mag ** 2


def _kept_window(s, Z, full_tan, xs, detect_fold):
    """Index window around s=0 free of non-finite samples and, optionally, folds."""
    K = len(s)
    i0 = int(np.argmin(np.abs(s)))
    bad = ~np.all(np.isfinite(Z), axis=-1)
    note = ""
    if detect_fold:
        with np.errstate(all="ignore"):
            dets = np.linalg.det(np.nan_to_num(full_tan[:, :, :, xs], nan=0.0, posinf=0.0, neginf=0.0))
        ref = np.sign(dets[:, i0])[:, None]
        finite = np.abs(dets[~bad]) if np.any(~bad) else np.zeros(1)
        tiny = 1e-12 * max(1.0, float(np.max(finite)))
        fold = (np.sign(dets) != ref) | (np.abs(dets) <= tiny)
        fold[:, i0] = False
        if np.any(fold & ~bad):
            cols = np.where(np.any(fold, axis=0))[0]
            hi, lo = cols[cols > i0], cols[cols < i0]
            at = s[hi.min()] if hi.size else s[lo.max()]
            note = f"fold detected: x-projection degenerates near s={at:.6g}"
        bad = bad | fold
    bad[:, i0] = False
    cols = np.where(np.any(bad, axis=0))[0]
    hi, lo = cols[cols > i0], cols[cols < i0]
    kmax = int(hi.min()) if hi.size else K
    kmin = int(lo.max()) + 1 if lo.size else 0
    if not note and cols.size:
        note = f"trajectories left the finite range near s={s[kmax - 1 if hi.size else kmin]:.6g}"
    return kmin, kmax, note


def integrate_characteristics(pde: FirstOrderPDE, datum: CauchyDatum, s_range=(0.0, 1.0), h: float = 0.01,
                              param_grid=None, detect_fold: bool = True, check_transversal: bool = True,
                              extra_residual=None) -> FlowSolution:
    """RK4 trajectories of Y_f from every datum sample.

    The residual |f| at every output sample must stay below 10 h^4 scale; the
    substep count doubles (at most 12 times) until it does.  Tangent vectors
    of the swept surface are transported with the variational equations and
    used for fold detection.
    """
    chart = pde.chart
    grid, shape = _param_grid(datum.params, param_grid)
    z0 = datum.sample(grid)
    tan0 = datum.sample_tangents(grid)
    Y = pde.field()
    diagnostics = []
    if check_transversal:
        rep = is_noncharacteristic(datum, pde, grid)
        if not rep:
            bad = [i for i, ok in enumerate(rep.flags) if not ok]
            raise DatumError(f"datum is characteristic at samples {bad[:5]}: {rep.messages[bad[0]]}")
    fvec = _vectorize([pde.f], chart.coords)
    ffn = lambda Z: fvec(*[Z[..., k] for k in range(chart.dim)])[0]

    yfn, _ = _field_functions(Y, False)
    xs = [chart.index(x) for x in chart.xs]
    substeps = 1
    halvings = 0
    while True:
        with np.errstate(all="ignore"):
            s, Z, T = flow(Y, z0, s_range, h, substeps, tan0)
        M, K, dim = Z.shape
        with np.errstate(all="ignore"):
            yv = yfn(Z.reshape(M * K, dim)).reshape(M, K, 1, dim)
        full_tan = np.concatenate([T, yv], axis=2) if T is not None else yv
        # the residual is judged only on the window before a fold or a blow-up
        kmin, kmax, note = _kept_window(s, Z, full_tan, xs, detect_fold)
        s, Z, T, full_tan = s[kmin:kmax], Z[:, kmin:kmax], None if T is None else T[:, kmin:kmax], full_tan[:, kmin:kmax]
        with np.errstate(all="ignore"):
            res = np.abs(ffn(Z))
            if extra_residual is not None:
                res = np.maximum(res, np.abs(extra_residual(Z, T)))
        scale = default_scale(Z, s_range)
        bound = 10.0 * h ** 4 * scale
        worst = float(np.max(res)) if res.size else 0.0
        if not np.isfinite(worst):
            worst = np.inf
        if worst <= bound:
            break
        if halvings >= MAX_HALVINGS:
            raise ResidualBoundError(f"residual {worst:.3e} exceeds bound {bound:.3e} after {MAX_HALVINGS} halvings")
        halvings += 1
        substeps *= 2
        diagnostics.append(f"step halved to h/{substeps}: residual {worst:.3e} > {bound:.3e}")
    if note:
        diagnostics.append(note)
    return FlowSolution(chart, tuple(p.name for p in datum.params), grid, s, Z, res, h, substeps, "rk4", 4,
                        bound, full_tan, diagnostics, shape)


def residual(sol: FlowSolution, pde: FirstOrderPDE) -> float:
    fvec = _vectorize([pde.f], sol.chart.coords)
    if sol.points.size == 0:
        return 0.0
    vals = fvec(*[sol.points[..., k] for k in range(sol.chart.dim)])[0]
    return float(np.max(np.abs(vals)))


def fold_detected(sol: FlowSolution) -> bool:
    return any(d.startswith("fold detected") for d in sol.diagnostics)


def integrate_field(X: VectorField, starts, s_range, h: float, substeps: int = 1):
    """Plain RK4 trajectories of X from the given start points."""
    coords = X.chart.coords
    z0 = []
    for st in starts:
        if isinstance(st, Mapping):
            z0.append([float(st[c] if c in st else st[c.name]) for c in coords])
        else:
            z0.append([float(v) for v in st])
    s, Z, _ = flow(X, np.array(z0, dtype=float), s_range, h, substeps)
    return s, Z


# --------------------------------------------------------------------------
# scalar ODEs of order r


def ode_order(F) -> int:
    F = sp.sympify(F)
    r = 0
    for s in F.free_symbols:
        name = s.name
        if name.startswith("u") and len(name) > 1 and set(name[1:]) == {"1"}:
            r = max(r, len(name) - 1)
    if r == 0:
        raise ValueError("the equation involves no derivative of u")
    return r


def ode_characteristic_field(F, r: int | None = None, chart: ODEChart | None = None) -> VectorField:
    """Y_F = -V(F) D + D(F) V with D the truncated total derivative and V the
    top vertical field."""
    F = sp.sympify(F)
    if chart is None:
        chart = ODEChart(r if r is not None else ode_order(F))
    D = chart.total_derivative()
    V = chart.top_vertical()
    return -apply(V, F) * D + apply(D, F) * V


@dataclass
class SingularLocus:
    equations: list
    solutions: list
    chart: ODEChart

    def as_dict(self):
        return {
            "equations": [sp.sstr(e) for e in self.equations],
            "solutions": [{k.name: sp.sstr(v) for k, v in sol.items()} for sol in self.solutions],
        }


def singular_locus(F, r: int | None = None, chart: ODEChart | None = None) -> SingularLocus:
    """Points where Y_F vanishes on F = 0: {D(F) = 0, V(F) = 0, F = 0}."""
    F = sp.sympify(F)
    if chart is None:
        chart = ODEChart(r if r is not None else ode_order(F))
    D = chart.total_derivative()
    V = chart.top_vertical()
    eqs = [apply(D, F), apply(V, F), simplify(F)]
    unknowns = [s for s in chart.coords if any(e.has(s) for e in eqs)]
    if any(e.is_Number and e != 0 for e in eqs):
        return SingularLocus(eqs, [], chart)
    sols = sp.solve(eqs, unknowns, dict=True)
    real = [s for s in sols if all(not v.has(sp.I) for v in s.values())]
    real.sort(key=lambda s: [sp.default_sort_key(s.get(c, c)) for c in chart.coords])
    return SingularLocus(eqs, real, chart)
