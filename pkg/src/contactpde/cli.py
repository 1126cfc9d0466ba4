"""Command-line front end: JSON problem files in, JSON reports and CSV grids out."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any

import numpy as np
import sympy as sp

from . import distributions as dist
from . import first_order as fo
from . import grassmannian as gr
from . import mae2d
from . import maend
from .hamiltonian import hamiltonian_field, in_involution, verify_hamiltonian_identities
from .jets import Chart, VectorField, contact_form, total_derivative
from .symbolic import ExprSyntaxError, UnknownSymbolError, is_zero, parse, simplify

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MATH = 3

SUBCOMMANDS = ("expr", "distribution", "hamiltonian", "solve-first-order", "classify-mae", "goursat-2d",
               "parabolic-flag", "grassmannian", "monge-nd", "complex-mae")


class InputError(ValueError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(message)
        self.pointer = pointer


class MathFailure(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# problem files


def _require(obj, key, kind, pointer):
    if key not in obj:
        raise InputError(f"missing required key {key!r}", f"{pointer}/{key}")
    val = obj[key]
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise InputError(f"expected {getattr(kind, '__name__', kind)}", f"{pointer}/{key}")
    return val


def _expr(text, chart, pointer, extra=()):
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = str(text)
    if not isinstance(text, str):
        raise InputError("expected an expression string", pointer)
    try:
        return parse(text, list(chart.coords) + list(extra))
    except UnknownSymbolError as e:
        raise InputError(str(e), pointer) from None
    except ExprSyntaxError as e:
        raise InputError(str(e), pointer) from None


def _dsl_symbols(chart: Chart):
    """D_x<i> for total derivatives and d_<coord> for coordinate fields."""
    table = {}
    for i, x in enumerate(chart.xs, start=1):
        table[sp.Symbol(f"D_{x.name}")] = total_derivative(chart, i)
    for c in chart.coords:
        table[sp.Symbol(f"d_{c.name}")] = chart.partial(c)
    return table


def parse_field(text, chart: Chart, pointer: str = "") -> VectorField:
    table = _dsl_symbols(chart)
    e = sp.expand(_expr(text, chart, pointer, table.keys()))
    X = chart.zero_field()
    rest = e
    for s, F in table.items():
        c = e.coeff(s)
        if c.free_symbols & set(table):
            raise InputError("field expression must be linear in D_* and d_* symbols", pointer)
        if c != 0:
            X = X + c * F
            rest = rest - c * s
    if simplify(rest) != 0:
        raise InputError("every term of a field must carry a D_* or d_* symbol", pointer)
    return X


def _grid_axis(axis, pointer):
    if isinstance(axis, list) and len(axis) == 3 and all(isinstance(v, (int, float)) for v in axis):
        lo, hi, count = axis
        if int(count) != count or count < 1:
            raise InputError("grid count must be a positive integer", pointer)
        return np.linspace(float(lo), float(hi), int(count))
    raise InputError("grid axis must be [lo, hi, count]", pointer)


def load_problem(path: str) -> dict:
    """Validated problem record; expressions are parsed on the declared chart."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}", "") from None
    if not text.strip():
        raise InputError("empty problem file", "")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON: {e.msg} at line {e.lineno}", "") from None
    return build_problem(raw)


def build_problem(raw: Any) -> dict:
    if not isinstance(raw, dict):
        raise InputError("problem must be a JSON object", "")
    n = _require(raw, "n", int, "")
    if n < 1:
        raise InputError("n must be positive", "/n")
    order = raw.get("order", 1)
    if order not in (1, 2):
        raise InputError("order must be 1 or 2", "/order")
    chart = Chart(n, order)
    rec: dict = {"n": n, "order": order, "chart": chart, "raw": raw}
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise InputError("seed must be an integer", "/seed")
    rec["seed"] = seed
    if "pde" in raw:
        rec["pde"] = _expr(raw["pde"], chart, "/pde")
    if "expr" in raw:
        rec["expr"] = _expr(raw["expr"], chart, "/expr")
    if "g" in raw:
        rec["g"] = _expr(raw["g"], chart, "/g")
    if "mae" in raw:
        m = raw["mae"]
        if not isinstance(m, dict):
            raise InputError("mae must be an object", "/mae")
        base = Chart(2, 1)
        coeffs = [_expr(m.get(k, "0"), base, f"/mae/{k}") for k in ("Dc", "A", "B", "C", "N")]
        try:
            rec["mae"] = mae2d.MAE2D(*coeffs, base)
        except mae2d.MAEError as e:
            raise InputError(str(e), "/mae") from None
    if "distribution" in raw:
        gens = raw["distribution"]
        if not isinstance(gens, list) or not gens:
            raise InputError("distribution must be a nonempty list of field strings", "/distribution")
        base = chart if order == 1 else chart.first_order()
        rec["distribution"] = [parse_field(g, base, f"/distribution/{i}") for i, g in enumerate(gens)]
    if "datum" in raw:
        d = raw["datum"]
        if not isinstance(d, dict):
            raise InputError("datum must be an object", "/datum")
        params = _require(d, "params", list, "/datum")
        if not all(isinstance(p, str) and p.isidentifier() for p in params):
            raise InputError("params must be identifiers", "/datum/params")
        psyms = [sp.Symbol(p) for p in params]
        clash = [p for p in params if p in chart]
        if clash:
            raise InputError(f"parameter names clash with chart coordinates: {clash}", "/datum/params")
        base = chart if order == 1 else chart.first_order()
        partial = {}
        for k, v in d.items():
            if k in ("params", "grid", "hint"):
                continue
            if k not in base:
                raise InputError(f"unknown coordinate {k!r}; chart has {', '.join(c.name for c in base.coords)}",
                                 f"/datum/{k}")
            try:
                partial[k] = parse(str(v), psyms)
            except (UnknownSymbolError, ExprSyntaxError) as e:
                raise InputError(str(e), f"/datum/{k}") from None
        rec["datum_partial"] = partial
        rec["datum_params"] = tuple(psyms)
        grid = d.get("grid")
        if grid is not None:
            if not isinstance(grid, list) or len(grid) != len(params):
                raise InputError("one grid axis per parameter is required", "/datum/grid")
            rec["grid"] = [_grid_axis(a, f"/datum/grid/{i}") for i, a in enumerate(grid)]
        rec["hint"] = d.get("hint")
    if "integrals" in raw:
        ints = raw["integrals"]
        if not isinstance(ints, list):
            raise InputError("integrals must be a list", "/integrals")
        rec["integrals"] = [_expr(s, chart, f"/integrals/{i}") for i, s in enumerate(ints)]
    if "psi" in raw:
        k = len(raw.get("integrals", []))
        lsyms = sp.symbols(f"l1:{k + 1}")
        try:
            rec["psi"] = parse(str(raw["psi"]), list(lsyms))
        except (UnknownSymbolError, ExprSyntaxError) as e:
            raise InputError(str(e), "/psi") from None
    if "point" in raw:
        pt = raw["point"]
        if not isinstance(pt, dict):
            raise InputError("point must be an object", "/point")
        rec["point"] = {k: sp.nsimplify(str(v)) for k, v in pt.items()}
    if "region" in raw:
        rg = raw["region"]
        if not isinstance(rg, dict) or not all(isinstance(v, list) and len(v) == 2 for v in rg.values()):
            raise InputError("region maps coordinates to [lo, hi]", "/region")
        rec["region"] = rg
    if "U" in raw:
        U = raw["U"]
        if not isinstance(U, list) or not all(isinstance(r, list) for r in U):
            raise InputError("U must be a matrix", "/U")
        rec["U"] = sp.Matrix([[sp.nsimplify(str(v)) for v in row] for row in U])
    if "xi" in raw:
        rec["xi"] = [sp.nsimplify(str(v)) for v in raw["xi"]]
    if "s_range" in raw:
        sr = raw["s_range"]
        if not isinstance(sr, list) or len(sr) != 2:
            raise InputError("s_range must be [lo, hi]", "/s_range")
        rec["s_range"] = (float(sr[0]), float(sr[1]))
    for key in ("mode",):
        if key in raw:
            rec[key] = raw[key]
    return rec


def _need(rec, key):
    if key not in rec:
        raise InputError(f"missing required key {key!r}", f"/{key}")
    return rec[key]


# --------------------------------------------------------------------------
# commands


def _s(e) -> str:
    return sp.sstr(e)


def _field_json(X: VectorField) -> dict:
    return {c.name: _s(X.component(c)) for c in X.chart.coords if X.component(c) != 0}


def cmd_expr(rec, args) -> dict:
    e = _need(rec, "expr")
    chart = rec["chart"]
    out = {"method": "symbolic-kernel", "parsed": _s(e), "simplified": _s(simplify(e))}
    z = is_zero(e, args.probe_count, args.seed)
    out["zero_test"] = z.kind.value if hasattr(z.kind, "value") else str(z.kind)
    out["derivatives"] = {c.name: _s(sp.diff(e, c)) for c in chart.coords if e.has(c)}
    if "point" in rec:
        out["value"] = _s(simplify(e.xreplace({chart.sym(k): v for k, v in rec["point"].items()})))
    return out


def cmd_distribution(rec, args) -> dict:
    chart = rec["chart"] if rec["order"] == 1 else rec["chart"].first_order()
    D = dist.Distribution(chart, _need(rec, "distribution"), args.seed, args.probe_count)
    out = {"method": "derived-flag", "rank": D.rank, "generators": [_field_json(X) for X in D.generators],
           "derived_flag": dist.derived_flag(D), "involutive": dist.is_involutive(D),
           "rank_witnesses": [{k.name: str(v) for k, v in w.items()} if isinstance(w, dict) else str(w)
                              for w in D.rank_witnesses]}
    theta = contact_form(chart)
    if all(is_zero(theta(X)) for X in D.generators):
        Dp = dist.symplectic_orthogonal(D, theta)
        out["in_contact_distribution"] = True
        out["orthogonal"] = [_field_json(X) for X in Dp.generators]
        out["lagrangian"] = D.rank == chart.n and D.same_span(Dp)
    else:
        out["in_contact_distribution"] = False
    return out


def cmd_hamiltonian(rec, args) -> dict:
    chart = rec["chart"]
    f = _need(rec, "pde")
    Y = hamiltonian_field(f, chart)
    rep = verify_hamiltonian_identities(f, chart)
    out = {"method": "hamiltonian-field", "field": _field_json(Y), "identities": rep.as_dict(),
           "type": dist.type_of_field(Y, contact_form(chart), args.probe_count, args.seed) if not Y.is_zero() else 0}
    if "g" in rec:
        out["in_involution"] = in_involution(f, rec["g"], chart, args.seed)
    return out


def _default_grid(params):
    return [np.linspace(0.0, 1.0, 11) for _ in params]


def cmd_solve_first_order(rec, args) -> dict:
    chart = rec["chart"]
    pde = fo.FirstOrderPDE(chart, _need(rec, "pde"))
    _need(rec, "datum_partial")
    datum = fo.complete_datum(pde, rec["datum_partial"], rec["datum_params"], rec.get("hint"))
    grid = rec.get("grid") or _default_grid(datum.params)
    s_range = rec.get("s_range", (0.0, args.s_max))
    sol = fo.integrate_characteristics(pde, datum, s_range, args.h, grid)
    out = {"method": "characteristics-rk4", "datum": {c.name: _s(v) for c, v in datum.components.items()},
           "datum_metadata": _jsonable(datum.metadata), "h": args.h, "s_range": list(s_range),
           "substeps": sol.substeps, "samples": int(sol.points.shape[0] * sol.points.shape[1]),
           "residual": sol.max_residual, "residual_bound": sol.bound, "diagnostics": sol.diagnostics}
    if args.out:
        sol.to_csv(args.out)
        out["csv"] = args.out
    if fo.fold_detected(sol):
        out["error"] = {"kind": "FoldDetected", "message": sol.diagnostics[-1]}
        raise _Partial(out)
    return out


def _mae_json(m: mae2d.MAE2D) -> dict:
    return m.as_dict()


def cmd_classify_mae(rec, args) -> dict:
    m = _need(rec, "mae")
    delta = mae2d.discriminant(m)
    cls = mae2d.classify(m, rec.get("point"), args.probe_count if args.probe_count_set else mae2d.CLASSIFY_PROBES,
                         args.seed, rec.get("region"))
    return {"method": "discriminant-sign", "mae": _mae_json(m), "delta": _s(delta), "class": cls.value}


def cmd_goursat_2d(rec, args) -> dict:
    m = _need(rec, "mae")
    pair = mae2d.characteristic_distributions(m, args.seed)
    g = mae2d.goursat_form(m)
    out = {"method": "goursat-2d", "mae": _mae_json(m), "delta": _s(mae2d.discriminant(m)),
           "sqrt_delta": _s(pair.sqrt_delta),
           "D": [_field_json(X) for X in pair.D.generators],
           "D_perp": [_field_json(X) for X in pair.D_perp.generators],
           "graphical": g.graphical, "scale": _s(g.scale), "diagnostics": g.diagnostics}
    if g.F is not None:
        out["F"] = [[_s(v) for v in g.F.row(i)] for i in range(2)]
    else:
        out["generator_rows"] = [[_s(v) for v in r] for r in g.rows]
    return out


def cmd_parabolic_flag(rec, args) -> dict:
    chart = rec["chart"] if rec["order"] == 1 else rec["chart"].first_order()
    if chart.n != 2:
        raise InputError("parabolic-flag needs n = 2", "/n")
    D = dist.Distribution(chart, _need(rec, "distribution"), args.seed, args.probe_count)
    rep = mae2d.parabolic_flag_classify(D)
    return {"method": "parabolic-derived-flag", "flag": list(rep.flag), "class": rep.cls.value,
            "template": rep.template}


def cmd_grassmannian(rec, args) -> dict:
    U = _need(rec, "U")
    out = {"method": "lagrangian-grassmannian", "symmetric": gr.is_symmetric(U)}
    if U.shape == (2, 2):
        z = gr.pluecker(U)
        out["pluecker"] = [_s(v) for v in z]
        out["on_lie_quadric"] = gr.on_lie_quadric(z)
    if "xi" in rec:
        lp = gr.line_prolongation(rec["xi"], U)
        out["line_prolongation"] = {"parameter": lp.parameter.name, "by": lp.parametrized_by,
                                    "curve": [[_s(v) for v in lp.curve.row(i)] for i in range(2)]}
        out["direction_rank"] = gr.rank_of_direction(lp.tangent)
        if "mae" in rec:
            out["strong_characteristic"] = gr.is_strong_characteristic(rec["xi"], U, rec["mae"], rec.get("point"))
    return out


def cmd_monge_nd(rec, args) -> dict:
    chart = rec["chart"] if rec["order"] == 1 else rec["chart"].first_order()
    D = dist.Distribution(chart, _need(rec, "distribution"), args.seed, args.probe_count)
    g = maend.GoursatMAE(D)
    out = {"method": "goursat-nd", "equation": _s(g.expr), "graphical": g.graphical,
           "diagnostics": list(g.diagnostics)}
    if g.legendre_subset is not None:
        out["legendre_subset"] = list(g.legendre_subset)
    ints = rec.get("integrals", [])
    out["intermediate_integrals"] = {_s(l): maend.is_intermediate_integral(l, g) for l in ints}
    if "datum_partial" in rec:
        datum = fo.complete_contact(chart, rec["datum_partial"], rec["datum_params"], hint=rec.get("hint"))
        prob = maend.MongeProblem(g, datum, ints, rec.get("psi"))
        f = maend.find_vanishing_integral(prob)
        grid = rec.get("grid") or _default_grid(datum.params)
        s_range = rec.get("s_range", (0.0, args.s_max))
        sol = maend.monge_extend(prob, f, s_range, args.h, grid)
        out["method"] = "monge-extend"
        out.update({"datum": {c.name: _s(v) for c, v in datum.components.items()}, "vanishing_integral": _s(f),
                    "h": args.h, "s_range": list(s_range), "substeps": sol.substeps,
                    "samples": int(sol.points.shape[0] * sol.points.shape[1]),
                    "residual": sol.max_residual, "residual_bound": sol.bound})
        out["diagnostics"] += sol.diagnostics
        if args.out:
            sol.to_csv(args.out)
            out["csv"] = args.out
        if fo.fold_detected(sol):
            out["error"] = {"kind": "FoldDetected", "message": sol.diagnostics[-1]}
            raise _Partial(out)
    return out


def cmd_complex_mae(rec, args) -> dict:
    n = args.n if args.n is not None else rec.get("n")
    mode = args.mode or rec.get("mode", "complex")
    if not isinstance(n, int) or n < 1:
        raise InputError("n must be a positive integer", "/n")
    if mode not in ("complex", "para"):
        raise InputError("mode must be 'complex' or 'para'", "/mode")
    re, im = maend.complex_mae(n, mode)
    return {"method": "holomorphic-volume-form", "n": n, "mode": mode, "parts": [_s(re), _s(im)]}


COMMANDS = {
    "expr": cmd_expr,
    "distribution": cmd_distribution,
    "hamiltonian": cmd_hamiltonian,
    "solve-first-order": cmd_solve_first_order,
    "classify-mae": cmd_classify_mae,
    "goursat-2d": cmd_goursat_2d,
    "parabolic-flag": cmd_parabolic_flag,
    "grassmannian": cmd_grassmannian,
    "monge-nd": cmd_monge_nd,
    "complex-mae": cmd_complex_mae,
}


class _Partial(Exception):
    """Carries a report that ends in a mathematical failure."""

    def __init__(self, report):
        super().__init__(report.get("error", {}).get("message", ""))
        self.report = report


MATH_ERRORS = (
    mae2d.MAEError,
    maend.GoursatError,
    fo.DatumError,
    fo.ResidualBoundError,
    gr.GrassmannianError,
    dist.DistributionError,
    MathFailure,
)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contactpde", description="Contact-geometric PDE toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("--file", required=name != "complex-mae")
        sp_.add_argument("--out")
        sp_.add_argument("--h", type=float, default=0.01)
        sp_.add_argument("--s-max", dest="s_max", type=float, default=1.0)
        sp_.add_argument("--jobs", type=int, default=1)
        sp_.add_argument("--seed", type=int, default=None)
        sp_.add_argument("--probe-count", dest="probe_count", type=int, default=None)
        if name == "complex-mae":
            sp_.add_argument("--n", type=int, default=None)
            sp_.add_argument("--mode", choices=("complex", "para"), default=None)
    return p


def _emit(report, stream):
    stream.write(json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n")


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    report: dict = {"command": args.command}
    try:
        rec = load_problem(args.file) if args.file else {"seed": 0}
        args.probe_count_set = args.probe_count is not None
        if args.probe_count is None:
            args.probe_count = 25
        if args.seed is None:
            args.seed = rec.get("seed", 0)
        if args.h <= 0:
            raise InputError("--h must be positive", "")
        report.update({"seed": args.seed, "probe_count": args.probe_count, "jobs": args.jobs})
        if args.file:
            report["input"] = rec["raw"]
        report.update(COMMANDS[args.command](rec, args))
    except InputError as e:
        report["error"] = {"kind": "InputError", "message": str(e), "pointer": e.pointer}
        _emit(report, stdout)
        return EXIT_INPUT
    except _Partial as e:
        report.update(e.report)
        _emit(report, stdout)
        return EXIT_MATH
    except MATH_ERRORS as e:
        report["error"] = {"kind": type(e).__name__, "message": str(e)}
        _emit(report, stdout)
        return EXIT_MATH
    except ValueError as e:
        report["error"] = {"kind": "InputError", "message": str(e), "pointer": ""}
        _emit(report, stdout)
        return EXIT_INPUT
    _emit(report, stdout)
    return EXIT_OK


def main():
    sys.exit(run())
