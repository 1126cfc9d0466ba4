"""Scalar expressions: parsing, printing, normal forms, evaluation, zero tests.

Expressions are sympy trees.  This module fixes the small surface the rest of
the package relies on: a grammar with byte-offset errors, a canonical rational
normal form that treats square roots through their defining relation, an
evaluator that reports the failing subtree, and a two-tier zero test.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import sympy as sp
from sympy.polys.fields import FracField
from sympy.polys.orderings import lex

Expr = sp.Expr

FUNCTIONS = {"sqrt": sp.sqrt, "sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "log": sp.log}
_ELEMENTARY = (sp.sin, sp.cos, sp.exp, sp.log)

NUMERIC_ZERO_TOL = 1e-10


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
        self.text = text


class UnknownSymbolError(ValueError):
    def __init__(self, name: str, offset: int, allowed: Sequence[str]):
        listing = ", ".join(allowed)
        super().__init__(f"unknown identifier {name!r} at byte {offset}; chart symbols: {listing}")
        self.name = name
        self.offset = offset
        self.allowed = tuple(allowed)


class EvaluationError(ArithmeticError):
    """Raised by eval_numeric; ``subtree`` is the offending node."""

    def __init__(self, kind: str, subtree):
        super().__init__(f"{kind} in {sp.sstr(subtree)}")
        self.kind = kind
        self.subtree = subtree


# --------------------------------------------------------------------------
# parsing

_TOKEN_OPS = ("**", "+", "-", "*", "/", "^", "(", ")", ",")


def _tokenize(text: str):
    data = text.encode("utf-8")
    i = 0
    out = []
    while i < len(data):
        c = chr(data[i])
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < len(data) and chr(data[i + 1]).isdigit()):
            j = i
            while j < len(data) and (chr(data[j]).isdigit() or chr(data[j]) == "."):
                j += 1
            if j < len(data) and chr(data[j]) in "eE":
                k = j + 1
                if k < len(data) and chr(data[k]) in "+-":
                    k += 1
                if k < len(data) and chr(data[k]).isdigit():
                    j = k
                    while j < len(data) and chr(data[j]).isdigit():
                        j += 1
            lit = data[i:j].decode()
            if lit.count(".") > 1:
                raise ExprSyntaxError(f"malformed number {lit!r}", i, text)
            out.append(("num", lit, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(data) and (chr(data[j]).isalnum() or chr(data[j]) == "_"):
                j += 1
            out.append(("id", data[i:j].decode(), i))
            i = j
            continue
        if data[i:i + 2] == b"**":
            out.append(("op", "^", i))
            i += 2
            continue
        if c in "+-*/^(),":
            out.append(("op", c, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i, text)
    out.append(("end", "", len(data)))
    return out


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary)*
    # unary  := ('+'|'-') unary | power
    # power  := atom ('^' unary)?
    # atom   := number | identifier | identifier '(' expr ')' | '(' expr ')'

    def __init__(self, text: str, symbols: Mapping[str, sp.Symbol] | None):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0
        self.symbols = symbols

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] == "num":
            raise ExprSyntaxError(f"expected {value!r}", tok[2], self.text)
        return tok

    def parse(self):
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0, self.text)
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2], self.text)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            e = self.unary()
            return -e if tok[1] == "-" else e
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return base ** self.unary()
        return base

    def atom(self):
        tok = self.take()
        kind, val, off = tok
        if kind == "num":
            return sp.Rational(val)
        if kind == "id":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {val!r}", off, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return FUNCTIONS[val](arg)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} needs an argument", off, self.text)
            if self.symbols is not None:
                if val not in self.symbols:
                    raise UnknownSymbolError(val, off, list(self.symbols))
                return self.symbols[val]
            return sp.Symbol(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off, self.text)
        raise ExprSyntaxError(f"unexpected token {val!r}", off, self.text)


def parse(text: str, symbols: Iterable[sp.Symbol] | None = None, canonical: bool = True) -> Expr:
    """Parse infix text into an expression.

    ``symbols`` restricts the admissible identifiers (a chart context).  Both
    ``^`` and ``**`` denote powers.
    """
    table = None
    if symbols is not None:
        table = {s.name: s for s in symbols}
    e = _Parser(text, table).parse()
    return simplify(e) if canonical else e


def to_text(e) -> str:
    """Deterministic, re-parseable printing."""
    return sp.sstr(sp.sympify(e))


# --------------------------------------------------------------------------
# normal form


def _leading_sign(p: Expr) -> int:
    gens = sorted(p.free_symbols, key=lambda s: s.name)
    if not gens:
        return -1 if p.is_negative else 1
    lc = sp.Poly(p, *gens).LC()
    return -1 if lc.is_negative else 1


def _square_root_of_poly(p: Expr):
    """Return q with q**2 == p when p is a perfect square polynomial, else None."""
    p = sp.expand(p)
    if p == 0:
        return sp.Integer(0)
    if not p.is_polynomial(*p.free_symbols):
        return None
    coeff, factors = sp.factor_list(p)
    if any(m % 2 for _, m in factors):
        return None
    c = sp.Rational(coeff)
    if c < 0:
        return None
    rc = sp.sqrt(c)
    if not rc.is_Rational:
        return None
    q = rc
    for f, m in factors:
        q *= f ** (m // 2)
    q = sp.expand(q)
    return q if _leading_sign(q) > 0 else -q


def _sqrt_normal(arg: Expr) -> Expr:
    num, den = sp.fraction(arg)
    rn = _square_root_of_poly(num)
    rd = _square_root_of_poly(den)
    if rn is not None and rd is not None:
        return rn / rd
    return sp.sqrt(arg)


def _normalize_args(e):
    if e.is_Atom:
        return e
    if isinstance(e, _ELEMENTARY):
        return e.func(simplify(e.args[0]))
    if e.is_Pow:
        base, ex = e.args
        if ex.is_Rational and ex.q == 2:
            root = _sqrt_normal(simplify(base))
            return root ** ex.p
        if ex.is_Integer:
            return _normalize_args(base) ** ex
        return sp.Pow(simplify(base), simplify(ex))
    return e.func(*[_normalize_args(a) for a in e.args])


def _split_by_power(expr: Expr, w: sp.Symbol):
    """Write a polynomial in w as c0 + c1*w + ... and return coefficients."""
    poly = sp.Poly(expr, w)
    coeffs = {}
    for (k,), c in poly.terms():
        coeffs[k] = c
    return coeffs


def _reduce_mod_square(expr: Expr, w: sp.Symbol, radicand: Expr):
    coeffs = _split_by_power(sp.expand(expr), w)
    even = sp.Integer(0)
    odd = sp.Integer(0)
    for k, c in coeffs.items():
        if k % 2 == 0:
            even += c * radicand ** (k // 2)
        else:
            odd += c * radicand ** (k // 2)
    return sp.expand(even), sp.expand(odd)


def _is_polynomial(e: Expr) -> bool:
    if e.atoms(sp.Function):
        return False
    return all(p.exp.is_Integer and p.exp >= 0 for p in e.atoms(sp.Pow))


def _fraction_field_form(e: Expr) -> Expr:
    """Reduced numerator/denominator via sympy's sparse rational function field."""
    if e.atoms(sp.Function, sp.Float):
        return sp.cancel(e)
    syms = sorted(e.free_symbols, key=sp.default_sort_key)
    if not syms:
        return sp.cancel(e)
    try:
        K = FracField(syms, sp.QQ, lex)
        return K.from_expr(e).as_expr()
    except (ValueError, TypeError, sp.PolynomialError, sp.polys.polyerrors.CoercionFailed):
        return sp.cancel(e)


def _radical_normal_form(e: Expr) -> Expr:
    if _is_polynomial(e):
        return sp.expand(e)
    halves = [p for p in e.atoms(sp.Pow) if p.exp.is_Rational and p.exp.q == 2]
    if not halves:
        return _fraction_field_form(e)
    bases = sorted({p.base for p in halves}, key=sp.default_sort_key)
    ws = {b: sp.Dummy(f"w{i}") for i, b in enumerate(bases)}
    e = e.xreplace({p: ws[p.base] ** p.exp.p for p in halves})
    e = sp.cancel(sp.together(e))
    num, den = sp.fraction(e)
    for b in bases:
        w = ws[b]
        if not (num.has(w) or den.has(w)):
            continue
        n0, n1 = _reduce_mod_square(num, w, b)
        d0, d1 = _reduce_mod_square(den, w, b)
        if d1 != 0:
            # multiply by the conjugate to clear the radical from the denominator
            num = sp.expand((n0 + n1 * w) * (d0 - d1 * w))
            den = sp.expand(d0 ** 2 - d1 ** 2 * b)
            n0, n1 = _reduce_mod_square(num, w, b)
        else:
            den = d0
        num = n0 + n1 * w
        if den == 0:
            raise ZeroDivisionError("division by the zero polynomial")
    e = sp.cancel(num / den)
    return e.xreplace({w: sp.sqrt(b) for b, w in ws.items()})


def simplify(e) -> Expr:
    """Canonical rational normal form.

    Arguments of sqrt and of the elementary functions are normalized
    recursively; sqrt of a perfect square collapses to the root with
    nonnegative leading coefficient; products of equal radicals are reduced
    with (sqrt R)**2 = R and radicals are cleared from denominators.
    """
    e = sp.sympify(e)
    if e.is_Atom:
        return e
    if e.has(sp.zoo, sp.nan):
        raise ZeroDivisionError("division by the zero polynomial")
    e = _normalize_args(e)
    try:
        out = _radical_normal_form(e)
    except sp.PolynomialError:
        out = sp.cancel(e)
    if out.has(sp.zoo, sp.nan):
        raise ZeroDivisionError("division by the zero polynomial")
    return out


def diff(e, s) -> Expr:
    return simplify(sp.diff(sp.sympify(e), s))


def substitute(e, bindings: Mapping) -> Expr:
    """Simultaneous substitution followed by normalization."""
    if not bindings:
        return simplify(e)
    table = {sp.sympify(k): sp.sympify(v) for k, v in bindings.items()}
    return simplify(sp.sympify(e).xreplace(table))


# --------------------------------------------------------------------------
# evaluation


def _as_exact(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, sp.Rational):
        return Fraction(int(v.p), int(v.q))
    return None


def _exact_sqrt(v):
    if isinstance(v, Fraction):
        if v < 0:
            raise ValueError("negative sqrt argument")
        n, d = v.numerator, v.denominator
        rn, rd = math.isqrt(n), math.isqrt(d)
        if rn * rn == n and rd * rd == d:
            return Fraction(rn, rd)
        return math.sqrt(n / d)
    if v < 0:
        raise ValueError("negative sqrt argument")
    return math.sqrt(v)


def _walk(e, a):
    if e.is_Symbol:
        if e not in a:
            raise EvaluationError("unbound symbol", e)
        v = a[e]
        ex = _as_exact(v)
        return ex if ex is not None else float(v)
    if e.is_Rational:
        return Fraction(int(e.p), int(e.q))
    if e.is_Number:
        return float(e)
    if e is sp.pi:
        return math.pi
    if e is sp.E:
        return math.e
    if e.is_Add:
        return sum((_walk(t, a) for t in e.args), Fraction(0))
    if e.is_Mul:
        acc = Fraction(1)
        for t in e.args:
            acc = acc * _walk(t, a)
        return acc
    if e.is_Pow:
        base = _walk(e.base, a)
        ex = e.exp
        if ex.is_Integer:
            if base == 0 and ex < 0:
                raise EvaluationError("division by zero", e)
            return base ** int(ex)
        if ex.is_Rational and ex.q == 2:
            if base < 0:
                raise EvaluationError("negative sqrt argument", e)
            r = _exact_sqrt(base)
            if r == 0 and ex < 0:
                raise EvaluationError("division by zero", e)
            return r ** int(ex.p)
        b = float(base)
        if b < 0:
            raise EvaluationError("negative base with fractional exponent", e)
        if b == 0 and float(_walk(ex, a)) < 0:
            raise EvaluationError("division by zero", e)
        return b ** float(_walk(ex, a))
    if isinstance(e, sp.sin):
        return math.sin(float(_walk(e.args[0], a)))
    if isinstance(e, sp.cos):
        return math.cos(float(_walk(e.args[0], a)))
    if isinstance(e, sp.exp):
        return math.exp(float(_walk(e.args[0], a)))
    if isinstance(e, sp.log):
        v = float(_walk(e.args[0], a))
        if v <= 0:
            raise EvaluationError("log of a nonpositive value", e)
        return math.log(v)
    raise EvaluationError("unsupported node", e)


def eval_exact(e, a: Mapping):
    """Evaluate keeping exact rationals where possible (Fraction or float)."""
    return _walk(sp.sympify(e), {sp.sympify(k): v for k, v in a.items()})


def eval_numeric(e, a: Mapping) -> float:
    return float(eval_exact(e, a))


class _Compiler:
    """Turn an expression into Python source evaluated with Fractions."""

    def __init__(self, args: Sequence[sp.Symbol]):
        self.names = {s: f"a{i}" for i, s in enumerate(args)}
        self.consts: dict[str, object] = {}

    def const(self, value):
        name = f"c{len(self.consts)}"
        self.consts[name] = value
        return name

    def emit(self, e) -> str:
        if e.is_Symbol:
            if e not in self.names:
                raise EvaluationError("unbound symbol", e)
            return self.names[e]
        if e.is_Rational:
            return self.const(Fraction(int(e.p), int(e.q)))
        if e.is_Number:
            return self.const(float(e))
        if e is sp.pi:
            return self.const(math.pi)
        if e is sp.E:
            return self.const(math.e)
        if e.is_Add:
            return "(" + " + ".join(self.emit(t) for t in e.args) + ")"
        if e.is_Mul:
            return "(" + " * ".join(self.emit(t) for t in e.args) + ")"
        if e.is_Pow:
            b = self.emit(e.base)
            ex = e.exp
            if ex.is_Integer:
                return f"({b} ** {int(ex)})"
            if ex.is_Rational and ex.q == 2:
                return f"(_sqrt({b}) ** {int(ex.p)})"
            return f"_fpow({b}, {self.emit(ex)})"
        for fn, name in ((sp.sin, "_sin"), (sp.cos, "_cos"), (sp.exp, "_exp"), (sp.log, "_log")):
            if isinstance(e, fn):
                return f"{name}({self.emit(e.args[0])})"
        raise EvaluationError("unsupported node", e)


def _fpow(b, x):
    return float(b) ** float(x)


def _flog(v):
    v = float(v)
    if v <= 0:
        raise ValueError("log of a nonpositive value")
    return math.log(v)


_RUNTIME = {
    "_sqrt": _exact_sqrt,
    "_fpow": _fpow,
    "_sin": lambda v: math.sin(float(v)),
    "_cos": lambda v: math.cos(float(v)),
    "_exp": lambda v: math.exp(float(v)),
    "_log": _flog,
}


def compile_exact(exprs: Sequence, args: Sequence[sp.Symbol]) -> Callable:
    """Compile expressions into ``f(*values) -> list`` using exact arithmetic.

    Failures (division by zero, negative radicands) surface as
    ZeroDivisionError or ValueError.
    """
    comp = _Compiler(args)
    bodies = [comp.emit(sp.sympify(e)) for e in exprs]
    params = ", ".join(comp.names[s] for s in args)
    src = f"def _f({params}):\n    return [{', '.join(bodies)}]\n"
    ns = dict(_RUNTIME)
    ns.update(comp.consts)
    exec(src, ns)
    return ns["_f"]


# --------------------------------------------------------------------------
# zero testing


def random_rational(rng: random.Random, max_den: int = 97, bound: int = 3) -> Fraction:
    """A nonzero rational with denominator at most ``max_den``."""
    while True:
        q = rng.randint(1, max_den)
        p = rng.randint(-bound * q, bound * q)
        if p:
            return Fraction(p, q)


def probe_points(symbols: Sequence[sp.Symbol], seed: int = 0, max_den: int = 97):
    """Endless stream of random rational assignments."""
    rng = random.Random(seed)
    while True:
        yield {s: random_rational(rng, max_den) for s in symbols}


class ZeroKind(enum.Enum):
    SYMBOLIC_ZERO = "SymbolicZero"
    NUMERIC_ZERO = "NumericZero"
    NONZERO = "NonZero"


@dataclass(frozen=True)
class ZeroTest:
    kind: ZeroKind
    witness: dict | None = None
    value: float | None = None

    def __bool__(self):
        return self.kind is not ZeroKind.NONZERO


def numeric_probe_zero(e, probe_count: int = 20, seed: int = 0, tol: float = NUMERIC_ZERO_TOL) -> ZeroTest:
    """Probabilistic zero test only (no symbolic normalization)."""
    e = sp.sympify(e)
    syms = sorted(e.free_symbols, key=lambda s: s.name)
    fn = compile_exact([e], syms)
    accepted = 0
    attempts = 0
    gen = probe_points(syms, seed)
    while accepted < probe_count:
        attempts += 1
        if attempts > 50 * probe_count + 100:
            raise ArithmeticError("no admissible probe point found")
        pt = next(gen)
        try:
            v = fn(*[pt[s] for s in syms])[0]
        except (ZeroDivisionError, ValueError, OverflowError):
            continue
        if isinstance(v, complex):
            continue
        accepted += 1
        if abs(float(v)) >= tol:
            return ZeroTest(ZeroKind.NONZERO, dict(pt), float(v))
    return ZeroTest(ZeroKind.NUMERIC_ZERO)


def is_zero(e, probe_count: int = 20, seed: int = 0) -> ZeroTest:
    """Two-tier zero test: symbolic normal form, then random rational probes."""
    if probe_count < 1:
        raise ValueError("probe_count must be at least 1")
    s = simplify(e)
    if s == 0:
        return ZeroTest(ZeroKind.SYMBOLIC_ZERO)
    if s.is_Number:
        return ZeroTest(ZeroKind.NONZERO, {}, float(s))
    return numeric_probe_zero(s, probe_count, seed)


def free_symbol_names(e) -> list[str]:
    return sorted(s.name for s in sp.sympify(e).free_symbols)
