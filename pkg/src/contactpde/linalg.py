"""Rank and elimination helpers for matrices of expressions.

Generic ranks are measured at random rational probe points; exact Fraction
elimination is used whenever the evaluated entries stay rational, otherwise
an SVD with a relative tolerance.  Symbolic elimination works over the field
of rational functions using the package normal form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy as sp

from .symbolic import compile_exact, probe_points, simplify

DEFAULT_PROBES = 25


def exact_rank(rows: Sequence[Sequence[Fraction]]) -> int:
    m = [list(r) for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for c in range(ncols):
        piv = None
        for r in range(rank, len(m)):
            if m[r][c] != 0:
                piv = r
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pv = m[rank][c]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / pv
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
        if rank == len(m):
            break
    return rank


def numeric_rank(rows, rtol: float = 1e-9) -> int:
    a = np.array([[float(v) for v in r] for r in rows], dtype=float)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rtol * max(1.0, s[0])))


def value_rank(rows) -> int:
    if all(isinstance(v, Fraction) for r in rows for v in r):
        return exact_rank(rows)
    return numeric_rank(rows)


@dataclass
class RankReport:
    rank: int
    ranks: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)

    @property
    def constant(self) -> bool:
        return len(set(self.ranks)) <= 1


def _matrix_symbols(matrix) -> list:
    syms = set()
    for row in matrix:
        for e in row:
            syms |= sp.sympify(e).free_symbols
    return sorted(syms, key=lambda s: s.name)


def sample_matrix(matrix, probe_count: int = DEFAULT_PROBES, seed: int = 0, symbols=None):
    """Yield (point, evaluated rows) at admissible probe points."""
    if symbols is None:
        symbols = _matrix_symbols(matrix)
    nrows = len(matrix)
    ncols = len(matrix[0]) if nrows else 0
    flat = [e for row in matrix for e in row]
    fn = compile_exact(flat, symbols)
    gen = probe_points(symbols, seed)
    accepted = 0
    attempts = 0
    while accepted < probe_count:
        attempts += 1
        if attempts > 50 * probe_count + 100:
            raise ArithmeticError("no admissible probe point found")
        pt = next(gen)
        try:
            vals = fn(*[pt[s] for s in symbols])
        except (ZeroDivisionError, ValueError, OverflowError):
            continue
        accepted += 1
        yield pt, [vals[i * ncols:(i + 1) * ncols] for i in range(nrows)]


def generic_rank(matrix, probe_count: int = DEFAULT_PROBES, seed: int = 0) -> RankReport:
    """Maximum rank over random rational probes, keeping per-probe ranks."""
    if not matrix or not len(matrix[0]):
        return RankReport(0, [0], [])
    ranks = []
    points = []
    for pt, rows in sample_matrix(matrix, probe_count, seed):
        ranks.append(value_rank(rows))
        points.append(pt)
    best = max(ranks)
    witnesses = []
    if len(set(ranks)) > 1:
        hi = ranks.index(best)
        lo = ranks.index(min(ranks))
        witnesses = [(ranks[hi], points[hi]), (ranks[lo], points[lo])]
    return RankReport(best, ranks, witnesses)


def _is_zero_entry(e) -> bool:
    return e == 0


def _pivot_cost(e) -> int:
    return sp.count_ops(e) if not e.is_Number else -1


def rref(matrix, max_rows: int | None = None):
    """Reduced row echelon form over rational functions.

    Returns (rows, pivot columns).  Pivots are chosen among entries that are
    not identically zero, preferring constants and short expressions.
    """
    m = [[simplify(e) for e in row] for row in matrix]
    if not m:
        return [], []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        cands = [i for i in range(r, len(m)) if not _is_zero_entry(m[i][c])]
        if not cands:
            continue
        piv = min(cands, key=lambda i: _pivot_cost(m[i][c]))
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][c]
        m[r] = [simplify(v / pv) for v in m[r]]
        for i in range(len(m)):
            if i != r and not _is_zero_entry(m[i][c]):
                f = m[i][c]
                m[i] = [simplify(a - f * b) for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def nullspace(matrix, ncols: int | None = None):
    """Basis of {v : M v = 0} over rational functions (list of column lists)."""
    if ncols is None:
        ncols = len(matrix[0])
    rows, pivots = rref(matrix) if matrix else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [sp.Integer(0)] * ncols
        v[fc] = sp.Integer(1)
        for row, pc in zip(rows, pivots):
            v[pc] = simplify(-row[fc])
        basis.append(v)
    return basis


def independent_rows(matrix, probe_count: int = DEFAULT_PROBES, seed: int = 0):
    """Indices of a maximal generically independent subset of rows (greedy)."""
    if not matrix:
        return []
    samples = [rows for _, rows in sample_matrix(matrix, probe_count, seed)]
    chosen: list[int] = []
    current = 0
    for i in range(len(matrix)):
        idx = chosen + [i]
        rk = max(value_rank([rows[j] for j in idx]) for rows in samples)
        if rk > current:
            chosen.append(i)
            current = rk
    return chosen


def det(matrix) -> sp.Expr:
    return simplify(sp.Matrix(matrix).det(method="berkowitz"))
