"""Exact privacy as a linear program.

For every path P the adversary's expected endpoint hit must be at least t;
each observed trace Q owns one guess distribution shared by all paths that can
emit it. Guessing a node that is never an endpoint of a path emitting Q is
useless, so only those candidate nodes get variables, and any leftover mass is
spread uniformly when the strategy is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from ..core import EMPTY_TRACE, Path, Trace
from ..errors import ContractViolation, SizeLimitError
from ..mechanisms import Mechanism, TraceDistribution
from .adversaries import AdversaryStrategy, Guess
from .simplex import solve_max

SUPPORT_CAP = 100_000
EXACT_NONZERO_CAP = 600
HIGHS_TOLERANCE = 1e-10

Solver = Literal["auto", "exact", "highs"]


@dataclass(frozen=True)
class LpStatus:
    kind: Literal["exact", "numeric"]
    tolerance: float = 0.0  # certified width of the bracket around the optimum


@dataclass
class PrivacyResult:
    privacy: float
    optimal_adversary: AdversaryStrategy
    lp_status: LpStatus
    exact_value: Fraction | None = None  # 1 - privacy as a rational when solved exactly


@dataclass
class _Problem:
    n: int
    paths: list[Path]
    dists: list[TraceDistribution]
    blocks: dict[Trace, dict[int, int]]  # trace -> node -> column
    ncols: int


def _build(mechanism: Mechanism, paths: Sequence[Path], n: int) -> _Problem:
    dists = []
    support = 0
    for p in paths:
        d = mechanism.distribution(p)
        support += len(d.entries)
        if support > SUPPORT_CAP:
            raise SizeLimitError(f"trace support exceeds {SUPPORT_CAP}")
        dists.append(d)
    blocks: dict[Trace, dict[int, int]] = {EMPTY_TRACE: {}}
    col = 1  # column 0 is t
    for v in range(n):
        blocks[EMPTY_TRACE][v] = col
        col += 1
    for p, d in zip(paths, dists):
        for q, _ in d.entries:
            b = blocks.setdefault(q, {})
            for v in (p[0], p[-1]):
                if v not in b:
                    b[v] = col
                    col += 1
    return _Problem(n, list(paths), dists, blocks, col)


def _path_rows(prob: _Problem, exact: bool) -> list[dict[int, object]]:
    rows = []
    for p, d in zip(prob.paths, prob.dists):
        row: dict[int, object] = {0: 1}
        for q, pr in d.entries:
            w = Fraction(pr) if exact else pr
            b = prob.blocks[q]
            for v in (p[0], p[-1]):
                c = b[v]
                row[c] = row.get(c, 0) - w
        rows.append(row)
    return rows


def _strategy(prob: _Problem, x: Sequence[float]) -> AdversaryStrategy:
    table: dict[Trace, Guess] = {}
    for q, b in prob.blocks.items():
        g = {v: max(0.0, float(x[c])) for v, c in b.items()}
        total = math.fsum(g.values())
        if total > 1.0:
            g = {v: p / total for v, p in g.items()}
            total = 1.0
        spare = (1.0 - total) / prob.n
        if spare > 0:
            for v in range(prob.n):
                g[v] = g.get(v, 0.0) + spare
        total = math.fsum(g.values())
        # absorb float residue so the distribution sums to 1 to machine precision
        top = max(g, key=g.get)
        g[top] += 1.0 - total
        table[q] = g
    return AdversaryStrategy(prob.n, table, name="lp_optimal")


def _value_of(prob: _Problem, strategy: AdversaryStrategy) -> float:
    return min(math.fsum(pr * strategy.hit(q, p) for q, pr in d.entries)
               for p, d in zip(prob.paths, prob.dists))


def _dual_bound(prob: _Problem, weights: Sequence[float]) -> float:
    """Upper bound on the optimum from a distribution over paths: the best
    response to it, trace by trace."""
    w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    if w.sum() <= 0:
        return 1.0
    w = w / w.sum()
    score: dict[Trace, dict[int, float]] = {}
    for wp, p, d in zip(w, prob.paths, prob.dists):
        if wp == 0:
            continue
        for q, pr in d.entries:
            s = score.setdefault(q, {})
            for v in (p[0], p[-1]):
                s[v] = s.get(v, 0.0) + wp * pr
    return math.fsum(max(s.values()) for s in score.values())


def privacy_lp(mechanism: Mechanism, paths: Sequence[Path], n: int | None = None,
               solver: Solver = "auto") -> PrivacyResult:
    """Minimax privacy of ``mechanism`` over the path set ``paths``."""
    paths = list(paths)
    if not paths:
        raise ContractViolation("privacy needs at least one path")
    if n is None:
        n = 1 + max(max(p) for p in paths)
    if n < 2:
        raise ContractViolation("privacy needs n >= 2")
    prob = _build(mechanism, paths, n)
    nnz = sum(2 * len(d.entries) + 1 for d in prob.dists) + prob.ncols
    if solver == "auto":
        solver = "exact" if nnz <= EXACT_NONZERO_CAP else "highs"
    if solver == "exact":
        return _solve_exact(prob)
    if solver == "highs":
        return _solve_highs(prob)
    raise ContractViolation(f"unknown solver {solver!r}")


def _block_rows(prob: _Problem) -> list[dict[int, object]]:
    return [{c: 1 for c in b.values()} for b in prob.blocks.values()]


def _solve_exact(prob: _Problem) -> PrivacyResult:
    rows = _path_rows(prob, exact=True) + _block_rows(prob)
    b = [0] * len(prob.paths) + [1] * len(prob.blocks)
    c = [1] + [0] * (prob.ncols - 1)
    res = solve_max(c, rows, b)
    strategy = _strategy(prob, [float(v) for v in res.x])
    # float input probabilities may sum to 1 +- ulp, so clamp the reported value
    return PrivacyResult(_clamp(float(1 - res.value)), strategy, LpStatus("exact"), 1 - res.value)


def _solve_highs(prob: _Problem) -> PrivacyResult:
    rows = _path_rows(prob, exact=False) + _block_rows(prob)
    data, ri, ci = [], [], []
    for i, row in enumerate(rows):
        for j, a in row.items():
            ri.append(i)
            ci.append(j)
            data.append(float(a))
    A = csr_matrix((data, (ri, ci)), shape=(len(rows), prob.ncols))
    b = np.concatenate([np.zeros(len(prob.paths)), np.ones(len(prob.blocks))])
    c = np.zeros(prob.ncols)
    c[0] = -1.0
    res = linprog(c, A_ub=A, b_ub=b, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": HIGHS_TOLERANCE,
                           "dual_feasibility_tolerance": HIGHS_TOLERANCE})
    if res.status != 0:
        raise ContractViolation(f"LP solver failed: {res.message}")
    strategy = _strategy(prob, res.x)
    lower = _value_of(prob, strategy)
    upper = _dual_bound(prob, -res.ineqlin.marginals[:len(prob.paths)])
    upper = max(upper, lower)
    return PrivacyResult(_clamp(1.0 - lower), strategy, LpStatus("numeric", upper - lower))


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))
