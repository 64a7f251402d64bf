"""Dense primal simplex in exact rational arithmetic.

Solves  max c.x  s.t.  A x <= b,  x >= 0  with b >= 0, so the slack basis is
feasible from the start and no phase one is needed. Pivots follow the
steepest reduced cost until a long run of degenerate pivots, after which
Bland's rule takes over and guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ..errors import ContractViolation

DEGENERATE_LIMIT = 50


@dataclass
class SimplexResult:
    value: Fraction
    x: list[Fraction]
    duals: list[Fraction]  # one per row; optimal dual solution
    pivots: int


def solve_max(c: Sequence, rows: Sequence[dict[int, object]], b: Sequence,
              max_pivots: int = 200_000) -> SimplexResult:
    """``rows[i]`` maps column index to coefficient (sparse input)."""
    m = len(rows)
    nv = len(c)
    if len(b) != m:
        raise ContractViolation("row count and right-hand side length differ")
    width = nv + m
    # tableau rows are sparse dicts: column -> Fraction; last key -1 is the rhs
    tab: list[dict[int, Fraction]] = []
    for i, row in enumerate(rows):
        bi = Fraction(b[i])
        if bi < 0:
            raise ContractViolation("right-hand side must be non-negative")
        r = {j: Fraction(a) for j, a in row.items() if a != 0}
        r[nv + i] = Fraction(1)
        r[-1] = bi
        tab.append(r)
    # objective row stores reduced costs as -c (we pivot while some entry < 0)
    obj: dict[int, Fraction] = {j: -Fraction(cj) for j, cj in enumerate(c) if cj != 0}
    obj[-1] = Fraction(0)
    basis = [nv + i for i in range(m)]
    pivots = 0
    degenerate_run = 0
    bland = False
    while True:
        candidates = [k for k, v in obj.items() if k >= 0 and v < 0]
        if not candidates:
            break
        if bland:
            enter = min(candidates)
        else:
            # steepest reduced cost first; ties to the lowest index
            enter = min(candidates, key=lambda k: (obj[k], k))
        leave = None
        best = None
        for i, r in enumerate(tab):
            a = r.get(enter)
            if a is not None and a > 0:
                ratio = r.get(-1, 0) / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave is None:
            raise ContractViolation("linear program is unbounded")
        degenerate_run = degenerate_run + 1 if best == 0 else 0
        if degenerate_run > DEGENERATE_LIMIT:
            bland = True  # Bland's rule from here on cannot cycle
        _pivot(tab, obj, leave, enter)
        basis[leave] = enter
        pivots += 1
        if pivots > max_pivots:
            raise ContractViolation("simplex pivot limit reached")
    x = [Fraction(0)] * width
    for i, j in enumerate(basis):
        x[j] = tab[i].get(-1, Fraction(0))
    duals = [obj.get(nv + i, Fraction(0)) for i in range(m)]
    return SimplexResult(obj.get(-1, Fraction(0)), x[:nv], duals, pivots)


def _pivot(tab: list[dict[int, Fraction]], obj: dict[int, Fraction], r: int, col: int) -> None:
    prow = tab[r]
    a = prow[col]
    if a != 1:
        for k in prow:
            prow[k] /= a
    for target in (*tab, obj):
        if target is prow:
            continue
        f = target.get(col)
        if not f:
            continue
        for k, v in prow.items():
            nv = target.get(k, 0) - f * v
            if nv:
                target[k] = nv
            else:
                target.pop(k, None)
        target.pop(col, None)
