"""Adversary strategies A[v|Q] and the constructed strategies used to certify
privacy values: uniform guessing, source guessing, and the optimal strategies
for alternating, i.i.d. and user-server noise."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Mapping, Sequence

from ..core import Path, Trace
from ..errors import ContractViolation, InvalidTraceError
from ..mechanisms import Mechanism
from .paths import trace_endpoints

Guess = dict[int, float]
SUM_TOLERANCE = 1e-12

AdversaryKind = Literal["uniform", "source_guess", "alt_optimal", "iid_optimal", "user_server_cloud"]


class AdversaryStrategy:
    """A guess distribution over nodes for each observed trace.

    ``table`` holds explicit distributions; ``rule`` (if given) computes the
    distribution for traces missing from the table.
    """

    def __init__(self, n: int, table: Mapping[Trace, Guess] | None = None,
                 rule: Callable[[Trace], Guess] | None = None, name: str = "table"):
        self.n = n
        self.name = name
        self.rule = rule
        self._table: dict[Trace, Guess] = {}
        for q, g in (table or {}).items():
            self._table[frozenset(q)] = self._checked(frozenset(q), g)

    def _checked(self, q: Trace, g: Guess) -> Guess:
        g = {v: p for v, p in g.items() if p != 0}
        for v, p in g.items():
            if not 0 <= v < self.n:
                raise ContractViolation(f"guess on unknown node {v}")
            if p < 0:
                raise ContractViolation(f"negative guess probability {p}")
        total = math.fsum(g.values())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ContractViolation(f"guess for trace {sorted(q)} sums to {total!r}")
        return g

    def guess(self, q: Trace) -> Guess:
        q = frozenset(q)
        g = self._table.get(q)
        if g is None:
            if self.rule is None:
                raise ContractViolation(f"strategy has no guess for trace {sorted(q)}")
            g = self._table[q] = self._checked(q, self.rule(q))
        return g

    def prob(self, v: int, q: Trace) -> float:
        return self.guess(q).get(v, 0.0)

    def hit(self, q: Trace, path: Path) -> float:
        """A[s(P)|Q] + A[d(P)|Q]."""
        g = self.guess(q)
        return g.get(path[0], 0.0) + g.get(path[-1], 0.0)

    def traces(self) -> list[Trace]:
        return list(self._table)


def adversary_success(mechanism: Mechanism, paths: Iterable[Path],
                      strategy: AdversaryStrategy) -> float:
    """min over P of the expected probability of guessing an endpoint of P."""
    best = None
    for p in paths:
        dist = mechanism.distribution(p)
        v = math.fsum(pr * strategy.hit(q, p) for q, pr in dist.entries)
        if best is None or v < best:
            best = v
    if best is None:
        raise ContractViolation("adversary success over an empty path set")
    return best


def uniform_guess(n: int) -> Guess:
    return {v: 1.0 / n for v in range(n)}


def _uniform_on(nodes: Iterable[int]) -> Guess:
    nodes = sorted(set(nodes))
    if not nodes:
        raise ContractViolation("cannot guess uniformly over an empty node set")
    return {v: 1.0 / len(nodes) for v in nodes}


# ------------------------------------------------------------ trace colouring

@dataclass(frozen=True)
class TraceColoring:
    gray: frozenset       # segment end nodes
    white: frozenset      # segment interiors
    black: frozenset      # everything else
    segments: int         # h
    internal_black: int | None  # k: black nodes on the generating path, if its length is known


def trace_segments(trace: Trace) -> list[list[int]]:
    """Split a trace into maximal chains of consecutive edges (as node lists)."""
    succ: dict[int, int] = {}
    heads = set()
    for u, v in trace:
        if u in succ or v in heads:
            raise InvalidTraceError(f"trace {sorted(trace)} is not part of a simple path")
        succ[u] = v
        heads.add(v)
    segs = []
    seen = 0
    for start in sorted(u for u in succ if u not in heads):
        seg = [start]
        while seg[-1] in succ:
            seg.append(succ[seg[-1]])
        segs.append(seg)
        seen += len(seg) - 1
    if seen != len(trace):
        raise InvalidTraceError(f"trace {sorted(trace)} contains a cycle")
    return segs


def color_trace(trace: Trace, n: int, length: int | None = None) -> TraceColoring:
    """Colour nodes for a trace drawn from a path with ``length`` edges."""
    segs = trace_segments(frozenset(trace))
    gray = set()
    white = set()
    for seg in segs:
        gray.update((seg[0], seg[-1]))
        white.update(seg[1:-1])
    black = frozenset(range(n)) - gray - white
    k = None
    if length is not None:
        k = length + 1 - len(gray) - len(white)
        if k < 0:
            raise InvalidTraceError("trace touches more nodes than the path has")
    return TraceColoring(frozenset(gray), frozenset(white), black, len(segs), k)


# ------------------------------------------------------------ constructions

@dataclass(frozen=True)
class AdversaryContext:
    n: int
    length: int | None = None             # fixed path length L
    paths: Sequence[Path] | None = None   # for the source guesser
    user_servers: Mapping[int, tuple[int, ...]] | None = None  # user -> attached servers


def cloud_value(x: int, y: int, z: int) -> float:
    """Best endpoint-hit probability when the source lies in X u Z and the
    destination in Y u Z, each candidate pair being possible."""
    return max(2.0 / (x + y + z), 1.0 / (x + z), 1.0 / (y + z))


def _cloud_guess(xs: set, ys: set, zs: set) -> Guess:
    x, y, z = len(xs), len(ys), len(zs)
    if x > y + z:
        return _uniform_on(ys | zs)
    if y > x + z:
        return _uniform_on(xs | zs)
    return _uniform_on(xs | ys | zs)


def _full_path_source(q: Trace) -> int | None:
    segs = trace_segments(q)
    return segs[0][0] if len(segs) == 1 else None


def make_adversary(kind: AdversaryKind, context: AdversaryContext) -> AdversaryStrategy:
    n = context.n
    if n < 2:
        raise ContractViolation("adversaries need n >= 2")
    empty = uniform_guess(n)

    if kind == "uniform":
        return AdversaryStrategy(n, rule=lambda q: empty, name=kind)

    if kind == "source_guess":
        if context.paths is None:
            raise ContractViolation("source guessing needs the available paths")
        paths = list(context.paths)

        def rule(q):
            if not q:
                return empty
            return {trace_endpoints(q, paths)[0]: 1.0}
        return AdversaryStrategy(n, rule=rule, name=kind)

    if kind in ("alt_optimal", "iid_optimal"):
        L = context.length
        if L is None or L < 1 or L + 1 > n:
            raise ContractViolation(f"{kind} needs a path length with 1 <= L <= n - 1")
        if kind == "alt_optimal" and L < 2:
            raise ContractViolation("alternating noise needs L >= 2")

        def rule(q):
            if not q:
                return empty
            if len(q) == L:
                return {_full_path_source(q): 1.0}
            col = color_trace(q, n, L)
            if kind == "iid_optimal":
                if col.internal_black <= n - L - 1:
                    return _uniform_on(col.gray)
                return _uniform_on(col.black)
            half = L // 2
            if L % 2 == 0:
                if 2 * L < n:
                    return _uniform_on(col.gray)
                if 2 * L == n:
                    return _uniform_on(col.gray | col.black)
                return _uniform_on(col.black)
            if len(q) == half + 1:      # odd-position edges of an odd-length path
                return _uniform_on(col.gray)
            if len(q) == half:
                return _uniform_on(col.black)
            raise InvalidTraceError(f"trace of size {len(q)} is not an alternating trace for L={L}")
        return AdversaryStrategy(n, rule=rule, name=kind)

    if kind == "user_server_cloud":
        if context.user_servers is None:
            raise ContractViolation("the cloud adversary needs the user-server attachment map")
        users = dict(context.user_servers)
        clouds: dict[int, set] = {}
        for u, ss in users.items():
            for s in ss:
                clouds.setdefault(s, {s}).add(u)

        def rule(q):
            if not q:
                return empty
            segs = trace_segments(q)
            if len(segs) != 1:
                raise InvalidTraceError("the cloud adversary expects a contiguous server path")
            x, y = segs[0][0], segs[0][-1]
            cx = clouds.get(x, {x})
            cy = clouds.get(y, {y})
            zs = cx & cy
            return _cloud_guess(cx - zs, cy - zs, zs)
        return AdversaryStrategy(n, rule=rule, name=kind)

    raise ContractViolation(f"unknown adversary kind {kind!r}")

