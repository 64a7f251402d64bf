"""Available-path sets, reachability and path-trace endpoints."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

from ..core import Edge, NetworkState, Path, Trace
from ..errors import ContractViolation, InvalidTraceError, SizeLimitError

SHORTEST_NODE_CAP = 200
FIXED_NODE_CAP = 9
FIXED_LENGTH_CAP = 6
PATH_COUNT_CAP = 2_000_000


@dataclass(frozen=True)
class PathPolicy:
    """Which paths transactions may use.

    ``relays`` optionally restricts which nodes may appear in a path's interior
    (users in a user-server network never relay).
    """

    kind: Literal["shortest", "fixed_length", "explicit"] = "shortest"
    length: int | None = None
    paths: tuple[Path, ...] = ()
    relays: frozenset | None = None

    def __post_init__(self):
        if self.kind == "fixed_length" and (self.length is None or self.length < 1):
            raise ContractViolation("fixed-length policy needs length >= 1")
        if self.kind == "explicit" and not self.paths:
            raise ContractViolation("explicit policy needs at least one path")

    @classmethod
    def shortest(cls, relays: Iterable[int] | None = None) -> PathPolicy:
        return cls("shortest", relays=None if relays is None else frozenset(relays))

    @classmethod
    def fixed_length(cls, length: int, relays: Iterable[int] | None = None) -> PathPolicy:
        return cls("fixed_length", length=length,
                   relays=None if relays is None else frozenset(relays))

    @classmethod
    def explicit(cls, paths: Iterable[Sequence[int]]) -> PathPolicy:
        return cls("explicit", paths=tuple(p if isinstance(p, Path) else Path(p) for p in paths))


def _neighbors(state: NetworkState) -> list[list[int]]:
    return [sorted(v for v, _ in row) for row in state.adj]


def _relay_ok(policy: PathPolicy, v: int) -> bool:
    return policy.relays is None or v in policy.relays


def _shortest_from(nbrs: list[list[int]], s: int, policy: PathPolicy
                   ) -> tuple[dict[int, int], dict[int, list[int]]]:
    dist = {s: 0}
    preds: dict[int, list[int]] = {s: []}
    queue = deque([s])
    while queue:
        x = queue.popleft()
        if x != s and not _relay_ok(policy, x):
            continue  # reached, but may not forward
        for y in nbrs[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                preds[y] = [x]
                queue.append(y)
            elif dist[y] == dist[x] + 1:
                preds[y].append(x)
    return dist, preds


def _unwind(preds: dict[int, list[int]], s: int, d: int) -> list[Path]:
    out = []
    stack = [(d, [d])]
    while stack:
        v, suffix = stack.pop()
        if v == s:
            out.append(Path(reversed(suffix)))
            continue
        for p in preds[v]:
            stack.append((p, suffix + [p]))
    return out


def enumerate_paths(state: NetworkState, policy: PathPolicy) -> list[Path]:
    """All paths the policy allows, in a deterministic order."""
    n = state.n
    if policy.kind == "explicit":
        for p in policy.paths:
            for u, v in p.edges:
                if not (0 <= u < n and 0 <= v < n and state.has_channel(u, v)):
                    raise ContractViolation(f"{p!r} uses a missing channel {(u, v)}")
        return list(policy.paths)
    nbrs = _neighbors(state)
    out: list[Path] = []
    if policy.kind == "shortest":
        if n > SHORTEST_NODE_CAP:
            raise SizeLimitError(f"shortest-path enumeration is capped at n <= {SHORTEST_NODE_CAP}")
        for s in range(n):
            dist, preds = _shortest_from(nbrs, s, policy)
            for d in sorted(dist):
                if d == s:
                    continue
                found = _unwind(preds, s, d)
                found.sort()
                out.extend(found)
                if len(out) > PATH_COUNT_CAP:
                    raise SizeLimitError(f"more than {PATH_COUNT_CAP} shortest paths")
        return out
    L = policy.length
    if n > FIXED_NODE_CAP or L > FIXED_LENGTH_CAP:
        raise SizeLimitError(f"fixed-length enumeration is capped at n <= {FIXED_NODE_CAP}, "
                             f"L <= {FIXED_LENGTH_CAP}")

    def extend(prefix: list[int], seen: set[int]):
        if len(prefix) == L + 1:
            out.append(Path(prefix))
            return
        x = prefix[-1]
        if len(prefix) > 1 and not _relay_ok(policy, x):
            return
        for y in nbrs[x]:
            if y not in seen:
                prefix.append(y)
                seen.add(y)
                extend(prefix, seen)
                seen.discard(y)
                prefix.pop()

    for s in range(n):
        extend([s], {s})
    return out


def is_reachable(state: NetworkState, policy: PathPolicy,
                 paths: Sequence[Path] | None = None) -> bool:
    """Every unordered pair of distinct nodes is joined by an available path."""
    n = state.n
    if policy.kind == "shortest" and paths is None:
        nbrs = _neighbors(state)
        reach = [set(_shortest_from(nbrs, s, policy)[0]) for s in range(n)]
        # a pair counts as joined if either direction has a path
        return all(v in reach[u] or u in reach[v] for u in range(n) for v in range(u + 1, n))
    if paths is None:
        paths = enumerate_paths(state, policy)
    joined = {frozenset(p.endpoints) for p in paths}
    return len(joined) == n * (n - 1) // 2


def trace_span(trace: Trace, path: Path) -> tuple[int, int]:
    """(first tail, last head) of ``trace`` along ``path``."""
    pos = {e: i for i, e in enumerate(path.edges)}
    idx = sorted(pos[e] for e in trace)
    return path[idx[0]], path[idx[-1] + 1]


def trace_sources(trace: Trace, paths: Iterable[Path]) -> set[tuple[int, int]]:
    """All (x, y) such that ``trace`` is a path trace from x to y: x is a tail and
    y a head of some trace edge, and an available x-to-y path contains the trace."""
    if not trace:
        raise ContractViolation("the empty trace has no endpoints")
    tails = {u for u, _ in trace}
    heads = {v for _, v in trace}
    out = set()
    for p in paths:
        if p[0] in tails and p[-1] in heads and trace <= set(p.edges):
            out.add((p[0], p[-1]))
    return out


def trace_endpoints(trace: Trace, paths: Sequence[Path]) -> tuple[int, int]:
    """The unique (source, destination) of a trace under shortest-path routing."""
    found = trace_sources(frozenset(trace), paths)
    if not found:
        raise InvalidTraceError(f"trace {sorted(trace)} is not a path trace of any available path")
    if len(found) > 1:
        raise InvalidTraceError(f"trace {sorted(trace)} has ambiguous endpoints {sorted(found)}")
    return next(iter(found))


def user_server_closure_violations(paths: Sequence[Path], user_servers: dict[int, tuple[int, ...]]
                                   ) -> list[str]:
    """Check the closure a user-server analysis needs: stripping a user's access
    hop, or prepending/appending one for a server endpoint, stays in the path set."""
    available = set(paths)
    users_of: dict[int, list[int]] = {}
    for u, ss in user_servers.items():
        for s in ss:
            users_of.setdefault(s, []).append(u)
    bad = []
    for p in paths:
        x, y = p.endpoints
        if x in user_servers:
            if p.hops > 1 and Path(p[1:]) not in available:
                bad.append(f"{p!r}: dropping the source access hop leaves the path set")
        else:
            for v in users_of.get(x, ()):
                if v not in p and Path((v,) + tuple(p)) not in available:
                    bad.append(f"{p!r}: extending back to user {v} leaves the path set")
        if y in user_servers:
            if p.hops > 1 and Path(p[:-1]) not in available:
                bad.append(f"{p!r}: dropping the destination access hop leaves the path set")
        else:
            for v in users_of.get(y, ()):
                if v not in p and Path(tuple(p) + (v,)) not in available:
                    bad.append(f"{p!r}: extending forward to user {v} leaves the path set")
    return bad


def endpoint_pairs(paths: Iterable[Path]) -> set[Edge]:
    return {p.endpoints for p in paths}
