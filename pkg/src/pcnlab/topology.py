"""Graph construction: synthetic generators, the user-server builder, snapshot
CSV I/O, snowball sampling and balance initialisation."""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass, field
from random import Random
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, TypeAdapter, model_validator

from .core import ChannelState, Edge, NetworkState
from .errors import ContractViolation, SnapshotParseError

SNAPSHOT_HEADER = ["node_a", "node_b", "capacity", "balance_ab"]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ErdosRenyi(StrictModel):
    kind: Literal["erdos_renyi"] = "erdos_renyi"
    n: PositiveInt
    p: float = Field(ge=0.0, le=1.0)


class BarabasiAlbert(StrictModel):
    kind: Literal["barabasi_albert"] = "barabasi_albert"
    init: GraphSpec
    added: int = Field(ge=0)
    m: PositiveInt


class Clique(StrictModel):
    kind: Literal["clique"] = "clique"
    n: PositiveInt


class PathGraph(StrictModel):
    kind: Literal["path"] = "path"
    n: PositiveInt


class Cycle(StrictModel):
    kind: Literal["cycle"] = "cycle"
    n: int = Field(ge=3)


class Grid(StrictModel):
    kind: Literal["grid"] = "grid"
    width: PositiveInt
    height: PositiveInt


class Tree(StrictModel):
    kind: Literal["tree"] = "tree"
    branching: PositiveInt
    depth: int = Field(ge=0)


class UserServer(StrictModel):
    kind: Literal["user_server"] = "user_server"
    servers: GraphSpec
    users: PositiveInt
    attach: Literal["single", "multi"] = "single"
    k_min: PositiveInt = 1
    k_max: PositiveInt = 4
    min_users_per_server: int = Field(default=1, ge=0)

    @model_validator(mode="after")
    def _k_range(self):
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        return self


class LndLike(StrictModel):
    kind: Literal["lnd_like"] = "lnd_like"
    core: GraphSpec
    # number of low-degree nodes with degree 1, 2, 3 and 4
    low_degree_counts: tuple[int, int, int, int]

    @model_validator(mode="after")
    def _counts(self):
        if any(c < 0 for c in self.low_degree_counts):
            raise ValueError("low_degree_counts must be non-negative")
        return self


class Snapshot(StrictModel):
    kind: Literal["snapshot"] = "snapshot"
    path: str


class Snowball(StrictModel):
    kind: Literal["snowball"] = "snowball"
    source: GraphSpec
    target_n: int = Field(ge=2)


GraphSpec = Annotated[
    Union[ErdosRenyi, BarabasiAlbert, Clique, PathGraph, Cycle, Grid, Tree, UserServer,
          LndLike, Snapshot, Snowball],
    Field(discriminator="kind"),
]

for _model in (BarabasiAlbert, UserServer, LndLike, Snowball):
    _model.model_rebuild()


class TopologySpec(StrictModel):
    graph: GraphSpec
    capacity: PositiveInt | None = None
    balance_init: Literal["even", "uniform", "snapshot"] = "even"

    @model_validator(mode="after")
    def _capacity(self):
        if self.capacity is None and not _is_snapshot_based(self.graph):
            raise ValueError("capacity is required unless the graph comes from a snapshot")
        if self.balance_init == "snapshot" and not _is_snapshot_based(self.graph):
            raise ValueError("balance_init 'snapshot' needs a snapshot graph")
        return self

    @property
    def is_random(self) -> bool:
        return _is_random(self.graph) or self.balance_init == "uniform"


def _is_snapshot_based(g) -> bool:
    if isinstance(g, Snapshot):
        return True
    return isinstance(g, Snowball) and _is_snapshot_based(g.source)


def _is_random(g) -> bool:
    if isinstance(g, (ErdosRenyi, BarabasiAlbert, UserServer, LndLike, Snowball)):
        return True
    return False


@dataclass
class UserServerSpec:
    server_count: int
    user_count: int
    min_users_per_server: int  # mu
    multi_homed: bool
    servers: list[int] = field(default_factory=list)
    user_servers: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def users_of(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {s: [] for s in self.servers}
        for u, ss in self.user_servers.items():
            for s in ss:
                out[s].append(u)
        return out


# ---------------------------------------------------------------- raw graphs

@dataclass
class _RawGraph:
    n: int
    edges: list[Edge]
    names: list[str] | None = None
    # per-edge (capacity, balance_ab or None) when the graph comes from a file
    amounts: dict[Edge, tuple[int, int | None]] | None = None


def _clique(n: int) -> list[Edge]:
    return [(u, v) for u in range(n) for v in range(u + 1, n)]


def erdos_renyi_edges(n: int, p: float, rng: Random) -> list[Edge]:
    rand = rng.random
    return [(u, v) for u in range(n) for v in range(u + 1, n) if rand() < p]


def barabasi_albert_edges(n0: int, edges0: list[Edge], added: int, m: int,
                          rng: Random) -> tuple[int, list[Edge]]:
    """Grow ``added`` nodes onto an initial graph; each newcomer links to ``m``
    distinct existing nodes drawn with probability proportional to degree."""
    edges = list(edges0)
    pool = [x for e in edges for x in e]  # node repeated once per incident edge
    if added and len(set(pool)) < m:
        raise ContractViolation(f"initial graph has fewer than m={m} nodes with positive degree")
    n = n0
    for _ in range(added):
        targets: list[int] = []
        chosen = set()
        while len(targets) < m:
            t = pool[int(rng.random() * len(pool))]
            if t not in chosen:
                chosen.add(t)
                targets.append(t)
        for t in targets:
            edges.append((t, n))
            pool.extend((t, n))
        n += 1
    return n, edges


def _raw(spec, rng: Random) -> _RawGraph:
    if isinstance(spec, ErdosRenyi):
        return _RawGraph(spec.n, erdos_renyi_edges(spec.n, spec.p, rng))
    if isinstance(spec, Clique):
        return _RawGraph(spec.n, _clique(spec.n))
    if isinstance(spec, PathGraph):
        return _RawGraph(spec.n, [(i, i + 1) for i in range(spec.n - 1)])
    if isinstance(spec, Cycle):
        return _RawGraph(spec.n, [(i, (i + 1) % spec.n) for i in range(spec.n)])
    if isinstance(spec, Grid):
        w, h = spec.width, spec.height
        edges = []
        for r in range(h):
            for c in range(w):
                x = r * w + c
                if c + 1 < w:
                    edges.append((x, x + 1))
                if r + 1 < h:
                    edges.append((x, x + w))
        return _RawGraph(w * h, edges)
    if isinstance(spec, Tree):
        edges = []
        level = [0]
        n = 1
        for _ in range(spec.depth):
            nxt = []
            for parent in level:
                for _ in range(spec.branching):
                    edges.append((parent, n))
                    nxt.append(n)
                    n += 1
            level = nxt
        return _RawGraph(n, edges)
    if isinstance(spec, BarabasiAlbert):
        init = _raw(spec.init, rng)
        n, edges = barabasi_albert_edges(init.n, init.edges, spec.added, spec.m, rng)
        return _RawGraph(n, edges)
    if isinstance(spec, UserServer):
        servers = _raw(spec.servers, rng)
        n, edges, _ = _attach_users(servers.n, servers.edges, spec, rng)
        return _RawGraph(n, edges)
    if isinstance(spec, LndLike):
        core = _raw(spec.core, rng)
        return _RawGraph(*_lnd_like(core.n, core.edges, spec.low_degree_counts, rng))
    if isinstance(spec, Snapshot):
        return _read_snapshot(spec.path)
    if isinstance(spec, Snowball):
        src = _raw(spec.source, rng)
        keep = _snowball_nodes(src.n, src.edges, spec.target_n, rng)
        return _induced(src, keep)
    raise ContractViolation(f"unsupported graph spec {spec!r}")


def _attach_users(n_servers: int, server_edges: list[Edge], spec: UserServer, rng: Random):
    deg = Counter(x for e in server_edges for x in e)
    servers = list(range(n_servers))
    weights = [deg[s] for s in servers]
    if sum(weights) == 0:
        weights = [1] * n_servers
    cum = []
    acc = 0
    for w in weights:
        acc += w
        cum.append(acc)
    need = spec.min_users_per_server * n_servers
    if spec.users < need:
        raise ContractViolation(
            f"{spec.users} users cannot give {n_servers} servers {spec.min_users_per_server} users each")
    edges = list(server_edges)
    user_servers: dict[int, tuple[int, ...]] = {}
    u = n_servers
    for i in range(spec.users):
        if i < need:
            # seed every server with its guaranteed users first
            homes = [i % n_servers]
            if spec.attach == "multi":
                k = min(rng.randint(spec.k_min, spec.k_max), n_servers)
                homes += _weighted_distinct(servers, cum, k - 1, rng, exclude=set(homes))
        else:
            k = 1 if spec.attach == "single" else min(rng.randint(spec.k_min, spec.k_max), n_servers)
            homes = _weighted_distinct(servers, cum, k, rng)
        for s in homes:
            edges.append((s, u))
        user_servers[u] = tuple(homes)
        u += 1
    return u, edges, user_servers


def _weighted_distinct(items: list[int], cum: list[int], k: int, rng: Random,
                       exclude: set[int] | None = None) -> list[int]:
    chosen = set(exclude or ())
    available = len(items) - len(chosen)
    k = min(k, available)
    out: list[int] = []
    total = cum[-1]
    while len(out) < k:
        x = rng.random() * total
        lo, hi = 0, len(cum) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cum[mid] > x:
                hi = mid
            else:
                lo = mid + 1
        item = items[lo]
        if item not in chosen:
            chosen.add(item)
            out.append(item)
    return out


def _lnd_like(n_core: int, core_edges: list[Edge], counts, rng: Random):
    deg = Counter(x for e in core_edges for x in e)
    low = [v for v in range(n_core) if deg[v] < 5]
    if low:
        raise ContractViolation(f"LND-like core must have minimum degree 5; node {low[0]} has {deg[low[0]]}")
    degrees = [d for d, c in zip((1, 2, 3, 4), counts) for _ in range(c)]
    rng.shuffle(degrees)
    core = list(range(n_core))
    edges = list(core_edges)
    n = n_core
    for d in degrees:
        for t in rng.sample(core, d):
            edges.append((t, n))
        n += 1
    return n, edges


def _snowball_nodes(n: int, edges: list[Edge], target: int, rng: Random) -> list[int]:
    if not 2 <= target <= n:
        raise ContractViolation(f"snowball target {target} outside [2, {n}]")
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seed = rng.randrange(n)
    seen = {seed}
    frontier = [seed]
    while frontier and len(seen) < target:
        rng.shuffle(frontier)
        nxt = []
        for x in frontier:
            nbrs = list(adj[x])
            rng.shuffle(nbrs)
            for y in nbrs:
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
                    if len(seen) == target:
                        break
            if len(seen) == target:
                break
        frontier = nxt
    if len(seen) < target:
        raise ContractViolation(
            f"snowball target {target} exceeds the size {len(seen)} of the seed's component")
    return sorted(seen)


def _induced(src: _RawGraph, keep: list[int]) -> _RawGraph:
    index = {old: new for new, old in enumerate(keep)}
    edges = []
    amounts = {} if src.amounts is not None else None
    for e in src.edges:
        u, v = e
        if u in index and v in index:
            ne = (index[u], index[v])
            edges.append(ne)
            if amounts is not None:
                amounts[ne] = src.amounts[e]
    names = None if src.names is None else [src.names[o] for o in keep]
    return _RawGraph(len(keep), edges, names, amounts)


def _initial_balance(capacity: int, mode: str, rng: Random) -> int:
    if mode == "uniform":
        return rng.randint(0, capacity)
    return capacity // 2


def _to_state(raw: _RawGraph, capacity: int | None, balance_init: str, rng: Random) -> NetworkState:
    state = NetworkState(raw.n, names=raw.names)
    for e in raw.edges:
        u, v = e
        if raw.amounts is not None:
            cap, bal = raw.amounts[e]
            if balance_init != "snapshot" or bal is None:
                bal = _initial_balance(cap, "uniform" if balance_init == "uniform" else "even", rng)
        else:
            cap = capacity
            bal = _initial_balance(cap, balance_init, rng)
        state.add_channel(ChannelState(u, v, cap, bal, bal))
    return state


def generate(spec: TopologySpec, rng: Random) -> NetworkState:
    """Build a network; public balances start equal to the true ones."""
    raw = _raw(spec.graph, rng)
    return _to_state(raw, spec.capacity, spec.balance_init, rng)


def build_user_server(server_spec, user_count: int, attach_rule: str = "single", rng: Random | None = None,
                      *, capacity: int = 1000, k_range: tuple[int, int] = (1, 4),
                      min_users_per_server: int = 1) -> tuple[NetworkState, UserServerSpec]:
    """Servers ``0..nS-1`` from ``server_spec``; users ``nS..`` attached with
    probability proportional to server degree (after each server receives
    ``min_users_per_server`` users)."""
    if user_count <= 0:
        raise ContractViolation("user_count must be positive")
    rng = rng or Random(0)
    if isinstance(server_spec, dict):
        server_spec = TypeAdapter(GraphSpec).validate_python(server_spec)
    spec = UserServer(servers=server_spec, users=user_count, attach=attach_rule,
                      k_min=k_range[0], k_max=k_range[1], min_users_per_server=min_users_per_server)
    servers = _raw(server_spec, rng)
    if not _connected(servers.n, servers.edges):
        raise ContractViolation("server graph must be connected")
    n, edges, user_servers = _attach_users(servers.n, servers.edges, spec, rng)
    state = _to_state(_RawGraph(n, edges), capacity, "even", rng)
    per_server = Counter(s for ss in user_servers.values() for s in ss)
    info = UserServerSpec(
        server_count=servers.n,
        user_count=user_count,
        min_users_per_server=min(per_server.get(s, 0) for s in range(servers.n)),
        multi_homed=attach_rule == "multi",
        servers=list(range(servers.n)),
        user_servers=user_servers,
    )
    return state, info


def _connected(n: int, edges: list[Edge]) -> bool:
    if n == 0:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == n


def is_connected(state: NetworkState) -> bool:
    return _connected(state.n, list(state.channels))


def degree_histogram(state: NetworkState) -> dict[int, int]:
    return dict(sorted(Counter(state.degree(u) for u in range(state.n)).items()))


def snowball_sample(state: NetworkState, target_n: int, rng: Random) -> NetworkState:
    """Breadth-first expansion from a random seed node until ``target_n`` nodes;
    keeps induced channels (balances included) and relabels by original id order."""
    raw = _RawGraph(state.n, list(state.channels), state.names,
                    {k: (ch.capacity, ch.true_balance_uv) for k, ch in state.channels.items()})
    keep = _snowball_nodes(state.n, raw.edges, target_n, rng)
    sub = _induced(raw, keep)
    out = NetworkState(sub.n, names=sub.names)
    index = {old: new for new, old in enumerate(keep)}
    for (u, v), ch in state.channels.items():
        if u in index and v in index:
            out.add_channel(ChannelState(index[u], index[v], ch.capacity,
                                         ch.true_balance_uv, ch.public_balance_uv))
    return out


# ----------------------------------------------------------------- snapshots

def _read_snapshot(path: str | os.PathLike) -> _RawGraph:
    with open(path, newline="") as fh:
        return parse_snapshot(fh.read())


def parse_snapshot(text: str) -> _RawGraph:
    ids: dict[str, int] = {}
    declared_n = None
    rows: list[tuple[int, str, str, int, int | None]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.startswith("n="):
                declared_n = int(body[2:])
            elif body.startswith("nodes:"):
                for name in body[len("nodes:"):].strip().split(","):
                    ids.setdefault(name, len(ids))
            continue
        cells = next(csv.reader([line]))
        cells = [c.strip() for c in cells]
        if cells[:3] == SNAPSHOT_HEADER[:3]:
            continue
        if len(cells) not in (3, 4):
            raise SnapshotParseError(lineno, f"expected 3 or 4 columns, got {len(cells)}")
        a, b = cells[0], cells[1]
        if not a or not b:
            raise SnapshotParseError(lineno, "empty node name")
        if a == b:
            raise SnapshotParseError(lineno, f"self-loop on {a!r}")
        try:
            cap = int(cells[2])
            bal = int(cells[3]) if len(cells) == 4 and cells[3] != "" else None
        except ValueError:
            raise SnapshotParseError(lineno, "capacity and balance must be integers") from None
        if cap < 0:
            raise SnapshotParseError(lineno, f"negative capacity {cap}")
        if bal is not None and not 0 <= bal <= cap:
            raise SnapshotParseError(lineno, f"balance {bal} outside [0, {cap}]")
        rows.append((lineno, a, b, cap, bal))
    names_numeric = not ids and all(r[1].isdigit() and r[2].isdigit() for r in rows)
    if names_numeric:
        n = max((max(int(r[1]), int(r[2])) for r in rows), default=-1) + 1
        if declared_n is not None:
            n = max(n, declared_n)
        names = None
    for _, a, b, _, _ in rows:
        if not names_numeric:
            ids.setdefault(a, len(ids))
            ids.setdefault(b, len(ids))
    if not names_numeric:
        n = len(ids)
        names = list(ids)
    edges: list[Edge] = []
    amounts: dict[Edge, tuple[int, int | None]] = {}
    seen: dict[Edge, int] = {}
    for lineno, a, b, cap, bal in rows:
        u, v = (int(a), int(b)) if names_numeric else (ids[a], ids[b])
        key = (min(u, v), max(u, v))
        if key in seen:
            raise SnapshotParseError(lineno, f"duplicate channel {a},{b} (first on line {seen[key]})")
        seen[key] = lineno
        edges.append((u, v))
        amounts[(u, v)] = (cap, bal)
    return _RawGraph(n, edges, names, amounts)


def load_snapshot(path: str | os.PathLike, balance_init: str = "snapshot",
                  rng: Random | None = None) -> NetworkState:
    raw = _read_snapshot(path)
    return _to_state(raw, None, balance_init, rng or Random(0))


def dump_snapshot(state: NetworkState) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SNAPSHOT_HEADER)
    if state.names is None:
        buf.write(f"# n={state.n}\n")
    else:
        buf.write("# nodes: " + ",".join(state.names) + "\n")
    for (u, v), ch in sorted(state.channels.items()):
        w.writerow([state.label(u), state.label(v), ch.capacity, ch.true_balance_uv])
    return buf.getvalue()


def save_snapshot(state: NetworkState, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dump_snapshot(state))
