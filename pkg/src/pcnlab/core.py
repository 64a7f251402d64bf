"""PCN state machine: channels, routing over public balances, noisy execution."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from random import Random
from typing import Iterable, NamedTuple, Protocol, Sequence

from .errors import ContractViolation

Edge = tuple[int, int]
Trace = frozenset  # frozenset[Edge]; the oriented edges whose public balance was refreshed

EMPTY_TRACE: Trace = frozenset()


@dataclass(slots=True)
class ChannelState:
    """One channel. Balances are stored from ``endpoint_u``'s side; the reverse
    direction is always ``capacity`` minus the stored value."""

    endpoint_u: int
    endpoint_v: int
    capacity: int
    true_balance_uv: int
    public_balance_uv: int

    def __post_init__(self):
        if self.endpoint_u == self.endpoint_v:
            raise ContractViolation(f"self-loop on node {self.endpoint_u}")
        if self.capacity < 0:
            raise ContractViolation(f"negative capacity {self.capacity}")
        if not 0 <= self.true_balance_uv <= self.capacity:
            raise ContractViolation(f"true balance {self.true_balance_uv} outside [0, {self.capacity}]")
        if not 0 <= self.public_balance_uv <= self.capacity:
            raise ContractViolation(f"public balance {self.public_balance_uv} outside [0, {self.capacity}]")

    @property
    def key(self) -> Edge:
        return (self.endpoint_u, self.endpoint_v)

    def true_balance(self, src: int) -> int:
        if src == self.endpoint_u:
            return self.true_balance_uv
        return self.capacity - self.true_balance_uv

    def public_balance(self, src: int) -> int:
        if src == self.endpoint_u:
            return self.public_balance_uv
        return self.capacity - self.public_balance_uv

    def reveal(self) -> None:
        self.public_balance_uv = self.true_balance_uv

    def reset_public_even(self) -> None:
        self.public_balance_uv = self.capacity // 2

    @property
    def truthful(self) -> bool:
        return self.public_balance_uv == self.true_balance_uv

    def copy(self) -> ChannelState:
        return ChannelState(self.endpoint_u, self.endpoint_v, self.capacity,
                            self.true_balance_uv, self.public_balance_uv)


class Transaction(NamedTuple):
    sender: int
    receiver: int
    amount: int
    index: int
    auxiliary: bool = False  # zero-valued instrumentation transaction


class Path(tuple):
    """A simple directed path stored as its node sequence."""

    __slots__ = ()

    def __new__(cls, nodes: Iterable[int]):
        self = super().__new__(cls, nodes)
        if len(self) < 2:
            raise ContractViolation("a path needs at least one edge")
        if len(set(self)) != len(self):
            raise ContractViolation(f"path {tuple(self)} repeats a node")
        return self

    @classmethod
    def from_edges(cls, edges: Sequence[Edge]) -> Path:
        if not edges:
            raise ContractViolation("a path needs at least one edge")
        nodes = [edges[0][0]]
        for u, v in edges:
            if u != nodes[-1]:
                raise ContractViolation(f"edge {(u, v)} does not continue the path at {nodes[-1]}")
            nodes.append(v)
        return cls(nodes)

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(self)

    @property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(zip(self, self[1:]))

    @property
    def source(self) -> int:
        return self[0]

    @property
    def destination(self) -> int:
        return self[-1]

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self[0], self[-1])

    @property
    def hops(self) -> int:
        return len(self) - 1

    def __repr__(self) -> str:
        return "Path(" + "->".join(map(str, tuple.__iter__(self))) + ")"


class TraceSampler(Protocol):
    def sample(self, path: Path, rng: Random) -> Trace: ...


@dataclass
class NetworkState:
    n: int
    channels: dict[Edge, ChannelState] = field(default_factory=dict)
    names: list[str] | None = None
    path_policy: object | None = None

    def __post_init__(self):
        chans = list(self.channels.values())
        self.channels = {}
        self.adj: list[list[tuple[int, ChannelState]]] = [[] for _ in range(self.n)]
        for ch in chans:
            self.add_channel(ch)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge], capacity: int = 2, **kw) -> NetworkState:
        """Channels with an even balance split; handy for small hand-built graphs."""
        state = cls(n, **kw)
        for u, v in edges:
            state.add_channel(ChannelState(u, v, capacity, capacity // 2, capacity // 2))
        return state

    def add_channel(self, ch: ChannelState) -> None:
        u, v = ch.endpoint_u, ch.endpoint_v
        for x in (u, v):
            if not 0 <= x < self.n:
                raise ContractViolation(f"node {x} out of range 0..{self.n - 1}")
        if u > v:
            ch = ChannelState(v, u, ch.capacity, ch.capacity - ch.true_balance_uv,
                              ch.capacity - ch.public_balance_uv)
            u, v = v, u
        if (u, v) in self.channels:
            raise ContractViolation(f"duplicate channel {(u, v)}")
        self.channels[(u, v)] = ch
        self.adj[u].append((v, ch))
        self.adj[v].append((u, ch))

    def channel(self, u: int, v: int) -> ChannelState:
        try:
            return self.channels[(u, v) if u < v else (v, u)]
        except KeyError:
            raise ContractViolation(f"no channel between {u} and {v}") from None

    def has_channel(self, u: int, v: int) -> bool:
        return ((u, v) if u < v else (v, u)) in self.channels

    def neighbors(self, u: int) -> list[int]:
        return [v for v, _ in self.adj[u]]

    def degree(self, u: int) -> int:
        return len(self.adj[u])

    def oriented_edges(self) -> list[Edge]:
        out = []
        for u, v in self.channels:
            out.append((u, v))
            out.append((v, u))
        return out

    def copy(self) -> NetworkState:
        return NetworkState(self.n, {k: ch.copy() for k, ch in self.channels.items()},
                            names=None if self.names is None else list(self.names),
                            path_policy=self.path_policy)

    def balances(self) -> dict[Edge, tuple[int, int, int]]:
        return {k: (ch.capacity, ch.true_balance_uv, ch.public_balance_uv)
                for k, ch in self.channels.items()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, NetworkState):
            return NotImplemented
        return (self.n == other.n and self.balances() == other.balances()
                and self.names == other.names)

    def label(self, u: int) -> str:
        return self.names[u] if self.names is not None else str(u)


class OutcomeKind(enum.Enum):
    SUCCEEDED = "succeeded"
    FAILED_TRUE_BALANCE = "failed_true_balance"
    FAILED_NO_ROUTE = "failed_no_route"


class Outcome(NamedTuple):
    kind: OutcomeKind
    path: Path | None = None
    trace: Trace | None = None

    @property
    def succeeded(self) -> bool:
        return self.kind is OutcomeKind.SUCCEEDED


def shortest_route(adj: list[list[tuple[int, ChannelState]]], s: int, d: int, amount: int,
                   rng: Random, sender_knows_adjacent: bool = False
                   ) -> tuple[list[int], list[ChannelState]] | None:
    """Breadth-first search over admissible oriented edges; returns the node list
    and the channels along one shortest path drawn uniformly at random."""
    for y, ch in adj[s]:
        if y == d:
            # a direct channel is the unique one-hop path; if it is not
            # admissible the search below skips it as well
            if s == ch.endpoint_u:
                bal = ch.true_balance_uv if sender_knows_adjacent else ch.public_balance_uv
            else:
                bal = ch.capacity - (ch.true_balance_uv if sender_knows_adjacent
                                     else ch.public_balance_uv)
            if bal >= amount:
                return [s, d], [ch]
            break
    sigma = {s: 1}  # number of shortest admissible paths reaching each node
    preds: dict[int, list[tuple[int, ChannelState]]] = {}
    frontier = [s]
    while frontier and d not in sigma:
        level: dict[int, list[tuple[int, ChannelState]]] = {}
        for x in frontier:
            use_true = sender_knows_adjacent and x == s
            for y, ch in adj[x]:
                if y in sigma:
                    continue
                if x == ch.endpoint_u:
                    bal = ch.true_balance_uv if use_true else ch.public_balance_uv
                else:
                    bal = ch.capacity - (ch.true_balance_uv if use_true else ch.public_balance_uv)
                if bal < amount:
                    continue
                p = level.get(y)
                if p is None:
                    level[y] = [(x, ch)]
                else:
                    p.append((x, ch))
        for y, ps in level.items():
            sigma[y] = sum(sigma[p] for p, _ in ps) if len(ps) > 1 else sigma[ps[0][0]]
            preds[y] = ps
        frontier = list(level)
    if d not in sigma:
        return None
    nodes = [d]
    chans = []
    v = d
    while v != s:
        ps = preds[v]
        if len(ps) == 1:
            v, ch = ps[0]
        else:
            # predecessor p is taken with probability sigma[p] / sigma[v]
            r = rng.random() * sigma[v]
            acc = 0
            for v, ch in ps:
                acc += sigma[v]
                if r < acc:
                    break
        nodes.append(v)
        chans.append(ch)
    nodes.reverse()
    chans.reverse()
    return nodes, chans


def find_route(state: NetworkState, tx: Transaction, rng: Random,
               sender_knows_adjacent: bool = False) -> Path | None:
    """Uniformly random hop-count-shortest path over edges whose public balance
    covers ``tx.amount``.

    With ``sender_knows_adjacent`` the sender judges its own outgoing channels by
    their true balance instead of the public one.
    """
    if tx.sender == tx.receiver:
        raise ContractViolation("sender equals receiver")
    found = shortest_route(state.adj, tx.sender, tx.receiver, tx.amount, rng,
                           sender_knows_adjacent)
    return None if found is None else Path(found[0])


def _path_channels(state: NetworkState, tx: Transaction, path: Path) -> list[ChannelState]:
    if path.source != tx.sender or path.destination != tx.receiver:
        raise ContractViolation(f"{path!r} does not connect {tx.sender} to {tx.receiver}")
    return [state.channel(u, v) for u, v in path.edges]


def execute(state: NetworkState, tx: Transaction, path: Path, mechanism: TraceSampler,
            rng: Random) -> Outcome:
    """Apply ``tx`` along ``path``; on success refresh the public balances of a
    trace drawn from ``mechanism``. Failures leave the state untouched."""
    chans = _path_channels(state, tx, path)
    amount = tx.amount
    srcs = tuple.__getitem__(path, slice(None, -1))
    for src, ch in zip(srcs, chans):
        if ch.true_balance(src) < amount:
            return Outcome(OutcomeKind.FAILED_TRUE_BALANCE, path)
    for src, ch in zip(srcs, chans):
        if src == ch.endpoint_u:
            ch.true_balance_uv -= amount
        else:
            ch.true_balance_uv += amount
    trace = mechanism.sample(path, rng)
    if trace:
        for u, v in trace:
            state.channel(u, v).reveal()
    return Outcome(OutcomeKind.SUCCEEDED, path, trace)


def route_and_execute(state: NetworkState, tx: Transaction, mechanism: TraceSampler, rng: Random,
                      sender_knows_adjacent: bool = False) -> Outcome:
    path = find_route(state, tx, rng, sender_knows_adjacent)
    if path is None:
        return Outcome(OutcomeKind.FAILED_NO_ROUTE)
    return execute(state, tx, path, mechanism, rng)


def snapshot_truthfulness(state: NetworkState) -> dict[Edge, bool]:
    out = {}
    for (u, v), ch in state.channels.items():
        out[(u, v)] = out[(v, u)] = ch.truthful
    return out
