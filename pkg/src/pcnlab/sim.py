"""Sequential transaction simulation, deadlock detection, the two deadlock
alleviation heuristics and replicated runs."""

from __future__ import annotations

import dataclasses
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from random import Random
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import (ChannelState, Edge, NetworkState, Outcome, OutcomeKind, Path, Transaction,
                   TraceSampler, shortest_route)
from .errors import ContractViolation
from .mechanisms import NoiseMechanism
from .topology import TopologySpec, generate
from .workload import WorkloadSpec, iter_workload, min_value


@dataclass(frozen=True)
class PeriodicRebalance:
    period: int

    def __post_init__(self):
        if self.period < 1:
            raise ContractViolation("rebalance period must be >= 1")


@dataclass(frozen=True)
class ZeroTxRefresh:
    pass


Heuristic = PeriodicRebalance | ZeroTxRefresh | None


@dataclass
class SimOptions:
    mechanism: TraceSampler
    window: int = 2000
    min_value: int | None = None           # deadlock threshold; None -> 1 (or the workload minimum in replicate)
    heuristic: Heuristic = None
    record_truthfulness: bool = False
    sender_knows_adjacent: bool = True
    checkpoint_every: int | None = None    # default: window // 2
    scatter_at: tuple[int, ...] = ()       # regular-transaction counts at which to dump channel balances
    record_outcomes: bool = False

    def __post_init__(self):
        if self.window < 1:
            raise ContractViolation("window must be >= 1")
        if self.min_value is not None and self.min_value < 1:
            raise ContractViolation("min_value must be >= 1")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ContractViolation("checkpoint_every must be >= 1")

    @property
    def every(self) -> int:
        return self.checkpoint_every or max(1, self.window // 2)


class Checkpoint(NamedTuple):
    t: int                  # regular transactions processed so far
    success_rate: float     # cumulative
    windowed_success_rate: float
    deadlocks: int


class ScatterPoint(NamedTuple):
    t: int
    u: int
    v: int
    true_uv: int
    public_uv: int


@dataclass
class SimMetrics:
    total: int = 0
    successes: int = 0
    failed_no_route: int = 0
    failed_true_balance: int = 0
    auxiliary: int = 0
    checkpoints: list[Checkpoint] = field(default_factory=list)
    # oriented edge -> [truthful observations, observations]
    truthfulness: dict[Edge, list[int]] = field(default_factory=dict)
    outcome_log: list[OutcomeKind] | None = None
    scatter: list[ScatterPoint] = field(default_factory=list)
    channels: int = 0

    @property
    def success_rate(self) -> float:
        return self.successes / self.total if self.total else 0.0

    @property
    def windowed_success_rate(self) -> list[float]:
        return [c.windowed_success_rate for c in self.checkpoints]

    @property
    def deadlock_count(self) -> list[int]:
        return [c.deadlocks for c in self.checkpoints]

    @property
    def final_deadlocks(self) -> int:
        return self.checkpoints[-1].deadlocks if self.checkpoints else 0

    def truthful_frequency(self) -> dict[Edge, float]:
        return {e: c[0] / c[1] for e, c in self.truthfulness.items() if c[1]}


def detect_deadlock(channel: ChannelState, min_value: int) -> bool:
    """Neither direction can be both chosen by routing and succeed."""
    if min_value < 1:
        raise ContractViolation("min_value must be >= 1")
    c = channel.capacity
    b, p = channel.true_balance_uv, channel.public_balance_uv
    return min(b, p) < min_value and min(c - b, c - p) < min_value


def count_deadlocks(state: NetworkState, min_value: int) -> int:
    return sum(detect_deadlock(ch, min_value) for ch in state.channels.values())


def apply_periodic_rebalance(state: NetworkState, min_value: int, rng: Random) -> int:
    """Each deadlocked channel resets its public balance to an even split with
    probability 1/2. Returns the number of channels reset."""
    reset = 0
    for ch in state.channels.values():
        if detect_deadlock(ch, min_value) and rng.random() < 0.5:
            ch.reset_public_even()
            reset += 1
    return reset


def apply_zero_tx_refresh(state: NetworkState, zero_tx: Transaction, mechanism: TraceSampler,
                          rng: Random, sender_knows_adjacent: bool = False) -> Outcome:
    """Route a zero-valued transaction; path edges in the sampled trace become
    truthful, the other path edges fall back to an even public split."""
    if zero_tx.amount != 0:
        raise ContractViolation("zero-transaction refresh needs amount 0")
    found = shortest_route(state.adj, zero_tx.sender, zero_tx.receiver, 0, rng,
                           sender_knows_adjacent)
    if found is None:
        return Outcome(OutcomeKind.FAILED_NO_ROUTE)
    nodes, chans = found
    path = Path(nodes)
    trace = mechanism.sample(path, rng)
    for (u, v), ch in zip(path.edges, chans):
        if (u, v) in trace:
            ch.reveal()
        else:
            ch.reset_public_even()
    return Outcome(OutcomeKind.SUCCEEDED, path, trace)


def _fully_deadlocked(state: NetworkState, ell: int) -> bool:
    return all(detect_deadlock(ch, ell) for ch in state.channels.values())


def run(network: NetworkState, workload: Iterable[Transaction], options: SimOptions,
        rng: Random) -> SimMetrics:
    """Process ``workload`` in order on ``network`` (mutated in place)."""
    ell = options.min_value or 1
    mech = options.mechanism
    select = mech.select if isinstance(mech, NoiseMechanism) else None
    heuristic = options.heuristic
    period = heuristic.period if isinstance(heuristic, PeriodicRebalance) else 0
    zero_refresh = isinstance(heuristic, ZeroTxRefresh)
    knows = options.sender_knows_adjacent
    adj = network.adj
    every = options.every
    scatter_at = set(options.scatter_at)
    window = options.window

    m = SimMetrics(channels=len(network.channels))
    if options.record_outcomes:
        m.outcome_log = []
    truth = m.truthfulness if options.record_truthfulness else None
    recent = [False] * window  # ring buffer of the last ``window`` outcomes
    recent_ok = 0
    counts = {k: 0 for k in OutcomeKind}
    total = 0
    processed = 0  # all transactions, including zero-valued ones
    log = m.outcome_log
    SUCCEEDED = OutcomeKind.SUCCEEDED
    # once every channel is deadlocked and nothing can unlock one, every later
    # transaction fails and leaves the state untouched
    can_freeze = heuristic is None and not knows and truth is None
    frozen = False
    frozen_cache: dict[tuple[int, int, int], OutcomeKind] = {}

    def checkpoint(t: int) -> None:
        filled = min(t, window)
        m.checkpoints.append(Checkpoint(
            t, counts[SUCCEEDED] / t if t else 0.0,
            recent_ok / filled if filled else 0.0,
            count_deadlocks(network, ell)))

    for tx in workload:
        processed += 1
        if tx.auxiliary:
            m.auxiliary += 1
            frozen = False
            if zero_refresh:
                apply_zero_tx_refresh(network, tx, mech, rng, knows)
            else:
                _step(adj, tx, mech, select, rng, knows, None)
        else:
            if frozen:
                # nothing can succeed; replay the routing only when it would draw randomness
                key = (tx.sender, tx.receiver, tx.amount)
                kind = frozen_cache.get(key)
                if kind is None:
                    if tx.amount < ell:
                        frozen = False
                        kind = _step(adj, tx, mech, select, rng, knows, truth)
                    else:
                        before = rng.getstate()
                        kind = _step(adj, tx, mech, select, rng, knows, truth)
                        if rng.getstate() == before:
                            frozen_cache[key] = kind
            else:
                kind = _step(adj, tx, mech, select, rng, knows, truth)
            counts[kind] += 1
            ok = kind is SUCCEEDED
            if log is not None:
                log.append(kind)
            slot = total % window
            recent_ok += ok - recent[slot]
            recent[slot] = ok
            total += 1
            if total % every == 0:
                checkpoint(total)
                if can_freeze and not frozen and _fully_deadlocked(network, ell):
                    frozen = True
            if total in scatter_at:
                for (u, v), ch in network.channels.items():
                    m.scatter.append(ScatterPoint(total, u, v, ch.true_balance_uv, ch.public_balance_uv))
        if period and processed % period == 0:
            apply_periodic_rebalance(network, ell, rng)
    m.total = total
    m.successes = counts[SUCCEEDED]
    m.failed_no_route = counts[OutcomeKind.FAILED_NO_ROUTE]
    m.failed_true_balance = counts[OutcomeKind.FAILED_TRUE_BALANCE]
    if not m.checkpoints or m.checkpoints[-1].t != total:
        checkpoint(total)
    return m


def _step(adj, tx: Transaction, mech, select, rng: Random, knows: bool, truth) -> OutcomeKind:
    """find_route + execute without building intermediate objects; consumes the
    random stream exactly as the public functions do."""
    s, d, amount = tx.sender, tx.receiver, tx.amount
    found = shortest_route(adj, s, d, amount, rng, knows)
    if found is None:
        return OutcomeKind.FAILED_NO_ROUTE
    nodes, chans = found
    for x, ch in zip(nodes, chans):
        bal = ch.true_balance_uv if x == ch.endpoint_u else ch.capacity - ch.true_balance_uv
        if bal < amount:
            return OutcomeKind.FAILED_TRUE_BALANCE
    for x, ch in zip(nodes, chans):
        if x == ch.endpoint_u:
            ch.true_balance_uv -= amount
        else:
            ch.true_balance_uv += amount
    if select is not None:
        for i in select(len(chans), rng):
            ch = chans[i]
            ch.public_balance_uv = ch.true_balance_uv
    else:
        path = Path(nodes)
        trace = mech.sample(path, rng)
        for (u, v), ch in zip(path.edges, chans):
            if (u, v) in trace:
                ch.public_balance_uv = ch.true_balance_uv
    if truth is not None:
        for x, y, ch in zip(nodes, nodes[1:], chans):
            c = truth.get((x, y))
            if c is None:
                c = truth[(x, y)] = [0, 0]
            c[0] += ch.public_balance_uv == ch.true_balance_uv
            c[1] += 1
    return OutcomeKind.SUCCEEDED


# ------------------------------------------------------------------ replicas

@dataclass(frozen=True)
class Stat:
    mean: float
    sd: float
    se: float
    k: int


def summarize(values: Sequence[float]) -> Stat:
    k = len(values)
    if k == 0:
        raise ContractViolation("no replicas to summarise")
    mean = math.fsum(values) / k
    sd = statistics.stdev(values) if k > 1 else 0.0
    return Stat(mean, sd, sd / math.sqrt(k), k)


@dataclass
class ReplicaStats:
    k: int
    metrics: dict[str, Stat]
    runs: list[SimMetrics]

    def __getitem__(self, name: str) -> Stat:
        return self.metrics[name]


REPLICA_METRICS = ("success_rate", "windowed_success_rate", "deadlocks", "deadlocked")


def replica_rngs(seed: int, k: int) -> list[tuple[Random, Random, Random]]:
    """Independent (topology, workload, simulation) generators per replica."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(k):
        streams = child.spawn(3)
        out.append(tuple(Random(int.from_bytes(s.generate_state(4).tobytes(), "little"))
                         for s in streams))
    return out


def _one_replica(args) -> SimMetrics:
    network, workload_spec, options, rngs = args
    topo_rng, work_rng, sim_rng = rngs
    state = generate(network, topo_rng) if isinstance(network, TopologySpec) else network.copy()
    txs = iter_workload(workload_spec, range(state.n), work_rng)
    return run(state, txs, options, sim_rng)


def replicate(network: TopologySpec | NetworkState, workload_spec: WorkloadSpec,
              options: SimOptions, k: int, seed: int, jobs: int = 1) -> ReplicaStats:
    """k independent replicas; random topologies are regenerated per replica."""
    if k < 1:
        raise ContractViolation("need at least one replica")
    if options.min_value is None:
        options = dataclasses.replace(options, min_value=min_value(workload_spec))
    tasks = [(network, workload_spec, options, r) for r in replica_rngs(seed, k)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_one_replica, tasks))
    else:
        runs = [_one_replica(t) for t in tasks]
    metrics = {
        "success_rate": summarize([r.success_rate for r in runs]),
        "windowed_success_rate": summarize([r.checkpoints[-1].windowed_success_rate for r in runs]),
        "deadlocks": summarize([float(r.final_deadlocks) for r in runs]),
        "deadlocked": summarize([float(r.final_deadlocks > 0) for r in runs]),
    }
    return ReplicaStats(k, metrics, runs)
