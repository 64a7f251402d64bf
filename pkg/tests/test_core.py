from collections import Counter, deque
from random import Random

import pytest
from hypothesis import given, strategies as st

from pcnlab.core import (ChannelState, NetworkState, OutcomeKind, Path, Transaction, execute,
                         find_route, route_and_execute, snapshot_truthfulness)
from pcnlab.errors import ContractViolation
from pcnlab.mechanisms import NoiseMechanism

from strategies import networks

A, B, C, D, E = range(5)


class FixedTrace:
    """Mechanism that always reveals the given edge positions."""

    def __init__(self, positions):
        self.positions = positions

    def sample(self, path, rng):
        edges = path.edges
        return frozenset(edges[i] for i in self.positions if i < len(edges))


def fig1_network():
    s = NetworkState(5)
    s.add_channel(ChannelState(A, B, 6, 4, 4))
    s.add_channel(ChannelState(B, C, 10, 5, 5))
    s.add_channel(ChannelState(A, D, 10, 5, 5))
    s.add_channel(ChannelState(D, E, 10, 5, 5))
    s.add_channel(ChannelState(E, C, 10, 2, 2))  # E -> C holds only 2
    return s


# ------------------------------------------------------------------ examples

def test_fig1_route_avoids_thin_edge():
    s = fig1_network()
    path = find_route(s, Transaction(A, C, 3, 0), Random(0))
    assert tuple(path) == (A, B, C)


def test_fig1_route_for_small_amount_is_still_shortest():
    s = fig1_network()
    for seed in range(20):
        assert tuple(find_route(s, Transaction(A, C, 2, 0), Random(seed))) == (A, B, C)


def test_no_route_when_amount_exceeds_adjacent_public_balances():
    s = fig1_network()
    assert find_route(s, Transaction(A, C, 11, 0), Random(0)) is None


def test_four_cycle_tie_break_is_uniform():
    s = NetworkState.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], capacity=100)
    rng = Random(1)
    counts = Counter(tuple(find_route(s, Transaction(0, 2, 1, 0), rng)) for _ in range(10_000))
    assert set(counts) == {(0, 1, 2), (0, 3, 2)}
    assert abs(counts[(0, 1, 2)] / 10_000 - 0.5) <= 0.05


def test_execute_updates_alice_bob_as_in_intro():
    s = fig1_network()
    tx = Transaction(A, C, 3, 0)
    out = execute(s, tx, Path([A, B, C]), NoiseMechanism("aon", 1.0), Random(0))
    assert out.kind is OutcomeKind.SUCCEEDED
    ab = s.channel(A, B)
    assert ab.true_balance(A) == 1 and ab.true_balance(B) == 5
    assert ab.public_balance(A) == 1


def test_zero_amount_moves_no_tokens_but_refreshes_trace():
    s = fig1_network()
    s.channel(A, B).public_balance_uv = 0
    before = s.copy()
    out = execute(s, Transaction(A, C, 0, 0), Path([A, B, C]), FixedTrace([0]), Random(0))
    assert out.kind is OutcomeKind.SUCCEEDED
    for k, ch in s.channels.items():
        assert ch.true_balance_uv == before.channels[k].true_balance_uv
    assert s.channel(A, B).truthful


def test_true_balance_failure_leaves_state_identical():
    s = fig1_network()
    s.channel(B, C).true_balance_uv = 2  # B -> C can carry r - 1 = 2
    before = s.copy()
    out = execute(s, Transaction(A, C, 3, 0), Path([A, B, C]), NoiseMechanism("aon", 1.0), Random(0))
    assert out.kind is OutcomeKind.FAILED_TRUE_BALANCE
    assert s == before


def test_malformed_paths_are_rejected():
    s = fig1_network()
    with pytest.raises(ContractViolation):
        execute(s, Transaction(A, C, 1, 0), Path([A, B]), NoiseMechanism("aon", 1.0), Random(0))
    with pytest.raises(ContractViolation):
        execute(s, Transaction(A, E, 1, 0), Path([A, B, E]), NoiseMechanism("aon", 1.0), Random(0))
    with pytest.raises(ContractViolation):
        Path([A, B, A])
    with pytest.raises(ContractViolation):
        Path.from_edges([(A, B), (C, D)])


def test_channel_invariants_enforced():
    with pytest.raises(ContractViolation):
        ChannelState(0, 0, 5, 1, 1)
    with pytest.raises(ContractViolation):
        ChannelState(0, 1, 5, 6, 1)
    with pytest.raises(ContractViolation):
        ChannelState(0, 1, -1, 0, 0)
    s = NetworkState(3)
    s.add_channel(ChannelState(0, 1, 4, 1, 1))
    with pytest.raises(ContractViolation):
        s.add_channel(ChannelState(1, 0, 4, 1, 1))


def test_reversed_channel_is_stored_canonically():
    s = NetworkState(2)
    s.add_channel(ChannelState(1, 0, 10, 7, 3))
    ch = s.channel(0, 1)
    assert ch.true_balance(1) == 7 and ch.public_balance(1) == 3
    assert ch.true_balance(0) == 3


def test_truthfulness_snapshots():
    s = fig1_network()
    assert all(snapshot_truthfulness(s).values())
    execute(s, Transaction(A, C, 3, 0), Path([A, B, C]), FixedTrace([]), Random(0))
    snap = snapshot_truthfulness(s)
    assert not snap[(A, B)] and not snap[(B, C)]
    assert snap[(A, D)]
    s2 = fig1_network()
    execute(s2, Transaction(A, C, 3, 0), Path([A, B, C]), FixedTrace([0, 1]), Random(0))
    assert all(snapshot_truthfulness(s2).values())


def test_sender_knowledge_of_adjacent_balances():
    s = NetworkState(2)
    s.add_channel(ChannelState(0, 1, 10, 8, 0))  # public says 0 -> 1 is empty
    tx = Transaction(0, 1, 5, 0)
    assert find_route(s, tx, Random(0)) is None
    assert tuple(find_route(s, tx, Random(0), sender_knows_adjacent=True)) == (0, 1)


# ------------------------------------------------------------------ invariants

def _bfs_dist(state, s, amount):
    dist = {s: 0}
    q = deque([s])
    while q:
        x = q.popleft()
        for y, ch in state.adj[x]:
            if y not in dist and ch.public_balance(x) >= amount:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


@st.composite
def scenario(draw):
    state = draw(networks())
    s = draw(st.integers(0, state.n - 1))
    d = draw(st.integers(0, state.n - 1).filter(lambda x: x != s))
    amount = draw(st.integers(0, 12))
    kind = draw(st.sampled_from(["aon", "iid"]))
    alpha = draw(st.sampled_from([0.0, 0.3, 1.0]))
    seed = draw(st.integers(0, 2**32))
    return state, Transaction(s, d, amount, 0), NoiseMechanism(kind, alpha), seed


@given(scenario())
def test_transaction_invariants(sc):
    state, tx, mech, seed = sc
    before = state.copy()
    rng = Random(seed)
    path = find_route(state, tx, rng)
    dist = _bfs_dist(before, tx.sender, tx.amount)
    if path is None:
        # route admissibility: none only when the BFS oracle finds nothing
        assert tx.receiver not in dist
        return
    assert path.hops == dist[tx.receiver]
    for u, v in path.edges:
        assert before.channel(u, v).public_balance(u) >= tx.amount
    out = execute(state, tx, path, mech, rng)
    path_keys = {(min(u, v), max(u, v)) for u, v in path.edges}
    for k, ch in state.channels.items():
        old = before.channels[k]
        assert ch.capacity == old.capacity
        assert 0 <= ch.true_balance_uv <= ch.capacity
        assert 0 <= ch.public_balance_uv <= ch.capacity
        if k not in path_keys:
            assert (ch.true_balance_uv, ch.public_balance_uv) == (old.true_balance_uv, old.public_balance_uv)
    if out.kind is OutcomeKind.FAILED_TRUE_BALANCE:
        assert state == before
        assert any(before.channel(u, v).true_balance(u) < tx.amount for u, v in path.edges)
    else:
        for u, v in out.trace:
            assert state.channel(u, v).truthful
        for u, v in path.edges:
            assert state.channel(u, v).true_balance(u) == before.channel(u, v).true_balance(u) - tx.amount


@given(scenario())
def test_route_and_execute_no_route_is_atomic(sc):
    state, tx, mech, seed = sc
    before = state.copy()
    out = route_and_execute(state, tx, mech, Random(seed))
    if out.kind is not OutcomeKind.SUCCEEDED:
        assert state == before
