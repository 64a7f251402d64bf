import math
from collections import Counter
from random import Random

import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from pcnlab.errors import ContractViolation
from pcnlab.workload import (Constant, EndpointSampler, Pareto, UniformMean, UniformPairs,
                             WeightedPairs, WorkloadSpec, build_workload, iter_workload,
                             load_workload, min_value, sample_endpoints, sample_value,
                             save_workload)

FOUR_ATOMS = [
    {"sender": 0, "receiver": 1, "amount": 2},
    {"sender": 1, "receiver": 0, "amount": 2},
    {"sender": 0, "receiver": 1, "amount": 3},
    {"sender": 1, "receiver": 0, "amount": 3},
]


def wl(**kw):
    return WorkloadSpec.model_validate(kw)


# ------------------------------------------------------------------ values

def test_pareto_support_minimum():
    spec = Pareto(beta=1.16, mean=1000)
    assert spec.support_min == pytest.approx(137.931, abs=1e-3)
    rng = Random(0)
    draws = [sample_value(spec, rng) for _ in range(200_000)]
    assert min(draws) == 138
    assert min_value(wl(count=1, values={"kind": "pareto", "beta": 1.16, "mean": 1000})) == 138


def test_pareto_mean_within_two_percent():
    # shape 3 keeps the variance finite so a million draws pin the mean down
    spec = Pareto(beta=3.0, mean=1000)
    rng = Random(1)
    n = 1_000_000
    mean = math.fsum(sample_value(spec, rng) for _ in range(n)) / n
    assert abs(mean - 1000) <= 20


def test_constant_zero_and_uniform():
    rng = Random(0)
    assert all(sample_value(Constant(value=0), rng) == 0 for _ in range(100))
    draws = [sample_value(UniformMean(mean=50), rng) for _ in range(50_000)]
    assert min(draws) >= 1 and max(draws) <= 100
    assert abs(sum(draws) / len(draws) - 50) < 1


# ------------------------------------------------------------------ endpoints

def test_uniform_pairs_frequencies():
    rng = Random(2)
    n = 100_000
    counts = Counter(sample_endpoints_fast(UniformPairs(), range(4), rng, n))
    assert len(counts) == 12
    se = math.sqrt((1 / 12) * (11 / 12) / n)
    for c in counts.values():
        assert abs(c / n - 1 / 12) <= 3 * se


def sample_endpoints_fast(spec, nodes, rng, k):
    sampler = EndpointSampler(spec, nodes, rng)
    return [sampler.sample(rng) for _ in range(k)]


def test_weighted_pairs_high_weight_share():
    spec = WeightedPairs()
    share = (0.2 * 16) / (0.2 * 16 + 0.8 * 1)
    assert share == pytest.approx(0.8)
    # expected share of weight on heavy nodes, averaged over many creations
    rng = Random(3)
    heavy = total = 0.0
    for _ in range(300):
        s = EndpointSampler(spec, range(200), rng)
        heavy += sum(w for w in s.weights if w == 16)
        total += sum(s.weights)
    assert abs(heavy / total - 0.8) < 0.02


def test_two_nodes_always_swap():
    rng = Random(0)
    for spec in (UniformPairs(), WeightedPairs()):
        assert {sample_endpoints(spec, [5, 9], rng) for _ in range(100)} == {(5, 9), (9, 5)}


def test_endpoint_sampler_needs_two_nodes():
    with pytest.raises(ContractViolation):
        EndpointSampler(UniformPairs(), [0], Random(0))


# ------------------------------------------------------------------ streams

def test_constant_workload():
    txs = build_workload(wl(count=3, values={"kind": "constant", "value": 1}), range(5), Random(0))
    assert [t.amount for t in txs] == [1, 1, 1]
    assert [t.index for t in txs] == [0, 1, 2]


def test_zero_stream_count():
    spec = wl(count=10_000, zero_stream={"rate": 0.5})
    txs = build_workload(spec, range(10), Random(4))
    zeros = [t for t in txs if t.auxiliary]
    assert all(t.amount == 0 for t in zeros)
    assert sum(not t.auxiliary for t in txs) == 10_000
    assert abs(len(zeros) - 5000) <= 3 * math.sqrt(5000)


def test_four_atom_workload_frequencies():
    n = 40_000
    txs = build_workload(wl(count=n, atoms=FOUR_ATOMS), range(2), Random(5))
    counts = Counter((t.sender, t.receiver, t.amount) for t in txs)
    se = math.sqrt(0.25 * 0.75 / n)
    assert len(counts) == 4
    for c in counts.values():
        assert abs(c / n - 0.25) <= 3 * se
    assert min_value(wl(count=1, atoms=FOUR_ATOMS)) == 2


def test_spec_validation():
    with pytest.raises(ValidationError):
        wl(count=0)
    with pytest.raises(ValidationError):
        wl(count=1, values={"kind": "pareto", "beta": 1.0, "mean": 10})
    with pytest.raises(ValidationError):
        wl(count=1, atoms=[{"sender": 1, "receiver": 1, "amount": 2}])
    with pytest.raises(ValidationError):
        wl(count=1, colour="red")


def test_atoms_outside_node_set():
    with pytest.raises(ContractViolation):
        build_workload(wl(count=2, atoms=FOUR_ATOMS), [0, 2], Random(0))


def test_save_and_load(tmp_path):
    txs = build_workload(wl(count=50, zero_stream={"rate": 1.0}), range(6), Random(6))
    f = tmp_path / "w.csv"
    save_workload(txs, f)
    assert load_workload(f) == txs


# ------------------------------------------------------------------ invariants

value_specs = st.one_of(
    st.builds(Pareto, beta=st.floats(1.01, 5), mean=st.floats(0.5, 5000)),
    st.builds(UniformMean, mean=st.floats(0.5, 5000)),
    st.builds(Constant, value=st.integers(0, 100)),
)


@given(value_specs, st.integers(0, 2**32))
def test_values_respect_support(spec, seed):
    rng = Random(seed)
    for _ in range(20):
        v = sample_value(spec, rng)
        assert isinstance(v, int)
        if isinstance(spec, Constant):
            assert v == spec.value
        else:
            assert v >= 1
        if isinstance(spec, Pareto):
            assert v >= spec.support_min - 0.5
            assert v >= min_value(WorkloadSpec(count=1, values=spec))


@given(st.integers(1, 60), st.integers(2, 8), st.sampled_from([None, 0.3, 2.0]),
       st.booleans(), st.integers(0, 2**32))
def test_workloads_are_reproducible_and_well_formed(count, n, rate, weighted, seed):
    spec = WorkloadSpec(count=count, endpoints=WeightedPairs() if weighted else UniformPairs(),
                        zero_stream=None if rate is None else {"rate": rate})
    a = build_workload(spec, range(n), Random(seed))
    assert a == build_workload(spec, range(n), Random(seed))
    assert sum(not t.auxiliary for t in a) == count
    for t in a:
        assert t.sender != t.receiver and 0 <= t.sender < n and 0 <= t.receiver < n
    assert all(x.index < y.index for x, y in zip(a, a[1:]))


@given(st.integers(2, 6), st.integers(0, 2**32))
def test_uniform_pairs_are_symmetric(n, seed):
    # P(u -> v) = P(v -> u): the sampler draws every ordered pair with equal mass
    rng = Random(seed)
    sampler = EndpointSampler(UniformPairs(), range(n), rng)
    counts = Counter(sampler.sample(rng) for _ in range(400))
    assert sum(counts.values()) == 400
    assert all(u != v for u, v in counts)
    # the reflection of a draw is drawn from the same stream with the same probability
    mirrored = Counter((v, u) for u, v in counts.elements())
    expected = 400 / (n * (n - 1))
    for pair in set(counts) | set(mirrored):
        diff = counts[pair] - mirrored[pair]
        assert abs(diff) <= 8 * math.sqrt(2 * expected) + 1
