"""Transaction streams: endpoint samplers, value distributions and the optional
zero-valued refresh stream."""

from __future__ import annotations

import csv
import math
import os
from itertools import accumulate
from random import Random
from typing import Annotated, Iterable, Literal, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator

from .core import Transaction
from .errors import ContractViolation


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Pareto(_Strict):
    """Pareto with shape ``beta`` parameterised by its mean ``mean`` (v_m)."""

    kind: Literal["pareto"] = "pareto"
    beta: float = Field(gt=1.0)
    mean: float = Field(gt=0.0)

    @property
    def support_min(self) -> float:
        return self.mean * (self.beta - 1.0) / self.beta


class UniformMean(_Strict):
    """Uniform on [0, 2 * mean]."""

    kind: Literal["uniform"] = "uniform"
    mean: float = Field(gt=0.0)


class Constant(_Strict):
    kind: Literal["constant"] = "constant"
    value: int = Field(ge=0)


ValueSpec = Annotated[Union[Pareto, UniformMean, Constant], Field(discriminator="kind")]


class UniformPairs(_Strict):
    kind: Literal["uniform"] = "uniform"


class WeightedPairs(_Strict):
    kind: Literal["weighted"] = "weighted"
    low_weight: float = Field(default=1.0, gt=0.0)
    high_weight: float = Field(default=16.0, gt=0.0)
    high_prob: float = Field(default=0.2, ge=0.0, le=1.0)


EndpointSpec = Annotated[Union[UniformPairs, WeightedPairs], Field(discriminator="kind")]


class TxAtom(_Strict):
    sender: int = Field(ge=0)
    receiver: int = Field(ge=0)
    amount: int = Field(ge=0)
    weight: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _distinct(self):
        if self.sender == self.receiver:
            raise ValueError("atom sender equals receiver")
        return self


class ZeroStream(_Strict):
    rate: float = Field(gt=0.0)  # expected zero-valued transactions per regular one


class WorkloadSpec(_Strict):
    count: PositiveInt
    endpoints: EndpointSpec = UniformPairs()
    values: ValueSpec = Constant(value=1)
    # explicit joint distribution over (sender, receiver, amount); overrides
    # ``endpoints`` and ``values`` when present
    atoms: tuple[TxAtom, ...] | None = None
    zero_stream: ZeroStream | None = None

    @model_validator(mode="after")
    def _atoms(self):
        if self.atoms is not None and not self.atoms:
            raise ValueError("atoms must be non-empty when given")
        return self


def _round_token(x: float) -> int:
    return int(math.floor(x + 0.5))


def sample_value(spec: ValueSpec, rng: Random) -> int:
    """Inverse-CDF draw rounded to the nearest token; at least 1 for money values."""
    if isinstance(spec, Constant):
        return spec.value
    u = rng.random()
    if isinstance(spec, Pareto):
        # F(v) = 1 - (x_m / v)^beta for v >= x_m, so v = x_m * (1 - u)^(-1/beta)
        x = spec.support_min * (1.0 - u) ** (-1.0 / spec.beta)
    else:
        x = 2.0 * spec.mean * u
    return max(1, _round_token(x))


def min_value(spec: WorkloadSpec) -> int:
    """Smallest amount a regular transaction can carry (the deadlock threshold)."""
    if spec.atoms is not None:
        return max(1, min(a.amount for a in spec.atoms))
    v = spec.values
    if isinstance(v, Constant):
        return max(1, v.value)
    if isinstance(v, Pareto):
        return max(1, _round_token(v.support_min))
    return 1


class EndpointSampler:
    """Draws ordered (sender, receiver) pairs; node weights are fixed at creation."""

    def __init__(self, spec: EndpointSpec, nodes: Sequence[int], rng: Random):
        if len(nodes) < 2:
            raise ContractViolation("need at least two nodes to draw endpoints")
        self.nodes = list(nodes)
        self.weights: list[float] | None = None
        self._cum = None
        if isinstance(spec, WeightedPairs):
            self.weights = [spec.high_weight if rng.random() < spec.high_prob else spec.low_weight
                            for _ in self.nodes]
            self._cum = list(accumulate(self.weights))

    def sample(self, rng: Random) -> tuple[int, int]:
        nodes = self.nodes
        if self._cum is None:
            n = len(nodes)
            i = rng.randrange(n)
            j = rng.randrange(n - 1)
            if j >= i:
                j += 1
            return nodes[i], nodes[j]
        while True:
            s, d = rng.choices(nodes, cum_weights=self._cum, k=2)
            if s != d:
                return s, d


def sample_endpoints(spec: EndpointSpec, nodes: Sequence[int], rng: Random) -> tuple[int, int]:
    return EndpointSampler(spec, nodes, rng).sample(rng)


def iter_workload(spec: WorkloadSpec, nodes: Sequence[int], rng: Random) -> Iterable[Transaction]:
    """Lazily generate the stream; zero-valued transactions arrive as a Poisson
    process with ``zero_stream.rate`` arrivals per regular transaction."""
    nodes = list(nodes)
    if spec.atoms is not None:
        for a in spec.atoms:
            if a.sender not in nodes or a.receiver not in nodes:
                raise ContractViolation(f"atom endpoint outside the node set: {a}")
        atoms = spec.atoms
        cum = list(accumulate(a.weight for a in atoms))
        picks = iter(rng.choices(range(len(atoms)), cum_weights=cum, k=spec.count))
    else:
        sampler = EndpointSampler(spec.endpoints, nodes, rng)
    zero_sampler = EndpointSampler(UniformPairs(), nodes, rng) if spec.zero_stream else None
    next_zero = rng.expovariate(spec.zero_stream.rate) if spec.zero_stream else math.inf
    index = 0
    for i in range(spec.count):
        if spec.atoms is not None:
            a = atoms[next(picks)]
            yield Transaction(a.sender, a.receiver, a.amount, index)
        else:
            s, d = sampler.sample(rng)
            yield Transaction(s, d, sample_value(spec.values, rng), index)
        index += 1
        # zero-valued arrivals in the interval (i, i + 1]
        while next_zero <= 1.0:
            s, d = zero_sampler.sample(rng)
            yield Transaction(s, d, 0, index, True)
            index += 1
            next_zero += rng.expovariate(spec.zero_stream.rate)
        next_zero -= 1.0


def build_workload(spec: WorkloadSpec, nodes: Sequence[int], rng: Random) -> list[Transaction]:
    return list(iter_workload(spec, nodes, rng))


def save_workload(txs: Iterable[Transaction], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "sender", "receiver", "amount"])
        for tx in txs:
            w.writerow([tx.index, tx.sender, tx.receiver, tx.amount])


def load_workload(path: str | os.PathLike) -> list[Transaction]:
    """Inverse of ``save_workload``; zero-valued rows come back as auxiliary."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            amount = int(row["amount"])
            out.append(Transaction(int(row["sender"]), int(row["receiver"]), amount,
                                   int(row["index"]), amount == 0))
    for a, b in zip(out, out[1:]):
        if b.index <= a.index:
            raise ContractViolation(f"workload indices not increasing at index {b.index}")
    return out
