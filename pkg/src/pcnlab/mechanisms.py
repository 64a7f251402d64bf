"""Noise mechanisms D[Q|P]: which edges of a transacted path get a truthful
public-balance refresh, and the worst-case per-edge utility they deliver."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from random import Random
from typing import Callable, Iterable, Literal, Mapping, Protocol

from .core import EMPTY_TRACE, Edge, Path, Trace
from .errors import ContractViolation, SizeLimitError

MechanismKind = Literal["aon", "alternating", "iid"]
MECHANISM_KINDS = ("aon", "alternating", "iid")
IID_ENUMERATION_CAP = 20
SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TraceDistribution:
    """Finite distribution over subsets of a path's oriented edges."""

    path: Path
    entries: tuple[tuple[Trace, float], ...]

    def __post_init__(self):
        edges = set(self.path.edges)
        merged: dict[Trace, float] = {}
        for q, p in self.entries:
            q = frozenset(q)
            if p < 0:
                raise ContractViolation(f"negative probability {p}")
            if not q <= edges:
                raise ContractViolation(f"trace {sorted(q)} is not a subset of {self.path!r}")
            if p > 0:
                merged[q] = merged.get(q, 0.0) + p
        total = math.fsum(merged.values())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ContractViolation(f"trace probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "entries", tuple(merged.items()))

    def as_dict(self) -> dict[Trace, float]:
        return dict(self.entries)

    def marginal(self, edge: Edge) -> float:
        """Probability that ``edge`` is refreshed."""
        return math.fsum(p for q, p in self.entries if edge in q)

    def mask(self, hidden: Callable[[Edge], bool]) -> TraceDistribution:
        """Drop edges whose updates are never published and merge equal traces."""
        return TraceDistribution(self.path, tuple(
            (frozenset(e for e in q if not hidden(e)), p) for q, p in self.entries))


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ContractViolation(f"alpha must lie in [0, 1], got {alpha}")


def odd_edges(path: Path) -> Trace:
    return frozenset(path.edges[0::2])


def even_edges(path: Path) -> Trace:
    return frozenset(path.edges[1::2])


def aon_distribution(path: Path, alpha: float) -> TraceDistribution:
    _check_alpha(alpha)
    return TraceDistribution(path, ((EMPTY_TRACE, 1.0 - alpha), (frozenset(path.edges), alpha)))


def alternating_distribution(path: Path, alpha: float) -> TraceDistribution:
    _check_alpha(alpha)
    if path.hops < 2:
        raise ContractViolation("alternating noise needs paths of at least two edges")
    if alpha <= 0.5:
        rest = (EMPTY_TRACE, 1.0 - 2.0 * alpha)
        side = alpha
    else:
        # full-path atom carries 2*alpha-1 so every edge keeps marginal alpha
        rest = (frozenset(path.edges), 2.0 * alpha - 1.0)
        side = 1.0 - alpha
    return TraceDistribution(path, ((odd_edges(path), side), (even_edges(path), side), rest))


def iid_distribution(path: Path, alpha: float) -> TraceDistribution:
    _check_alpha(alpha)
    edges = path.edges
    L = len(edges)
    if L > IID_ENUMERATION_CAP:
        raise SizeLimitError(f"i.i.d. enumeration needs 2^{L} atoms; cap is 2^{IID_ENUMERATION_CAP}")
    entries = []
    for mask in itertools.product((False, True), repeat=L):
        k = sum(mask)
        entries.append((frozenset(e for e, m in zip(edges, mask) if m),
                        alpha ** k * (1.0 - alpha) ** (L - k)))
    return TraceDistribution(path, tuple(entries))


def iid_sample(path: Path, alpha: float, rng: Random) -> Trace:
    _check_alpha(alpha)
    return NoiseMechanism("iid", alpha).sample(path, rng)


class Mechanism(Protocol):
    def distribution(self, path: Path) -> TraceDistribution: ...


@dataclass(frozen=True)
class NoiseMechanism:
    kind: MechanismKind
    alpha: float

    def __post_init__(self):
        if self.kind not in MECHANISM_KINDS:
            raise ContractViolation(f"unknown mechanism kind {self.kind!r}")
        _check_alpha(self.alpha)

    def distribution(self, path: Path) -> TraceDistribution:
        if self.kind == "aon":
            return aon_distribution(path, self.alpha)
        if self.kind == "alternating":
            return alternating_distribution(path, self.alpha)
        return iid_distribution(path, self.alpha)

    def select(self, hops: int, rng: Random) -> range | list[int]:
        """Indices of the refreshed edges on a path with ``hops`` edges."""
        a = self.alpha
        if self.kind == "iid":
            rand = rng.random
            return [i for i in range(hops) if rand() < a]
        u = rng.random()
        if self.kind == "aon":
            return range(hops) if u < a else range(0)
        if hops < 2:
            raise ContractViolation("alternating noise needs paths of at least two edges")
        side = a if a <= 0.5 else 1.0 - a
        if u < side:
            return range(0, hops, 2)
        if u < 2.0 * side:
            return range(1, hops, 2)
        return range(0) if a <= 0.5 else range(hops)

    def sample(self, path: Path, rng: Random) -> Trace:
        edges = path.edges
        return frozenset(edges[i] for i in self.select(len(edges), rng))

    @property
    def utility(self) -> float:
        return self.alpha


@dataclass(frozen=True)
class TabulatedMechanism:
    """An arbitrary mechanism given path by path."""

    table: Mapping[Path, TraceDistribution]

    def distribution(self, path: Path) -> TraceDistribution:
        try:
            return self.table[path]
        except KeyError:
            raise ContractViolation(f"mechanism has no distribution for {path!r}") from None

    def sample(self, path: Path, rng: Random) -> Trace:
        entries = self.distribution(path).entries
        u = rng.random()
        acc = 0.0
        for q, p in entries:
            acc += p
            if u < acc:
                return q
        return entries[-1][0]


@dataclass(frozen=True)
class MaskedMechanism:
    """Wraps a mechanism so that updates on ``hidden`` channels are never published
    (the user-server model keeps user-server channels private)."""

    base: Mechanism
    hidden: frozenset  # unordered node pairs (u, v) with u < v

    def _is_hidden(self, e: Edge) -> bool:
        u, v = e
        return ((u, v) if u < v else (v, u)) in self.hidden

    def distribution(self, path: Path) -> TraceDistribution:
        return self.base.distribution(path).mask(self._is_hidden)

    def sample(self, path: Path, rng: Random) -> Trace:
        return frozenset(e for e in self.base.sample(path, rng) if not self._is_hidden(e))


def utility_of(mechanism: Mechanism, path_set: Iterable[Path]) -> float:
    """min over paths P and edges e in P of Pr[e is refreshed | P]."""
    best = None
    for path in path_set:
        dist = mechanism.distribution(path)
        for e in path.edges:
            m = dist.marginal(e)
            if best is None or m < best:
                best = m
    if best is None:
        raise ContractViolation("utility of an empty path set is undefined")
    return best
