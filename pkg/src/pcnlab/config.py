"""JSON experiment configuration shared by every CLI command."""

from __future__ import annotations

import json
import os
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, model_validator

from .mechanisms import NoiseMechanism
from .sim import PeriodicRebalance, SimOptions, ZeroTxRefresh
from .topology import TopologySpec
from .workload import WorkloadSpec, ZeroStream

SEED_MAX = 2**64 - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MechanismConfig(_Strict):
    kind: Literal["aon", "alternating", "iid"] = "aon"
    alpha: float | None = Field(default=None, ge=0.0, le=1.0)
    alphas: tuple[Annotated[float, Field(ge=0.0, le=1.0)], ...] | None = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.alpha is None) == (self.alphas is None):
            raise ValueError("give exactly one of alpha or alphas")
        if self.alphas is not None and not self.alphas:
            raise ValueError("alphas must be non-empty")
        return self

    @property
    def grid(self) -> tuple[float, ...]:
        return (self.alpha,) if self.alphas is None else self.alphas

    def build(self, alpha: float) -> NoiseMechanism:
        return NoiseMechanism(self.kind, alpha)


class NoHeuristic(_Strict):
    kind: Literal["none"] = "none"


class PeriodicConfig(_Strict):
    kind: Literal["periodic_rebalance"] = "periodic_rebalance"
    period: PositiveInt


class ZeroTxConfig(_Strict):
    kind: Literal["zero_tx"] = "zero_tx"
    rate: float = Field(gt=0.0)  # zero-valued transactions per regular one


HeuristicConfig = Annotated[Union[NoHeuristic, PeriodicConfig, ZeroTxConfig],
                            Field(discriminator="kind")]


class SimConfig(_Strict):
    window: PositiveInt = 2000
    min_value: PositiveInt | None = None
    heuristic: HeuristicConfig = NoHeuristic()
    record_truthfulness: bool = False
    sender_knows_adjacent: bool = True
    checkpoint_every: PositiveInt | None = None
    scatter_at: tuple[PositiveInt, ...] = ()

    def options(self, mechanism: NoiseMechanism) -> SimOptions:
        h = self.heuristic
        heuristic = None
        if isinstance(h, PeriodicConfig):
            heuristic = PeriodicRebalance(h.period)
        elif isinstance(h, ZeroTxConfig):
            heuristic = ZeroTxRefresh()
        return SimOptions(mechanism, window=self.window, min_value=self.min_value,
                          heuristic=heuristic, record_truthfulness=self.record_truthfulness,
                          sender_knows_adjacent=self.sender_knows_adjacent,
                          checkpoint_every=self.checkpoint_every,
                          scatter_at=tuple(sorted(set(self.scatter_at))))


class AnalysisConfig(_Strict):
    lp: bool = True
    # fixed path length on the topology; None routes over shortest paths
    path_length: PositiveInt | None = None
    solver: Literal["auto", "exact", "highs"] = "auto"


class ExperimentConfig(_Strict):
    topology: TopologySpec | None = None
    topologies: dict[str, TopologySpec] | None = None  # named topologies for comparisons
    workload: WorkloadSpec | None = None
    mechanism: MechanismConfig | tuple[MechanismConfig, ...] = MechanismConfig(alpha=1.0)
    sim: SimConfig = SimConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    replicas: PositiveInt = 1
    seed: int = Field(ge=0, le=SEED_MAX)
    output: str = "out"

    @model_validator(mode="after")
    def _topology(self):
        if (self.topology is None) == (self.topologies is None):
            raise ValueError("give exactly one of topology or topologies")
        if self.topologies is not None and not self.topologies:
            raise ValueError("topologies must be non-empty")
        return self

    @property
    def mechanisms(self) -> tuple[MechanismConfig, ...]:
        m = self.mechanism
        return (m,) if isinstance(m, MechanismConfig) else m

    @property
    def named_topologies(self) -> dict[str, TopologySpec]:
        return dict(self.topologies) if self.topologies is not None else {"main": self.topology}

    def workload_for_sim(self) -> WorkloadSpec:
        """The workload with the zero-valued stream the heuristic asks for."""
        if self.workload is None:
            raise ConfigError("workload", "this command needs a workload")
        h = self.sim.heuristic
        if isinstance(h, ZeroTxConfig):
            return self.workload.model_copy(update={"zero_stream": ZeroStream(rate=h.rate)})
        return self.workload


class ConfigError(Exception):
    def __init__(self, field: str, msg: str, detail: str | None = None):
        super().__init__(detail or f"field '{field}': {msg}")
        self.field = field


def _describe(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"field '{loc}': {e['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        first = err.errors()[0]["loc"] if err.errors() else ()
        raise ConfigError(".".join(str(p) for p in first) or "<root>", "invalid",
                          _describe(err)) from None


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as err:
        raise ConfigError("<file>", f"cannot read {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError("<file>", f"{path} is not valid JSON: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return parse_config(data)
