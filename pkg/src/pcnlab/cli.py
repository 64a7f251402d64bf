"""Batch front end: ``pcnlab {analyze,simulate,sweep,gen-topology} --config F``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Iterable, Sequence

from .analytics.closed_forms import (aon_privacy, alternating_privacy, iid_privacy_exact,
                                     iid_privacy_lower_bound)
from .analytics.lp import privacy_lp
from .analytics.paths import PathPolicy, enumerate_paths
from .config import ConfigError, ExperimentConfig, MechanismConfig, load_config, parse_config
from .core import NetworkState
from .errors import ContractViolation, SizeLimitError, SnapshotParseError
from .mechanisms import utility_of
from .sim import REPLICA_METRICS, replica_rngs, replicate
from .topology import Clique, TopologySpec, degree_histogram, generate, save_snapshot

ANALYZE_COLUMNS = ["mechanism", "alpha", "utility", "privacy_closed_form", "privacy_bound",
                   "privacy_lp", "bound_gap", "status"]
METRIC_COLUMNS = ["mechanism", "alpha", "run_id", "t", "success_rate", "windowed_success_rate",
                  "deadlocks"]
SUMMARY_COLUMNS = ["mechanism", "alpha", "metric", "mean", "sd", "se", "k"]
SCATTER_COLUMNS = ["mechanism", "alpha", "replica", "t", "u", "v", "true_uv", "public_uv"]
SWEEP_COLUMNS = ["mechanism", "alpha", "privacy_closed_form", "mean_sr", "sd_sr", "se_sr",
                 "mean_windowed_sr"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _write_json(path: str, obj, sort_keys: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=sort_keys)
        f.write("\n")


def _name(stem: str, topo: str, ext: str, multi: bool) -> str:
    return f"{stem}_{topo}.{ext}" if multi else f"{stem}.{ext}"


def _first_topology(spec: TopologySpec, seed: int) -> NetworkState:
    """The topology replica 0 sees; fixed by the seed."""
    return generate(spec, replica_rngs(seed, 1)[0][0])


def closed_form(mech: MechanismConfig, alpha: float, spec: TopologySpec, n: int,
                length: int | None) -> tuple[float | None, float | None]:
    """(closed-form privacy, lower bound) where the formulas apply."""
    if mech.kind == "aon":
        return aon_privacy(n, alpha), None
    if length is None or not isinstance(spec.graph, Clique) or length >= n:
        return None, None
    if mech.kind == "alternating":
        return (alternating_privacy(n, length, alpha) if length >= 2 else None), None
    return iid_privacy_exact(n, length, alpha), iid_privacy_lower_bound(n, length, alpha)


# ------------------------------------------------------------------ commands

def cmd_analyze(cfg: ExperimentConfig, out: str, jobs: int = 1) -> None:
    topos = cfg.named_topologies
    multi = len(topos) > 1
    an = cfg.analysis
    for name, spec in topos.items():
        state = _first_topology(spec, cfg.seed)
        n = state.n
        paths, path_error = None, None
        if an.lp:
            policy = (PathPolicy.shortest() if an.path_length is None
                      else PathPolicy.fixed_length(an.path_length))
            try:
                paths = enumerate_paths(state, policy)
            except SizeLimitError as err:
                path_error = f"skipped: {err}"
        rows = []
        for mc in cfg.mechanisms:
            for alpha in mc.grid:
                mech = mc.build(alpha)
                cf, bound = closed_form(mc, alpha, spec, n, an.path_length)
                lp_value, status = None, "lp off"
                utility = mech.utility
                if paths is not None:
                    try:
                        utility = utility_of(mech, paths)
                        res = privacy_lp(mech, paths, n, an.solver)
                        lp_value = res.privacy
                        status = ("exact" if res.lp_status.kind == "exact"
                                  else f"numeric tol={res.lp_status.tolerance:.3g}")
                    except (SizeLimitError, ContractViolation) as err:
                        status = f"skipped: {err}"
                elif path_error is not None:
                    status = path_error
                ref = lp_value if lp_value is not None else cf
                gap = None if ref is None else (1.0 - utility) - ref
                rows.append([mc.kind, alpha, utility, cf, bound, lp_value, gap, status])
        _write_csv(os.path.join(out, _name("analyze", name, "csv", multi)), ANALYZE_COLUMNS, rows)


def _replicate_grid(cfg: ExperimentConfig, spec: TopologySpec, jobs: int):
    workload = cfg.workload_for_sim()
    for mc in cfg.mechanisms:
        for alpha in mc.grid:
            opts = cfg.sim.options(mc.build(alpha))
            yield mc, alpha, replicate(spec, workload, opts, cfg.replicas, cfg.seed, jobs)


def cmd_simulate(cfg: ExperimentConfig, out: str, jobs: int = 1) -> None:
    topos = cfg.named_topologies
    multi = len(topos) > 1
    for name, spec in topos.items():
        metrics, summary, scatter, summary_json = [], [], [], []
        for mc, alpha, stats in _replicate_grid(cfg, spec, jobs):
            for i, run in enumerate(stats.runs):
                for c in run.checkpoints:
                    metrics.append([mc.kind, alpha, i, c.t, c.success_rate,
                                    c.windowed_success_rate, c.deadlocks])
                for p in run.scatter:
                    scatter.append([mc.kind, alpha, i, p.t, p.u, p.v, p.true_uv, p.public_uv])
            entry = {"mechanism": mc.kind, "alpha": alpha, "k": stats.k}
            for metric in REPLICA_METRICS:
                s = stats[metric]
                summary.append([mc.kind, alpha, metric, s.mean, s.sd, s.se, s.k])
                entry[metric] = {"mean": s.mean, "sd": s.sd, "se": s.se}
            summary_json.append(entry)
        _write_csv(os.path.join(out, _name("metrics", name, "csv", multi)), METRIC_COLUMNS, metrics)
        _write_csv(os.path.join(out, _name("summary", name, "csv", multi)), SUMMARY_COLUMNS, summary)
        _write_json(os.path.join(out, _name("summary", name, "json", multi)), summary_json)
        if cfg.sim.scatter_at:
            _write_csv(os.path.join(out, _name("scatter", name, "csv", multi)), SCATTER_COLUMNS,
                       scatter)


def cmd_sweep(cfg: ExperimentConfig, out: str, jobs: int = 1) -> None:
    topos = cfg.named_topologies
    multi = len(topos) > 1
    for name, spec in topos.items():
        n = _first_topology(spec, cfg.seed).n
        rows = []
        for mc, alpha, stats in _replicate_grid(cfg, spec, jobs):
            cf, _ = closed_form(mc, alpha, spec, n, cfg.analysis.path_length)
            sr = stats["success_rate"]
            rows.append([mc.kind, alpha, cf, sr.mean, sr.sd, sr.se,
                         stats["windowed_success_rate"].mean])
        _write_csv(os.path.join(out, _name("sweep", name, "csv", multi)), SWEEP_COLUMNS, rows)


def cmd_gen_topology(cfg: ExperimentConfig, out: str, jobs: int = 1) -> None:
    topos = cfg.named_topologies
    multi = len(topos) > 1
    for name, spec in topos.items():
        state = _first_topology(spec, cfg.seed)
        save_snapshot(state, os.path.join(out, _name("topology", name, "csv", multi)))
        hist = degree_histogram(state)
        _write_json(os.path.join(out, _name("degree_histogram", name, "json", multi)), {
            "n": state.n,
            "channels": len(state.channels),
            "degree_histogram": {str(d): hist[d] for d in sorted(hist)},
        }, sort_keys=False)


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "gen-topology": cmd_gen_topology,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcnlab", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel replica workers")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = parse_config({**cfg.model_dump(), "seed": args.seed})
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be >= 1")
        if args.command in ("simulate", "sweep") and cfg.workload is None:
            raise ConfigError("workload", f"'{args.command}' needs a workload")
        if args.command == "sweep" and all(m.alphas is None for m in cfg.mechanisms):
            raise ConfigError("mechanism.alphas", "sweep needs an alpha grid")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    out = args.out or cfg.output
    try:
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "config.resolved.json"), cfg.model_dump(mode="json"))
        COMMANDS[args.command](cfg, out, args.jobs)
    except OSError as err:
        print(f"I/O error: {err.filename or out}: {err.strerror}", file=sys.stderr)
        return 1
    except (ContractViolation, SizeLimitError, SnapshotParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
