"""Privacy and utility of noisy balance disclosure in payment channel networks."""

from .analytics.closed_forms import (alternating_privacy, aon_privacy, diagonal_bound,
                                     iid_privacy_exact, iid_privacy_lower_bound,
                                     usm_multi_privacy_lb, usm_privacy)
from .analytics.lp import PrivacyResult, privacy_lp
from .analytics.paths import PathPolicy, enumerate_paths, is_reachable
from .core import (ChannelState, NetworkState, Outcome, OutcomeKind, Path, Transaction,
                   execute, find_route, route_and_execute)
from .errors import ContractViolation, InvalidTraceError, SizeLimitError, SnapshotParseError
from .mechanisms import MaskedMechanism, NoiseMechanism, TabulatedMechanism, utility_of
from .sim import (PeriodicRebalance, ReplicaStats, SimMetrics, SimOptions, ZeroTxRefresh,
                  detect_deadlock, replicate, run)
from .topology import TopologySpec, generate, load_snapshot, save_snapshot
from .workload import WorkloadSpec, build_workload

__all__ = [
    "alternating_privacy", "aon_privacy", "diagonal_bound", "iid_privacy_exact",
    "iid_privacy_lower_bound", "usm_multi_privacy_lb", "usm_privacy",
    "PrivacyResult", "privacy_lp", "PathPolicy", "enumerate_paths", "is_reachable",
    "ChannelState", "NetworkState", "Outcome", "OutcomeKind", "Path", "Transaction",
    "execute", "find_route", "route_and_execute",
    "ContractViolation", "InvalidTraceError", "SizeLimitError", "SnapshotParseError",
    "MaskedMechanism", "NoiseMechanism", "TabulatedMechanism", "utility_of",
    "PeriodicRebalance", "ReplicaStats", "SimMetrics", "SimOptions", "ZeroTxRefresh",
    "detect_deadlock", "replicate", "run",
    "TopologySpec", "generate", "load_snapshot", "save_snapshot",
    "WorkloadSpec", "build_workload",
]
