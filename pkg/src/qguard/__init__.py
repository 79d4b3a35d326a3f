"""Fidelity-aware entanglement routing on k-hop local link state.

The package simulates slotted routing in a quantum repeater network:
contention-free path reservation, link generation, local recovery
planning, per-hop purification, swapping and end-to-end qualification.
"""
from .experiment import (
    AggregateRow,
    ConfigError,
    ExperimentConfig,
    build_topology,
    preset,
    run_experiment,
    run_range_study,
    rows_to_csv,
)
from .paths import ext, extended_dijkstra, fp_score, select_major_paths, select_recovery_paths
from .purification import (
    BellPair,
    bbpssw_asymmetric_step,
    bbpssw_symmetric_step,
    final_e2e_purification,
    pump_to_target,
    purification_cost,
)
from .recovery import exg, plan_targets_ws, qcast_recovery, select_recovery
from .rng import RandomStream
from .slot import ALGORITHMS, AlgorithmConfig, SlotMetrics, Simulator, run_slot
from .topology import NetworkGraph, Request, calibrate_alpha, generate_waxman, sample_requests
from .views import LinkStateView, LocalityError
from .werner import end_to_end_fidelity, equal_split_target, fidelity_to_werner, werner_to_fidelity

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AggregateRow",
    "AlgorithmConfig",
    "BellPair",
    "ConfigError",
    "ExperimentConfig",
    "LinkStateView",
    "LocalityError",
    "NetworkGraph",
    "RandomStream",
    "Request",
    "Simulator",
    "SlotMetrics",
    "bbpssw_asymmetric_step",
    "bbpssw_symmetric_step",
    "build_topology",
    "calibrate_alpha",
    "end_to_end_fidelity",
    "equal_split_target",
    "exg",
    "ext",
    "extended_dijkstra",
    "fidelity_to_werner",
    "final_e2e_purification",
    "fp_score",
    "generate_waxman",
    "plan_targets_ws",
    "preset",
    "pump_to_target",
    "purification_cost",
    "qcast_recovery",
    "rows_to_csv",
    "run_experiment",
    "run_range_study",
    "run_slot",
    "sample_requests",
    "select_major_paths",
    "select_recovery",
    "select_recovery_paths",
    "werner_to_fidelity",
]
