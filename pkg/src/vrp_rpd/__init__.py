"""Solver suite for the vehicle routing problem with resource-constrained
pickup and delivery: exact schedule evaluation, construction heuristics, an
adaptive large neighborhood search, a warm-started biased random-key genetic
algorithm, a small-instance exact solver with LP-format model export, and a
benchmark harness with paired statistics."""

from .instance import (FleetConfig, Instance, RawTsplib, VariantSpec,
                       build_instance, fleet_for, parse_tsplib)
from .schedule import (CoordinationMetrics, OpKind, Schedule, Solution,
                       coordination_metrics, evaluate, makespan,
                       two_pass_estimate)

__all__ = [
    "FleetConfig", "Instance", "RawTsplib", "VariantSpec",
    "build_instance", "fleet_for", "parse_tsplib",
    "CoordinationMetrics", "OpKind", "Schedule", "Solution",
    "coordination_metrics", "evaluate", "makespan", "two_pass_estimate",
]
