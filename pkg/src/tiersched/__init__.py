"""Multi-tier job scheduling testbed.

A discrete-event simulator of tiered queued resources, an SLA violation
penalty model with two waiting-allowance formulations, a permutation genetic
scheduler (virtualized and segmented queue variants), WRR/WLC/FCFS baselines,
and a brute-force oracle for desk-scale ground truth.
"""

from .baselines import PolicyKind, make_policy
from .ga import Chromosome, EvolveResult, GAConfig, QueueVariant, evolve, evolve_segmented
from .model import (
    EnvironmentConfig,
    InvalidScheduleError,
    Job,
    JobProgress,
    JobSet,
    Schedule,
    SchedulingError,
    Snapshot,
    ValidationReport,
    remaining_wait,
    validate_schedule,
)
from .oracle import InstanceTooLargeError, OracleResult, exhaustive_best
from .penalty import (
    AllowanceMode,
    PenaltyModel,
    ScheduleEvaluator,
    ViolationBreakdown,
    differentiated_allowance,
    expected_wait_multitier,
    expected_wait_tier,
    penalty,
    total_penalty,
    violation_time,
)
from .sim import SimReport, Simulator, run_to_completion, simulate_to_snapshot
from .workload import WorkloadFormatError, WorkloadSpec, generate, load, save

__version__ = "0.1.0"

__all__ = [
    "AllowanceMode",
    "Chromosome",
    "EnvironmentConfig",
    "EvolveResult",
    "GAConfig",
    "InstanceTooLargeError",
    "InvalidScheduleError",
    "Job",
    "JobProgress",
    "JobSet",
    "OracleResult",
    "PenaltyModel",
    "PolicyKind",
    "QueueVariant",
    "Schedule",
    "ScheduleEvaluator",
    "SchedulingError",
    "SimReport",
    "Simulator",
    "Snapshot",
    "ValidationReport",
    "ViolationBreakdown",
    "WorkloadFormatError",
    "WorkloadSpec",
    "differentiated_allowance",
    "evolve",
    "evolve_segmented",
    "exhaustive_best",
    "expected_wait_multitier",
    "expected_wait_tier",
    "generate",
    "load",
    "make_policy",
    "penalty",
    "remaining_wait",
    "run_to_completion",
    "save",
    "simulate_to_snapshot",
    "total_penalty",
    "validate_schedule",
    "violation_time",
]
