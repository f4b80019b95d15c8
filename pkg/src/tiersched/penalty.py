"""Waiting allowances, violation times, and the exponential SLA penalty.

Two allowance formulations are supported.  In TOTAL mode a job is judged by
its whole-pipeline expected wait against its full allowance.  In PER_TIER
mode the allowance is split across tiers in proportion to each tier's share
of the job's execution time, and the job is judged tier-locally.  Either
way, positive violation time feeds an exponential penalty curve that
saturates at the monetary ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .model import (
    EnvironmentConfig,
    InvalidScheduleError,
    Job,
    JobProgress,
    JobSet,
    Schedule,
    Snapshot,
    remaining_wait,
    validate_schedule,
)


class AllowanceMode(Enum):
    """How a job's queueing slack is granted when judging violations."""

    TOTAL = "total"
    PER_TIER = "per-tier"


@dataclass(frozen=True)
class PenaltyModel:
    """Exponential penalty curve: cost approaches ``chi``, curvature ``nu``."""

    chi: float = 1.0
    nu: float = 0.01

    def __post_init__(self) -> None:
        if self.chi <= 0:
            raise ValueError("cost factor chi must be positive")
        if self.nu <= 0:
            raise ValueError("scaling factor nu must be positive")

    @classmethod
    def from_env(cls, env: EnvironmentConfig) -> "PenaltyModel":
        return cls(chi=env.chi, nu=env.nu)


def differentiated_allowance(job: Job, tier: int) -> float:
    """Tier share of the job's allowance, proportional to execution share.

    The shares sum back to the job's total allowance across all tiers.
    """
    if job.total_exec <= 0:
        raise ValueError(f"job {job.id} has no execution time to apportion")
    return job.allowance * job.exec_times[tier] / job.total_exec


def expected_wait_tier(progress: JobProgress, schedule: Schedule, tier: int,
                       jobs: JobSet) -> float:
    """Expected queueing time of a job at one tier under a schedule.

    For completed tiers the wait is already realized; for the current tier it
    is elapsed wait plus the remaining wait implied by the queue order.  The
    wait at tiers the job has not reached is undefined.
    """
    if tier < progress.tier:
        return progress.completed_waits[tier]
    if tier > progress.tier:
        raise LookupError(
            f"job {progress.job_id} has not reached tier {tier}")
    if progress.in_service:
        return progress.elapsed_wait
    return progress.elapsed_wait + remaining_wait(
        schedule, progress.job_id, tier, jobs)


def expected_wait_multitier(progress: JobProgress, schedule: Schedule,
                            jobs: JobSet) -> float:
    """Expected total queueing time through the job's current tier."""
    return sum(progress.completed_waits) + expected_wait_tier(
        progress, schedule, progress.tier, jobs)


def violation_time(progress: JobProgress, schedule: Schedule, jobs: JobSet,
                   mode: AllowanceMode) -> float:
    """Signed violation time of a resident job under the given mode.

    Positive means the client will be dissatisfied if the schedule holds;
    negative is slack.  TOTAL mode compares the multi-tier expected wait with
    the full allowance; PER_TIER mode compares the current tier's expected
    wait with that tier's allowance share.
    """
    job = jobs.job(progress.job_id)
    if mode is AllowanceMode.TOTAL:
        return expected_wait_multitier(progress, schedule, jobs) - job.allowance
    return (expected_wait_tier(progress, schedule, progress.tier, jobs)
            - differentiated_allowance(job, progress.tier))


def penalty(alpha: float, model: PenaltyModel) -> float:
    """Provider cost for one job's violation time.

    Zero for satisfied clients (alpha <= 0), strictly increasing in alpha,
    and bounded above by the ceiling ``chi``.
    """
    if alpha <= 0:
        return 0.0
    return model.chi * (1.0 - math.exp(-model.nu * alpha))


@dataclass(frozen=True)
class JobViolation:
    """Violation time and cost of one job for one schedule evaluation."""

    job_id: int
    tier: int
    alpha: float
    cost: float
    tier_alphas: tuple[tuple[int, float], ...] = ()


@dataclass(frozen=True)
class ViolationBreakdown:
    """Per-job violation times and penalties plus their aggregates.

    ``total_signed`` sums the raw signed violation times (the optimizer's
    objective); ``total_violation`` counts only positive parts (the reported
    SLA violation time, since a satisfied client violates nothing);
    ``total_cost`` is the summed penalty payable by the provider.
    """

    mode: AllowanceMode
    per_job: dict[int, JobViolation]
    total_signed: float
    total_violation: float
    total_cost: float
    max_violation: float

    @property
    def job_count(self) -> int:
        return len(self.per_job)

    @property
    def mean_violation(self) -> float:
        return self.total_violation / len(self.per_job) if self.per_job else 0.0

    @classmethod
    def from_violations(cls, mode: AllowanceMode,
                        violations: dict[int, JobViolation]) -> "ViolationBreakdown":
        signed = sum(v.alpha for v in violations.values())
        positive = sum(max(v.alpha, 0.0) for v in violations.values())
        cost = sum(v.cost for v in violations.values())
        worst = max((max(v.alpha, 0.0) for v in violations.values()), default=0.0)
        return cls(mode=mode, per_job=violations, total_signed=signed,
                   total_violation=positive, total_cost=cost,
                   max_violation=worst)


class ScheduleEvaluator:
    """Fast scorer for candidate schedules of one snapshot.

    Everything that does not depend on queue order is folded into per-job
    constants up front, so scoring a candidate is a single pass through each
    queue: a running predecessor-work counter (seeded with the in-service
    residual) is the job's remaining wait.  In-service jobs keep their
    schedule-independent violation as a pinned constant.
    """

    def __init__(self, snapshot: Snapshot, mode: AllowanceMode,
                 model: PenaltyModel | None = None):
        self.snapshot = snapshot
        self.mode = mode
        self.model = model or PenaltyModel.from_env(snapshot.env)
        env, jobs = snapshot.env, snapshot.jobs
        size = len(jobs) + 1
        self._const = [0.0] * size
        self._exec = [0.0] * size
        self._tier = [0] * size
        self._delays = [
            snapshot.schedule.residual(t, k) for t, k in env.iter_queues()]
        self._queue_tier = [t for t, _ in env.iter_queues()]
        pinned: dict[int, JobViolation] = {}
        for jid in snapshot.resident_ids():
            prog = snapshot.progress[jid]
            job = jobs.job(jid)
            if mode is AllowanceMode.TOTAL:
                allow = job.allowance
                base = sum(prog.completed_waits) + prog.elapsed_wait
            else:
                allow = differentiated_allowance(job, prog.tier)
                base = prog.elapsed_wait
            if prog.in_service:
                alpha = base - allow
                pinned[jid] = self._job_violation(jid, prog.tier, alpha)
            else:
                self._const[jid] = base - allow
                self._exec[jid] = job.exec_times[prog.tier]
                self._tier[jid] = prog.tier
        self._pinned = pinned
        self._pinned_total = sum(v.alpha for v in pinned.values())

    def _job_violation(self, jid: int, tier: int, alpha: float) -> JobViolation:
        tier_alphas = ((tier, alpha),) if self.mode is AllowanceMode.PER_TIER else ()
        return JobViolation(job_id=jid, tier=tier, alpha=alpha,
                            cost=penalty(alpha, self.model),
                            tier_alphas=tier_alphas)

    def queue_score(self, queue_index: int, order) -> float:
        """Signed violation total of one queue's waiting order."""
        run = self._delays[queue_index]
        const, execs = self._const, self._exec
        total = 0.0
        for jid in order:
            total += const[jid] + run
            run += execs[jid]
        return total

    def fitness(self, flat_orders) -> float:
        """Signed violation total over all residents for candidate orders.

        ``flat_orders`` lists the waiting order of every queue, tier-major,
        exactly as :meth:`Schedule.flat_waiting` produces them.
        """
        total = self._pinned_total
        for qi, order in enumerate(flat_orders):
            total += self.queue_score(qi, order)
        return total

    def breakdown(self, schedule: Schedule | None = None) -> ViolationBreakdown:
        """Full per-job evaluation of a schedule (default: the snapshot's)."""
        sched = schedule if schedule is not None else self.snapshot.schedule
        violations = dict(self._pinned)
        for qi, (tier, k) in enumerate(self.snapshot.env.iter_queues()):
            run = self._delays[qi]
            for jid in sched.waiting(tier, k):
                alpha = self._const[jid] + run
                violations[jid] = self._job_violation(jid, self._tier[jid], alpha)
                run += self._exec[jid]
        return ViolationBreakdown.from_violations(self.mode, violations)


def total_penalty(snapshot: Snapshot, mode: AllowanceMode,
                  schedule: Schedule | None = None,
                  model: PenaltyModel | None = None) -> ViolationBreakdown:
    """Evaluate a schedule over a snapshot's resident jobs.

    The candidate schedule (default: the snapshot's own) is validated against
    the snapshot first; structural violations raise ``InvalidScheduleError``.
    """
    if schedule is not None:
        report = validate_schedule(schedule, snapshot.env, snapshot.jobs,
                                   snapshot=snapshot)
        if not report.ok:
            raise InvalidScheduleError("; ".join(report.violations))
    return ScheduleEvaluator(snapshot, mode, model=model).breakdown(schedule)
