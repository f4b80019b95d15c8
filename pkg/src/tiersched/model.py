"""Core domain types for the multi-tier queueing environment.

Jobs flow through N sequential tiers; each tier owns a set of identical
resources, each with its own queue.  A job's position within those queues is
the optimization variable, so the types here split cleanly into static data
(jobs, environment shape) and queue state (schedules, per-job progress).
Everything is an immutable value object: the simulator and the optimizers
build new instances instead of mutating shared state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

#: Absolute tolerance for time comparisons throughout the package.
TIME_EPS = 1e-9


class SchedulingError(Exception):
    """Base class for domain errors raised by this package."""


class InvalidScheduleError(SchedulingError):
    """A schedule broke a structural invariant and cannot be used."""


@dataclass(frozen=True)
class EnvironmentConfig:
    """Shape of the environment plus its SLA penalty parameters.

    ``chi`` is the monetary ceiling of the per-job penalty curve and ``nu``
    its curvature (1/time).  ``allowance_fraction`` is the default slack
    granted relative to a job's total execution time when workloads are
    synthesized.
    """

    num_tiers: int = 2
    resources_per_tier: tuple[int, ...] = (3, 3)
    chi: float = 1.0
    nu: float = 0.01
    allowance_fraction: float = 0.20

    def __post_init__(self) -> None:
        if isinstance(self.resources_per_tier, int):
            object.__setattr__(
                self, "resources_per_tier",
                (self.resources_per_tier,) * self.num_tiers)
        else:
            object.__setattr__(
                self, "resources_per_tier", tuple(self.resources_per_tier))
        if self.num_tiers < 1:
            raise ValueError("environment needs at least one tier")
        if len(self.resources_per_tier) != self.num_tiers:
            raise ValueError("resources_per_tier must give one count per tier")
        if any(m < 1 for m in self.resources_per_tier):
            raise ValueError("every tier needs at least one resource")
        if self.chi <= 0:
            raise ValueError("cost factor chi must be positive")
        if self.nu <= 0:
            raise ValueError("scaling factor nu must be positive")
        if self.allowance_fraction < 0:
            raise ValueError("allowance_fraction must be nonnegative")

    @property
    def num_queues(self) -> int:
        return sum(self.resources_per_tier)

    def queue_offset(self, tier: int) -> int:
        """Flat index of the tier's first queue (tier-major ordering)."""
        return sum(self.resources_per_tier[:tier])

    def iter_queues(self) -> Iterator[tuple[int, int]]:
        """All (tier, resource) pairs in tier-major order."""
        for tier, count in enumerate(self.resources_per_tier):
            for k in range(count):
                yield tier, k


@dataclass(frozen=True)
class Job:
    """One client job.

    ``arrival`` is the external arrival time at the first tier; arrivals at
    later tiers are produced by the simulation, not prescribed.  The target
    completion time implies a deadline relative to arrival, and the slack
    between deadline and total execution time is the job's waiting allowance:
    the total time it may spend queued without dissatisfying its client.
    """

    id: int
    arrival: float
    exec_times: tuple[float, ...]
    target_completion: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "exec_times", tuple(float(e) for e in self.exec_times))
        if self.id < 1:
            raise ValueError("job ids start at 1")
        if not self.exec_times:
            raise ValueError(f"job {self.id}: needs at least one tier execution time")
        if any(e <= 0 for e in self.exec_times):
            raise ValueError(f"job {self.id}: execution times must be positive")
        if self.deadline < self.total_exec - TIME_EPS:
            raise ValueError(
                f"job {self.id}: deadline {self.deadline!r} below total "
                f"execution time {self.total_exec!r}")

    @property
    def total_exec(self) -> float:
        return sum(self.exec_times)

    @property
    def deadline(self) -> float:
        """Time budget from arrival to target completion."""
        return self.target_completion - self.arrival

    @property
    def allowance(self) -> float:
        """Total queueing slack the job can absorb without violation."""
        return self.deadline - self.total_exec


@dataclass(frozen=True)
class JobSet:
    """Arrival-ordered job collection with dense ids 1..len."""

    jobs: tuple[Job, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "jobs", tuple(self.jobs))
        last_arrival = None
        tiers = None
        for pos, job in enumerate(self.jobs, start=1):
            if job.id != pos:
                raise ValueError(
                    f"job ids must be dense and arrival-ordered; expected id "
                    f"{pos}, found {job.id}")
            if last_arrival is not None and job.arrival < last_arrival - TIME_EPS:
                raise ValueError(
                    f"job {job.id} arrives before job {job.id - 1}; ids must "
                    f"follow arrival order")
            last_arrival = max(job.arrival, last_arrival or job.arrival)
            if tiers is None:
                tiers = len(job.exec_times)
            elif len(job.exec_times) != tiers:
                raise ValueError("all jobs must cover the same number of tiers")

    def __len__(self) -> int:
        return len(self.jobs)

    def __iter__(self) -> Iterator[Job]:
        return iter(self.jobs)

    def __bool__(self) -> bool:
        return bool(self.jobs)

    @property
    def num_tiers(self) -> int:
        return len(self.jobs[0].exec_times) if self.jobs else 0

    def job(self, job_id: int) -> Job:
        if not 1 <= job_id <= len(self.jobs):
            raise KeyError(f"unknown job id {job_id}")
        return self.jobs[job_id - 1]


@dataclass(frozen=True)
class JobProgress:
    """Where a resident job currently stands.

    Tier indices are 0-based.  ``completed_waits`` holds the finalized queue
    waits of tiers the job already passed; ``elapsed_wait`` is the wait accrued
    so far in the current tier (frozen at its final value once service
    starts).  Tier hand-offs are exact: the departure from tier j is the
    arrival at tier j+1.
    """

    job_id: int
    tier: int
    tier_arrivals: tuple[float, ...]
    completed_waits: tuple[float, ...]
    departures: tuple[float, ...]
    elapsed_wait: float
    in_service: bool = False
    service_start: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tier_arrivals", tuple(self.tier_arrivals))
        object.__setattr__(self, "completed_waits", tuple(self.completed_waits))
        object.__setattr__(self, "departures", tuple(self.departures))
        if self.tier < 0:
            raise ValueError("tier index must be nonnegative")
        if len(self.tier_arrivals) != self.tier + 1:
            raise ValueError(
                f"job {self.job_id}: need one arrival per tier reached")
        if len(self.completed_waits) != self.tier or len(self.departures) != self.tier:
            raise ValueError(
                f"job {self.job_id}: completed tiers need waits and departures")
        if any(w < -TIME_EPS for w in self.completed_waits):
            raise ValueError(f"job {self.job_id}: negative completed wait")
        if self.elapsed_wait < -TIME_EPS:
            raise ValueError(f"job {self.job_id}: negative elapsed wait")
        for j, dep in enumerate(self.departures):
            if dep != self.tier_arrivals[j + 1]:
                raise ValueError(
                    f"job {self.job_id}: departure from tier {j} must equal "
                    f"arrival at tier {j + 1}")
        if self.in_service and self.service_start is None:
            raise ValueError(f"job {self.job_id}: in service without a start time")


@dataclass(frozen=True)
class Schedule:
    """Per-queue execution orders plus the in-service job pinned at each head.

    ``orders[tier][k]`` lists job ids front-to-back for resource k of the
    tier.  ``busy[tier][k]`` is the residual execution time of the head job
    when that resource is mid-service, or ``None`` when idle.  Service is
    non-preemptive, so an in-service head is never reordered or migrated;
    everything behind it is fair game for the schedulers.
    """

    orders: tuple[tuple[tuple[int, ...], ...], ...]
    busy: tuple[tuple[float | None, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "orders",
            tuple(tuple(tuple(q) for q in tier) for tier in self.orders))
        object.__setattr__(
            self, "busy", tuple(tuple(tier) for tier in self.busy))
        if len(self.busy) != len(self.orders):
            raise ValueError("busy map must mirror the queue layout")
        for tier, (tqs, tbs) in enumerate(zip(self.orders, self.busy)):
            if len(tbs) != len(tqs):
                raise ValueError("busy map must mirror the queue layout")
            for k, (queue, residual) in enumerate(zip(tqs, tbs)):
                if residual is None:
                    continue
                if not queue:
                    raise ValueError(
                        f"tier {tier} resource {k}: busy with an empty queue")
                if residual < -TIME_EPS:
                    raise ValueError(
                        f"tier {tier} resource {k}: negative residual")

    @staticmethod
    def empty(env: EnvironmentConfig) -> "Schedule":
        return Schedule(
            orders=tuple(tuple(() for _ in range(m)) for m in env.resources_per_tier),
            busy=tuple(tuple(None for _ in range(m)) for m in env.resources_per_tier))

    @property
    def num_tiers(self) -> int:
        return len(self.orders)

    def resources_in(self, tier: int) -> int:
        return len(self.orders[tier])

    def queue(self, tier: int, k: int) -> tuple[int, ...]:
        return self.orders[tier][k]

    def residual(self, tier: int, k: int) -> float:
        r = self.busy[tier][k]
        return 0.0 if r is None else r

    def in_service_id(self, tier: int, k: int) -> int | None:
        return self.orders[tier][k][0] if self.busy[tier][k] is not None else None

    def waiting(self, tier: int, k: int) -> tuple[int, ...]:
        """Queue content excluding the pinned in-service head."""
        queue = self.orders[tier][k]
        return queue[1:] if self.busy[tier][k] is not None else queue

    def tier_ids(self, tier: int) -> list[int]:
        out: list[int] = []
        for queue in self.orders[tier]:
            out.extend(queue)
        return out

    def locate(self, job_id: int) -> tuple[int, int, int] | None:
        """(tier, resource, position) of a job, or None if absent."""
        for tier, tier_queues in enumerate(self.orders):
            for k, queue in enumerate(tier_queues):
                for pos, jid in enumerate(queue):
                    if jid == job_id:
                        return tier, k, pos
        return None

    def flat_waiting(self) -> tuple[tuple[int, ...], ...]:
        """Waiting orders of every queue, tier-major (the genetic genome)."""
        return tuple(
            self.waiting(tier, k)
            for tier, tier_queues in enumerate(self.orders)
            for k in range(len(tier_queues)))

    def with_waiting(self, flat_orders: Sequence[Sequence[int]]) -> "Schedule":
        """Rebuild with new waiting orders, keeping the pinned heads."""
        if len(flat_orders) != sum(len(t) for t in self.orders):
            raise ValueError("need one waiting order per queue")
        new_orders = []
        idx = 0
        for tier, tier_queues in enumerate(self.orders):
            row = []
            for k in range(len(tier_queues)):
                head = self.in_service_id(tier, k)
                prefix = (head,) if head is not None else ()
                row.append(prefix + tuple(int(j) for j in flat_orders[idx]))
                idx += 1
            new_orders.append(tuple(row))
        return Schedule(orders=tuple(new_orders), busy=self.busy)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a structural schedule check."""

    ok: bool
    violations: tuple[str, ...] = ()


def validate_schedule(schedule: Schedule,
                      env: EnvironmentConfig,
                      jobs: JobSet,
                      snapshot: "Snapshot | None" = None) -> ValidationReport:
    """Check a schedule's structural invariants, report-style.

    Always checked: layout matches the environment, ids are known, no id
    appears twice within a tier, and no job occupies queues of two tiers at
    once.  Given a reference snapshot, additionally checks that per-tier
    waiting sets are preserved and that in-service jobs stay pinned at their
    original heads with their original residuals.
    """
    violations: list[str] = []

    if schedule.num_tiers != env.num_tiers or any(
            schedule.resources_in(t) != env.resources_per_tier[t]
            for t in range(schedule.num_tiers)):
        violations.append("layout does not match the environment")
        return ValidationReport(ok=False, violations=tuple(violations))

    seen_tier: dict[int, int] = {}
    for tier in range(schedule.num_tiers):
        counted: dict[int, int] = {}
        for k in range(schedule.resources_in(tier)):
            for jid in schedule.queue(tier, k):
                if not 1 <= jid <= len(jobs):
                    violations.append(f"unknown job id {jid} in tier {tier}")
                    continue
                counted[jid] = counted.get(jid, 0) + 1
        for jid, n in counted.items():
            if n > 1:
                violations.append(f"duplicate within tier {tier}: job {jid}")
            if jid in seen_tier:
                violations.append(
                    f"job {jid} appears in tiers {seen_tier[jid]} and {tier}")
            else:
                seen_tier[jid] = tier

    for tier, k in env.iter_queues():
        head = schedule.in_service_id(tier, k)
        if head is None:
            continue
        residual = schedule.residual(tier, k)
        if 1 <= head <= len(jobs):
            if residual > jobs.job(head).exec_times[tier] + TIME_EPS:
                violations.append(
                    f"tier {tier} resource {k}: residual exceeds the head's "
                    f"execution time")

    if snapshot is not None:
        for tier in range(env.num_tiers):
            want = sorted(snapshot.waiting_ids(tier))
            have = sorted(
                jid for k in range(schedule.resources_in(tier))
                for jid in schedule.waiting(tier, k))
            if want != have:
                violations.append(f"tier {tier}: waiting job set changed")
        for tier, k in env.iter_queues():
            ref_head = snapshot.schedule.in_service_id(tier, k)
            got_head = schedule.in_service_id(tier, k)
            if ref_head != got_head:
                violations.append(
                    f"tier {tier} resource {k}: in-service job "
                    f"{ref_head} reordered or migrated")
            elif ref_head is not None and abs(
                    schedule.residual(tier, k)
                    - snapshot.schedule.residual(tier, k)) > TIME_EPS:
                violations.append(
                    f"tier {tier} resource {k}: in-service residual changed")

    return ValidationReport(ok=not violations, violations=tuple(violations))


def remaining_wait(schedule: Schedule, job_id: int, tier: int,
                   jobs: JobSet) -> float:
    """Queueing time still ahead of a job in its tier, under this schedule.

    Sums the execution times of every job queued ahead of it, counting an
    in-service head at its residual (a non-preemptive head physically delays
    everyone behind it).  Zero for the in-service head itself.
    """
    for k in range(schedule.resources_in(tier)):
        queue = schedule.queue(tier, k)
        for pos, jid in enumerate(queue):
            if jid != job_id:
                continue
            busy = schedule.busy[tier][k] is not None
            if busy and pos == 0:
                return 0.0
            total = schedule.residual(tier, k)
            for ahead in queue[1 if busy else 0:pos]:
                total += jobs.job(ahead).exec_times[tier]
            return total
    raise LookupError(f"job {job_id} is not queued in tier {tier}")


@dataclass(frozen=True)
class Snapshot:
    """Frozen view of the environment at one instant.

    Bundles the live schedule with per-job progress so violation times of
    candidate schedules can be evaluated without touching the simulator.
    """

    env: EnvironmentConfig
    jobs: JobSet
    clock: float
    schedule: Schedule
    progress: dict[int, JobProgress] = field(default_factory=dict)

    def __post_init__(self) -> None:
        scheduled = {jid for tier in range(self.schedule.num_tiers)
                     for jid in self.schedule.tier_ids(tier)}
        if scheduled != set(self.progress):
            raise ValueError("schedule and progress must cover the same jobs")
        for jid, prog in self.progress.items():
            loc = self.schedule.locate(jid)
            assert loc is not None
            tier, k, pos = loc
            if tier != prog.tier:
                raise ValueError(
                    f"job {jid} scheduled in tier {tier} but resides in "
                    f"tier {prog.tier}")
            head_in_service = (pos == 0
                               and self.schedule.busy[tier][k] is not None)
            if head_in_service != prog.in_service:
                raise ValueError(
                    f"job {jid}: in-service flag disagrees with the schedule")

    def resident_ids(self) -> list[int]:
        return sorted(self.progress)

    def waiting_ids(self, tier: int | None = None) -> list[int]:
        return sorted(
            jid for jid, prog in self.progress.items()
            if not prog.in_service and (tier is None or prog.tier == tier))

    def in_service_ids(self) -> list[int]:
        return sorted(jid for jid, prog in self.progress.items()
                      if prog.in_service)
