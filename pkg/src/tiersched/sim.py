"""Event-driven simulation of the multi-tier queueing environment.

The simulator is a single-writer state machine.  Two event kinds drive it:
external or inter-tier arrivals, and service completions.  At equal
timestamps completions are processed before arrivals, and lower job ids
first, which makes every run a deterministic function of its inputs.  An
assignment policy places each arriving job; an optional optimizer callback
may reorder the waiting jobs between events via frozen snapshots.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .baselines import AssignmentPolicy, PolicyKind, make_policy
from .model import (
    TIME_EPS,
    EnvironmentConfig,
    InvalidScheduleError,
    JobProgress,
    JobSet,
    Schedule,
    Snapshot,
    validate_schedule,
)
from .penalty import (
    AllowanceMode,
    JobViolation,
    PenaltyModel,
    ViolationBreakdown,
    differentiated_allowance,
    penalty,
)

_COMPLETION = 0  # processed before arrivals at equal timestamps
_ARRIVAL = 1

TRACE_VERSION = 1


@dataclass(frozen=True)
class TraceEvent:
    """One line of the replay log (tiers and resources are 1-based here)."""

    time: float
    kind: str
    job_id: int
    tier: int
    resource: int

    def line(self) -> str:
        job = str(self.job_id) if self.job_id else "-"
        tier = str(self.tier + 1) if self.tier >= 0 else "-"
        res = str(self.resource + 1) if self.resource >= 0 else "-"
        return f"{self.time!r} {self.kind} {job} {tier} {res}"


class _JobState:
    """Mutable per-job bookkeeping internal to the simulator."""

    __slots__ = ("tier", "tier_arrivals", "waits", "departures", "resource",
                 "in_service", "in_queue", "done")

    def __init__(self) -> None:
        self.tier = -1
        self.tier_arrivals: list[float] = []
        self.waits: list[float] = []
        self.departures: list[float] = []
        self.resource = -1
        self.in_service = False
        # False while a job is in flight between tiers: it has completed one
        # tier and its arrival at the next has not been processed yet.
        self.in_queue = False
        self.done = False


@dataclass(frozen=True)
class JobOutcome:
    """Realized timings of one completed job.

    The violation time is mode-independent once a job is done: the per-tier
    allowance shares sum to the total allowance, so both formulations reduce
    to total wait minus total allowance.  ``tier_alphas`` keeps the per-tier
    attribution for differentiated analyses.
    """

    job_id: int
    arrival: float
    completion: float
    total_exec: float
    waits: tuple[float, ...]
    total_wait: float
    response_time: float
    alpha: float
    cost: float
    tier_alphas: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class SimReport:
    """Per-job outcomes of a drained simulation plus violation totals."""

    outcomes: dict[int, JobOutcome]
    total_signed: float
    total_violation: float
    total_cost: float
    max_violation: float

    @property
    def job_count(self) -> int:
        return len(self.outcomes)

    @property
    def mean_violation(self) -> float:
        return self.total_violation / len(self.outcomes) if self.outcomes else 0.0

    @property
    def mean_wait(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.total_wait for o in self.outcomes.values()) / len(self.outcomes)


class Simulator:
    """Drives a job set through the tiered environment.

    ``policy`` assigns arriving jobs to queues (least-backlog FCFS by
    default).  ``optimizer``, when given, is called with a frozen snapshot
    after qualifying events and may return a replacement schedule; invalid
    schedules are rejected and logged, never installed.
    """

    def __init__(self, jobs: JobSet, env: EnvironmentConfig,
                 policy: AssignmentPolicy | PolicyKind | str | None = None,
                 *,
                 optimizer=None,
                 reschedule_on: tuple[str, ...] = ("arrive", "finish"),
                 reschedule_every: int = 1,
                 keep_trace: bool = False):
        if jobs.num_tiers not in (0, env.num_tiers):
            raise ValueError("job tier count does not match the environment")
        self.jobs = jobs
        self.env = env
        if policy is None:
            policy = PolicyKind.FCFS
        if not isinstance(policy, AssignmentPolicy):
            policy = make_policy(policy, env)
        self.policy = policy
        self.optimizer = optimizer
        self.reschedule_on = tuple(reschedule_on)
        self.reschedule_every = max(1, int(reschedule_every))
        self.keep_trace = keep_trace
        self.trace: list[TraceEvent] = []

        self.clock = 0.0
        self._queues: list[list[list[int]]] = [
            [[] for _ in range(m)] for m in env.resources_per_tier]
        # (job_id, start, end) per resource while mid-service
        self._busy: list[list[tuple[int, float, float] | None]] = [
            [None] * m for m in env.resources_per_tier]
        self._states: dict[int, _JobState] = {}
        self._events: list[tuple[float, int, int, int]] = []
        self.arrived = [0] * env.num_tiers
        self.departed = 0
        self.external_arrivals = 0
        self._in_flight = [0] * env.num_tiers
        self._since_reschedule = 0

        for job in jobs:
            heapq.heappush(self._events, (job.arrival, _ARRIVAL, job.id, 0))

    # ------------------------------------------------------------------
    # read API (used by policies, reports, and tests)

    @property
    def done(self) -> bool:
        return not self._events

    def queue(self, tier: int, k: int) -> tuple[int, ...]:
        return tuple(self._queues[tier][k])

    def queue_count(self, tier: int, k: int) -> int:
        return len(self._queues[tier][k])

    def is_busy(self, tier: int, k: int) -> bool:
        return self._busy[tier][k] is not None

    def residual(self, tier: int, k: int) -> float:
        entry = self._busy[tier][k]
        return 0.0 if entry is None else max(0.0, entry[2] - self.clock)

    def backlog(self, tier: int, k: int) -> float:
        """Unfinished work in a queue: in-service residual plus waiting work."""
        total = self.residual(tier, k)
        queue = self._queues[tier][k]
        start = 1 if self._busy[tier][k] is not None else 0
        for jid in queue[start:]:
            total += self.jobs.job(jid).exec_times[tier]
        return total

    # ------------------------------------------------------------------
    # event processing

    def step(self) -> bool:
        """Process the next pending event; False when none remain."""
        if not self._events:
            return False
        time, rank, job_id, tier = heapq.heappop(self._events)
        assert time >= self.clock - TIME_EPS, "event times must not decrease"
        self.clock = time
        if rank == _COMPLETION:
            self._handle_completion(job_id, tier)
            self._maybe_reschedule("finish")
        else:
            self._handle_arrival(job_id, tier)
            self._maybe_reschedule("arrive")
        return True

    def run(self, *, until_time: float | None = None,
            until_external_arrivals: int | None = None) -> "Simulator":
        """Process events until drained or a stopping condition is met."""
        while self._events:
            if until_time is not None and self._events[0][0] > until_time:
                break
            self.step()
            if (until_external_arrivals is not None
                    and self.external_arrivals >= until_external_arrivals):
                break
        return self

    def _trace(self, kind: str, job_id: int, tier: int, resource: int) -> None:
        if self.keep_trace:
            self.trace.append(TraceEvent(self.clock, kind, job_id, tier, resource))

    def _handle_arrival(self, job_id: int, tier: int) -> None:
        state = self._states.get(job_id)
        if state is None:
            state = self._states[job_id] = _JobState()
            self.external_arrivals += 1
        else:
            self._in_flight[tier - 1] -= 1
        state.tier = tier
        state.tier_arrivals.append(self.clock)
        self.arrived[tier] += 1

        k, pos = self.policy.assign(self, job_id, tier)
        queue = None
        if 0 <= k < self.env.resources_per_tier[tier]:
            queue = self._queues[tier][k]
            min_pos = 1 if self._busy[tier][k] is not None else 0
            if not min_pos <= pos <= len(queue):
                queue = None
        if queue is None:
            raise InvalidScheduleError(
                f"policy returned invalid placement ({k}, {pos}) for job "
                f"{job_id} at tier {tier}")
        queue.insert(pos, job_id)
        state.resource = k
        state.in_queue = True
        self._trace("arrive", job_id, tier, k)
        self._try_start(tier, k)

    def _handle_completion(self, job_id: int, tier: int) -> None:
        state = self._states[job_id]
        k = state.resource
        entry = self._busy[tier][k]
        assert entry is not None and entry[0] == job_id, "completion out of order"
        queue = self._queues[tier][k]
        assert queue and queue[0] == job_id
        queue.pop(0)
        self._busy[tier][k] = None
        state.in_service = False
        state.in_queue = False
        state.departures.append(self.clock)
        self._trace("finish", job_id, tier, k)
        if tier + 1 < self.env.num_tiers:
            self._in_flight[tier] += 1
            heapq.heappush(self._events, (self.clock, _ARRIVAL, job_id, tier + 1))
        else:
            state.done = True
            self.departed += 1
            self._trace("depart", job_id, tier, k)
        self._try_start(tier, k)

    def _try_start(self, tier: int, k: int) -> None:
        if self._busy[tier][k] is not None:
            return
        queue = self._queues[tier][k]
        if not queue:
            return
        head = queue[0]
        state = self._states[head]
        state.waits.append(self.clock - state.tier_arrivals[-1])
        state.in_service = True
        state.resource = k
        end = self.clock + self.jobs.job(head).exec_times[tier]
        self._busy[tier][k] = (head, self.clock, end)
        heapq.heappush(self._events, (end, _COMPLETION, head, tier))
        self._trace("start", head, tier, k)

    def _maybe_reschedule(self, kind: str) -> None:
        if self.optimizer is None or kind not in self.reschedule_on:
            return
        self._since_reschedule += 1
        if self._since_reschedule < self.reschedule_every:
            return
        self._since_reschedule = 0
        candidate = self.optimizer(self.snapshot())
        self.install_schedule(candidate)

    # ------------------------------------------------------------------
    # rescheduling

    def install_schedule(self, schedule: Schedule) -> bool:
        """Replace the waiting orders with those of a candidate schedule.

        The candidate is validated against the live state first; in-service
        jobs must stay pinned and per-tier waiting sets must be preserved.
        Invalid candidates are rejected (logged, previous schedule kept).
        Newly non-empty queues on idle resources begin service immediately.
        """
        report = validate_schedule(schedule, self.env, self.jobs,
                                   snapshot=self.snapshot())
        if not report.ok:
            self._trace("reject", 0, -1, -1)
            return False
        for tier, k in self.env.iter_queues():
            entry = self._busy[tier][k]
            head = [entry[0]] if entry is not None else []
            self._queues[tier][k] = head + list(schedule.waiting(tier, k))
        for tier, k in self.env.iter_queues():
            self._try_start(tier, k)
        self._trace("reschedule", 0, -1, -1)
        return True

    # ------------------------------------------------------------------
    # snapshots and reports

    def snapshot(self) -> Snapshot:
        """Immutable view of the current queues and per-job progress."""
        orders = tuple(
            tuple(tuple(q) for q in tier_queues) for tier_queues in self._queues)
        busy = tuple(
            tuple(None if b is None else max(0.0, b[2] - self.clock)
                  for b in tier_busy)
            for tier_busy in self._busy)
        progress: dict[int, JobProgress] = {}
        for jid, state in self._states.items():
            if state.done or not state.in_queue:
                continue
            if state.in_service:
                elapsed = state.waits[state.tier]
                start = self._busy[state.tier][state.resource]
                service_start = start[1] if start else None
            else:
                elapsed = self.clock - state.tier_arrivals[-1]
                service_start = None
            progress[jid] = JobProgress(
                job_id=jid,
                tier=state.tier,
                tier_arrivals=tuple(state.tier_arrivals),
                completed_waits=tuple(state.waits[:state.tier]),
                departures=tuple(state.departures),
                elapsed_wait=elapsed,
                in_service=state.in_service,
                service_start=service_start,
            )
        return Snapshot(env=self.env, jobs=self.jobs, clock=self.clock,
                        schedule=Schedule(orders=orders, busy=busy),
                        progress=progress)

    def assert_invariants(self) -> None:
        """Raise if conservation or work-conservation is broken."""
        for tier in range(self.env.num_tiers):
            resident = sum(len(q) for q in self._queues[tier])
            in_flight = self._in_flight[tier]
            passed_on = (self.arrived[tier + 1]
                         if tier + 1 < self.env.num_tiers else self.departed)
            if self.arrived[tier] != resident + in_flight + passed_on:
                raise AssertionError(
                    f"tier {tier}: {self.arrived[tier]} arrived but "
                    f"{resident} resident + {in_flight} in flight + "
                    f"{passed_on} moved on")
            for k, queue in enumerate(self._queues[tier]):
                busy = self._busy[tier][k]
                if queue and busy is None:
                    raise AssertionError(
                        f"tier {tier} resource {k}: idle with waiting jobs")
                if busy is not None and (not queue or queue[0] != busy[0]):
                    raise AssertionError(
                        f"tier {tier} resource {k}: in-service job is not "
                        f"the queue head")

    def waits_of(self, job_id: int) -> tuple[float, ...]:
        return tuple(self._states[job_id].waits)

    def report(self, model: PenaltyModel | None = None) -> SimReport:
        """Realized outcomes for every completed job."""
        model = model or PenaltyModel.from_env(self.env)
        outcomes: dict[int, JobOutcome] = {}
        for job in self.jobs:
            state = self._states.get(job.id)
            if state is None or not state.done:
                continue
            waits = tuple(state.waits)
            total_wait = sum(waits)
            completion = state.departures[-1]
            alpha = total_wait - job.allowance
            tier_alphas = tuple(
                (j, waits[j] - differentiated_allowance(job, j))
                for j in range(self.env.num_tiers))
            outcomes[job.id] = JobOutcome(
                job_id=job.id,
                arrival=job.arrival,
                completion=completion,
                total_exec=job.total_exec,
                waits=waits,
                total_wait=total_wait,
                response_time=completion - job.arrival,
                alpha=alpha,
                cost=penalty(alpha, model),
                tier_alphas=tier_alphas,
            )
        signed = sum(o.alpha for o in outcomes.values())
        positive = sum(max(o.alpha, 0.0) for o in outcomes.values())
        cost = sum(o.cost for o in outcomes.values())
        worst = max((max(o.alpha, 0.0) for o in outcomes.values()), default=0.0)
        return SimReport(outcomes=outcomes, total_signed=signed,
                         total_violation=positive, total_cost=cost,
                         max_violation=worst)

    def trace_lines(self) -> list[str]:
        return [f"# tiersched-trace {TRACE_VERSION}"] + [
            ev.line() for ev in self.trace]


def run_to_completion(jobs: JobSet, env: EnvironmentConfig,
                      policy=None, *, model: PenaltyModel | None = None,
                      optimizer=None, reschedule_every: int = 1,
                      keep_trace: bool = False) -> SimReport:
    """Drain a job set through the environment and report realized outcomes."""
    sim = Simulator(jobs, env, policy, optimizer=optimizer,
                    reschedule_every=reschedule_every, keep_trace=keep_trace)
    sim.run()
    return sim.report(model=model)


def simulate_to_snapshot(jobs: JobSet, env: EnvironmentConfig,
                         policy=None) -> Snapshot:
    """Run until every external arrival has been processed, then freeze.

    This is the canonical way to produce optimization instances: the stream
    has fully arrived, queues are loaded, and no future arrival can disturb
    the frozen schedule.
    """
    sim = Simulator(jobs, env, policy)
    sim.run(until_external_arrivals=len(jobs))
    return sim.snapshot()
