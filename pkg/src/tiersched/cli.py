"""Experiment harness: generate workloads, run one policy, compare policies.

Outputs come in pairs: human-readable tables on stdout and versioned
line-delimited JSON records for machines.  Every summary number can be
re-derived from the per-job records.  All user-facing tier and resource
numbers are 1-based; ids and seeds are echoed so runs can be reproduced.

Exit codes: 0 success, 2 usage error, 3 unreadable or invalid input,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from pathlib import Path

from .baselines import PolicyKind, make_policy
from .ga import GAConfig, QueueVariant, evolve
from .model import EnvironmentConfig, InvalidScheduleError, Snapshot
from .penalty import AllowanceMode, PenaltyModel, ViolationBreakdown, total_penalty
from .sim import Simulator, simulate_to_snapshot
from .workload import WorkloadFormatError, WorkloadSpec, generate, load, save

BASELINES = ("fcfs", "wrr", "wlc", "random")
GA_POLICIES = ("ga-virtualized", "ga-segmented")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4

ENV_PREFIX = "TIERSCHED_"


def _env_default(flag: str, fallback):
    value = os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"))
    return value if value is not None else fallback


def _parse_resources(text: str | int, tiers: int) -> tuple[int, ...]:
    if isinstance(text, int):
        return (text,) * tiers
    parts = [p for p in str(text).replace(",", " ").split() if p]
    counts = tuple(int(p) for p in parts)
    if len(counts) == 1:
        return counts * tiers
    return counts


def _add_workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jobs", type=int, default=_env_default("jobs", None),
                   help="number of jobs to draw")
    p.add_argument("--lambda", dest="arrival_rate", type=float,
                   default=_env_default("lambda", None),
                   help="Poisson arrival rate (jobs per time unit)")
    p.add_argument("--mu", type=float, default=_env_default("mu", 1.0),
                   help="exponential service rate per resource")
    p.add_argument("--allowance", type=float,
                   default=_env_default("allowance", 0.20),
                   help="waiting allowance as a fraction of total execution time")
    p.add_argument("--seed", type=int, default=_env_default("seed", 0),
                   help="workload seed")


def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tiers", type=int, default=_env_default("tiers", 2))
    p.add_argument("--resources", default=_env_default("resources", "3"),
                   help="resources per tier: one count or a comma list")
    p.add_argument("--nu", type=float, default=_env_default("nu", 0.01),
                   help="penalty curve scaling factor")
    p.add_argument("--chi", type=float, default=_env_default("chi", 1.0),
                   help="penalty curve monetary ceiling")


def _add_ga_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--population", type=int, default=_env_default("population", 10))
    p.add_argument("--generations", type=int,
                   default=_env_default("generations", 1000))
    p.add_argument("--ga-seed", type=int, default=None,
                   help="genetic search seed (defaults to the workload seed)")
    p.add_argument("--epoch", type=int, default=0,
                   help="online rescheduling cadence in events; 0 optimizes "
                        "one frozen snapshot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiersched",
        description="Multi-tier job scheduling testbed: penalty-aware "
                    "genetic scheduling vs WRR/WLC baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic workload file")
    _add_workload_flags(p_gen)
    p_gen.add_argument("--tiers", type=int, default=_env_default("tiers", 2))
    p_gen.add_argument("--out", default="workload.txt")
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="run one policy and report violations")
    _add_workload_flags(p_run)
    _add_env_flags(p_run)
    _add_ga_flags(p_run)
    p_run.add_argument("--workload", help="workload file (overrides generation flags)")
    p_run.add_argument("--policy", default="fcfs",
                       choices=BASELINES + GA_POLICIES)
    p_run.add_argument("--mode", default="total", choices=["total", "per-tier"],
                       help="allowance formulation the scheduler optimizes")
    p_run.add_argument("--initial-policy", default="fcfs", choices=BASELINES,
                       help="arrival assignment used to build the snapshot "
                            "a genetic policy starts from")
    p_run.add_argument("--out-dir", default="run-out")
    p_run.add_argument("--trace", action="store_true",
                       help="also write the event trace")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="run several policies over seed sweeps")
    _add_workload_flags(p_cmp)
    _add_env_flags(p_cmp)
    _add_ga_flags(p_cmp)
    p_cmp.add_argument("--policies", nargs="+", required=True,
                       help="policy names; genetic ones accept a ':total' or "
                            "':per-tier' suffix")
    p_cmp.add_argument("--seeds", nargs="+", type=int, default=None,
                       help="workload seeds (defaults to --seed)")
    p_cmp.add_argument("--mode", default="total", choices=["total", "per-tier"],
                       help="allowance mode for unsuffixed genetic policies")
    p_cmp.add_argument("--initial-policy", default="fcfs", choices=BASELINES,
                       help="arrival assignment behind every genetic row")
    p_cmp.add_argument("--out-dir", default="compare-out")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


class SystemExit2(Exception):
    """Usage error discovered after argparse (still exits with code 2)."""


def _require_workload_flags(args) -> None:
    missing = []
    if args.jobs is None:
        missing.append("--jobs")
    if args.arrival_rate is None:
        missing.append("--lambda")
    if missing:
        raise SystemExit2(f"missing required flags: {', '.join(missing)}")


def _workload(args, env: EnvironmentConfig):
    if getattr(args, "workload", None):
        return load(args.workload)
    _require_workload_flags(args)
    spec = WorkloadSpec(
        arrival_rate=float(args.arrival_rate),
        num_jobs=int(args.jobs),
        service_rate=float(args.mu),
        allowance_fraction=float(args.allowance),
        seed=int(args.seed),
    )
    return generate(spec, env)


def _environment(args) -> EnvironmentConfig:
    tiers = int(args.tiers)
    return EnvironmentConfig(
        num_tiers=tiers,
        resources_per_tier=_parse_resources(args.resources, tiers),
        chi=float(args.chi),
        nu=float(args.nu),
        allowance_fraction=float(args.allowance),
    )


def cmd_generate(args) -> int:
    _require_workload_flags(args)
    env = EnvironmentConfig(num_tiers=int(args.tiers),
                            resources_per_tier=1)
    spec = WorkloadSpec(
        arrival_rate=float(args.arrival_rate),
        num_jobs=int(args.jobs),
        service_rate=float(args.mu),
        allowance_fraction=float(args.allowance),
        seed=int(args.seed),
    )
    jobs = generate(spec, env)
    save(jobs, args.out)
    print(f"wrote {len(jobs)} jobs to {args.out} "
          f"(lambda={spec.arrival_rate} mu={spec.service_rate} "
          f"allowance={spec.allowance_fraction} seed={spec.seed})")
    return EXIT_OK


def _parse_ga_token(token: str, default_mode: str):
    """Split 'ga-virtualized:per-tier' into (variant, mode); None if baseline."""
    base, _, suffix = token.partition(":")
    if base not in GA_POLICIES:
        return None
    mode = suffix or default_mode
    if mode not in ("total", "per-tier"):
        raise SystemExit2(f"unknown allowance mode {mode!r} in {token!r}")
    variant = (QueueVariant.VIRTUALIZED if base == "ga-virtualized"
               else QueueVariant.SEGMENTED)
    return variant, AllowanceMode(mode)


def _job_records(breakdown: ViolationBreakdown, snapshot: Snapshot,
                 schedule, phase: str) -> list[dict]:
    from .penalty import expected_wait_multitier

    records = []
    for jid in sorted(breakdown.per_job):
        v = breakdown.per_job[jid]
        prog = snapshot.progress[jid]
        job = snapshot.jobs.job(jid)
        expected_wait = expected_wait_multitier(prog, schedule, snapshot.jobs)
        records.append({
            "schema": "tiersched.job/1",
            "phase": phase,
            "job": jid,
            "tier": prog.tier + 1,
            "status": "in_service" if prog.in_service else "waiting",
            "alpha": v.alpha,
            "cost": v.cost,
            "waits": list(prog.completed_waits) + [prog.elapsed_wait],
            "expected_rt": job.total_exec + expected_wait,
        })
    return records


def _write_jsonl(path: Path, records) -> None:
    with path.open("w", encoding="ascii") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _improvement(initial: float, enhanced: float) -> float:
    if initial <= 0:
        return 0.0
    return 100.0 * (initial - enhanced) / initial


def _snapshot_counts(snapshot: Snapshot) -> dict:
    per_tier = [len([j for j, p in snapshot.progress.items() if p.tier == t])
                for t in range(snapshot.env.num_tiers)]
    return {
        "resident": len(snapshot.progress),
        "waiting": len(snapshot.waiting_ids()),
        "per_tier": per_tier,
    }


def cmd_run(args) -> int:
    env = _environment(args)
    jobs = _workload(args, env)
    mode = AllowanceMode(args.mode)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ga_spec = _parse_ga_token(args.policy, args.mode)

    if ga_spec and args.epoch > 0:
        return _run_online(args, env, jobs, ga_spec, out_dir)

    arrival = args.initial_policy if ga_spec else args.policy
    sim = Simulator(jobs, env, make_policy(arrival, env, seed=int(args.seed)),
                    keep_trace=args.trace)
    sim.run(until_external_arrivals=len(jobs))
    snapshot = sim.snapshot()

    initial = total_penalty(snapshot, mode)
    history = []
    evaluations = 0
    if ga_spec:
        variant, ga_mode = ga_spec
        config = GAConfig(
            population=int(args.population),
            generations=int(args.generations),
            variant=variant,
            mode=ga_mode,
            seed=int(args.ga_seed if args.ga_seed is not None else args.seed),
        )
        result = evolve(snapshot, config)
        enhanced = total_penalty(snapshot, mode, schedule=result.best_schedule)
        history = result.history
        evaluations = result.evaluations
    else:
        enhanced = initial

    summary = {
        "schema": "tiersched.run-summary/1",
        "policy": args.policy,
        "mode": mode.value,
        "arrival_policy": arrival,
        "seed": int(args.seed),
        "snapshot_clock": snapshot.clock,
        "counts": _snapshot_counts(snapshot),
        "initial": {
            "violation": initial.total_violation,
            "penalty": initial.total_cost,
            "signed": initial.total_signed,
            "max_violation": initial.max_violation,
        },
        "enhanced": {
            "violation": enhanced.total_violation,
            "penalty": enhanced.total_cost,
            "signed": enhanced.total_signed,
            "max_violation": enhanced.max_violation,
        },
        "improvement": {
            "violation_pct": _improvement(initial.total_violation,
                                          enhanced.total_violation),
            "penalty_pct": _improvement(initial.total_cost,
                                        enhanced.total_cost),
        },
        "evaluations": evaluations,
    }
    final_schedule = (result.best_schedule if ga_spec else snapshot.schedule)
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="ascii")
    _write_jsonl(out_dir / "jobs.jsonl",
                 _job_records(initial, snapshot, snapshot.schedule, "initial")
                 + _job_records(enhanced, snapshot, final_schedule, "enhanced"))
    if history:
        _write_jsonl(out_dir / "history.jsonl", (
            {"schema": "tiersched.history/1", "generation": h.generation,
             "best": h.best, "mean": h.mean} for h in history))
    if args.trace:
        (out_dir / "trace.txt").write_text(
            "\n".join(sim.trace_lines()) + "\n", encoding="ascii")

    print(f"policy {args.policy} mode {mode.value} "
          f"({summary['counts']['resident']} resident jobs at "
          f"t={snapshot.clock:.3f})")
    print(f"{'':14}{'violation':>12} {'penalty':>10} {'max':>10}")
    for phase, bd in (("initial", initial), ("enhanced", enhanced)):
        print(f"{phase:<14}{bd.total_violation:>12.3f} "
              f"{bd.total_cost:>10.4f} {bd.max_violation:>10.3f}")
    print(f"{'improvement':<14}"
          f"{summary['improvement']['violation_pct']:>11.2f}% "
          f"{summary['improvement']['penalty_pct']:>9.2f}%")
    print(f"records in {out_dir}")
    return EXIT_OK


def _run_online(args, env, jobs, ga_spec, out_dir: Path) -> int:
    """Online variant: re-run the genetic search at a fixed event cadence."""
    variant, ga_mode = ga_spec
    config = GAConfig(
        population=int(args.population),
        generations=int(args.generations),
        variant=variant,
        mode=ga_mode,
        seed=int(args.ga_seed if args.ga_seed is not None else args.seed),
    )
    arrival = args.initial_policy

    def optimizer(snapshot: Snapshot):
        return evolve(snapshot, config).best_schedule

    baseline = Simulator(jobs, env, make_policy(arrival, env)).run().report()
    optimized = Simulator(jobs, env, make_policy(arrival, env),
                          optimizer=optimizer,
                          reschedule_every=int(args.epoch)).run().report()

    summary = {
        "schema": "tiersched.run-summary/1",
        "policy": args.policy,
        "mode": ga_mode.value,
        "arrival_policy": arrival,
        "seed": int(args.seed),
        "online_epoch": int(args.epoch),
        "counts": {"completed": optimized.job_count},
        "initial": {
            "violation": baseline.total_violation,
            "penalty": baseline.total_cost,
            "signed": baseline.total_signed,
            "max_violation": baseline.max_violation,
        },
        "enhanced": {
            "violation": optimized.total_violation,
            "penalty": optimized.total_cost,
            "signed": optimized.total_signed,
            "max_violation": optimized.max_violation,
        },
        "improvement": {
            "violation_pct": _improvement(baseline.total_violation,
                                          optimized.total_violation),
            "penalty_pct": _improvement(baseline.total_cost,
                                        optimized.total_cost),
        },
        "evaluations": 0,
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="ascii")
    records = []
    for phase, report in (("initial", baseline), ("enhanced", optimized)):
        for jid in sorted(report.outcomes):
            o = report.outcomes[jid]
            records.append({
                "schema": "tiersched.job/1", "phase": phase, "job": jid,
                "status": "departed", "alpha": o.alpha, "cost": o.cost,
                "response_time": o.response_time, "total_wait": o.total_wait,
            })
    _write_jsonl(out_dir / "jobs.jsonl", records)
    print(f"online {args.policy}: violation "
          f"{baseline.total_violation:.3f} -> {optimized.total_violation:.3f} "
          f"({summary['improvement']['violation_pct']:.2f}% better)")
    return EXIT_OK


def cmd_compare(args) -> int:
    env = _environment(args)
    seeds = args.seeds if args.seeds else [int(args.seed)]
    if len(seeds) < 1:
        raise SystemExit2("need at least one seed")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    run_records = []
    job_records = []
    per_policy: dict[str, list[dict]] = {p: [] for p in args.policies}
    for seed in seeds:
        spec = WorkloadSpec(
            arrival_rate=float(args.arrival_rate),
            num_jobs=int(args.jobs),
            service_rate=float(args.mu),
            allowance_fraction=float(args.allowance),
            seed=int(seed),
        )
        jobs = generate(spec, env)
        ga_snapshot = None
        for token in args.policies:
            ga_spec = _parse_ga_token(token, args.mode)
            if ga_spec is None:
                if token not in BASELINES:
                    raise SystemExit2(f"unknown policy {token!r}")
                snapshot = simulate_to_snapshot(
                    jobs, env, make_policy(token, env, seed=int(seed)))
                bd = total_penalty(snapshot, AllowanceMode.TOTAL)
                row_mode = AllowanceMode.TOTAL
            else:
                if ga_snapshot is None:
                    ga_snapshot = simulate_to_snapshot(
                        jobs, env,
                        make_policy(args.initial_policy, env, seed=int(seed)))
                snapshot = ga_snapshot
                variant, row_mode = ga_spec
                config = GAConfig(
                    population=int(args.population),
                    generations=int(args.generations),
                    variant=variant,
                    mode=row_mode,
                    seed=int(args.ga_seed if args.ga_seed is not None else seed),
                )
                result = evolve(snapshot, config)
                bd = total_penalty(snapshot, row_mode,
                                   schedule=result.best_schedule)
            entry = {
                "schema": "tiersched.compare-run/1",
                "policy": token,
                "seed": int(seed),
                "mode": row_mode.value,
                "violation_total": bd.total_violation,
                "violation_mean": bd.mean_violation,
                "violation_max": bd.max_violation,
                "penalty_total": bd.total_cost,
                "jobs": bd.job_count,
            }
            run_records.append(entry)
            per_policy[token].append(entry)
            for jid in sorted(bd.per_job):
                v = bd.per_job[jid]
                job_records.append({
                    "schema": "tiersched.compare-job/1", "policy": token,
                    "seed": int(seed), "job": jid, "alpha": v.alpha,
                    "cost": v.cost,
                })

    _write_jsonl(out_dir / "runs.jsonl", run_records)
    _write_jsonl(out_dir / "jobs.jsonl", job_records)

    header = f"{'policy':<28}{'total':>12}{'mean':>10}{'max':>10}"
    lines = [header, "-" * len(header)]
    for token in args.policies:
        entries = per_policy[token]
        total = statistics.median(e["violation_total"] for e in entries)
        mean = statistics.median(e["violation_mean"] for e in entries)
        worst = statistics.median(e["violation_max"] for e in entries)
        lines.append(f"{token:<28}{total:>12.3f}{mean:>10.3f}{worst:>10.3f}")
    table = "\n".join(lines)
    (out_dir / "table.txt").write_text(table + "\n", encoding="ascii")
    print(f"median violation over {len(seeds)} seed(s)")
    print(table)
    print(f"records in {out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit2 as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (WorkloadFormatError, FileNotFoundError, ValueError) as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (InvalidScheduleError, AssertionError) as err:
        print(f"internal error: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
