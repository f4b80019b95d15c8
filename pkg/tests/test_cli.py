import json

import pytest

from tiersched.cli import main


def run_cli(*argv):
    return main(list(argv))


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


class TestGenerate:
    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        assert run_cli("generate", "--jobs", "100", "--lambda", "2.0",
                       "--seed", "7", "--out", str(a)) == 0
        assert run_cli("generate", "--jobs", "100", "--lambda", "2.0",
                       "--seed", "7", "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_generated_file_loads_back(self, tmp_path):
        from tiersched import load
        out = tmp_path / "w.txt"
        assert run_cli("generate", "--jobs", "100", "--lambda", "2.0",
                       "--out", str(out)) == 0
        assert len(load(out)) == 100

    def test_missing_jobs_is_usage_error(self, tmp_path):
        assert run_cli("generate", "--lambda", "2.0",
                       "--out", str(tmp_path / "w.txt")) == 2

    def test_missing_rate_is_usage_error(self, tmp_path):
        assert run_cli("generate", "--jobs", "10",
                       "--out", str(tmp_path / "w.txt")) == 2

    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as err:
            run_cli("generate", "--frobnicate")
        assert err.value.code == 2


class TestRun:
    def test_baseline_initial_equals_enhanced(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("run", "--jobs", "40", "--lambda", "4.0", "--seed", "3",
                       "--policy", "fcfs", "--out-dir", str(out)) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["initial"] == summary["enhanced"]
        assert summary["improvement"]["violation_pct"] == 0.0

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        dirs = [tmp_path / "r1", tmp_path / "r2"]
        for d in dirs:
            assert run_cli("run", "--jobs", "30", "--lambda", "5.0",
                           "--seed", "4", "--policy", "ga-virtualized",
                           "--generations", "60", "--out-dir", str(d)) == 0
        for name in ("summary.json", "jobs.jsonl", "history.jsonl"):
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()

    def test_genetic_run_improves_and_logs_history(self, tmp_path):
        out = tmp_path / "ga"
        assert run_cli("run", "--jobs", "60", "--lambda", "6.0", "--seed", "5",
                       "--policy", "ga-virtualized", "--generations", "200",
                       "--out-dir", str(out)) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["enhanced"]["violation"] <= summary["initial"]["violation"]
        assert summary["evaluations"] == 10 * 200
        history = read_jsonl(out / "history.jsonl")
        assert len(history) == 200
        bests = [h["best"] for h in history]
        assert all(b <= a + 1e-12 for a, b in zip(bests, bests[1:]))

    def test_summary_rederivable_from_job_records(self, tmp_path):
        out = tmp_path / "derive"
        assert run_cli("run", "--jobs", "50", "--lambda", "5.0", "--seed", "6",
                       "--policy", "ga-segmented", "--generations", "100",
                       "--mode", "per-tier", "--out-dir", str(out)) == 0
        summary = json.loads((out / "summary.json").read_text())
        records = read_jsonl(out / "jobs.jsonl")
        for phase in ("initial", "enhanced"):
            alphas = [r["alpha"] for r in records if r["phase"] == phase]
            costs = [r["cost"] for r in records if r["phase"] == phase]
            assert sum(max(a, 0.0) for a in alphas) == pytest.approx(
                summary[phase]["violation"], abs=1e-9)
            assert sum(costs) == pytest.approx(summary[phase]["penalty"],
                                               abs=1e-9)
            assert max((max(a, 0.0) for a in alphas), default=0.0) == \
                pytest.approx(summary[phase]["max_violation"], abs=1e-9)

    def test_workload_file_input(self, tmp_path):
        wl = tmp_path / "w.txt"
        assert run_cli("generate", "--jobs", "30", "--lambda", "4.0",
                       "--seed", "9", "--out", str(wl)) == 0
        out = tmp_path / "run"
        assert run_cli("run", "--workload", str(wl), "--policy", "wlc",
                       "--out-dir", str(out)) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["counts"]["resident"] >= 1

    def test_unreadable_workload_is_input_error(self, tmp_path):
        missing = tmp_path / "nope.txt"
        assert run_cli("run", "--workload", str(missing),
                       "--policy", "fcfs", "--out-dir",
                       str(tmp_path / "x")) == 3

    def test_malformed_workload_is_input_error(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("not a workload\n")
        assert run_cli("run", "--workload", str(bad), "--policy", "fcfs",
                       "--out-dir", str(tmp_path / "x")) == 3

    def test_online_mode(self, tmp_path):
        out = tmp_path / "online"
        assert run_cli("run", "--jobs", "25", "--lambda", "4.0", "--seed", "2",
                       "--policy", "ga-virtualized", "--generations", "20",
                       "--epoch", "4", "--out-dir", str(out)) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["online_epoch"] == 4
        assert summary["counts"]["completed"] == 25


class TestCompare:
    def test_table_shape_and_records(self, tmp_path):
        out = tmp_path / "cmp"
        assert run_cli("compare", "--jobs", "40", "--lambda", "4.0",
                       "--policies", "wrr", "wlc", "ga-virtualized:per-tier",
                       "--seeds", "1", "2", "--generations", "100",
                       "--out-dir", str(out)) == 0
        table = (out / "table.txt").read_text().splitlines()
        assert len(table) == 2 + 3
        runs = read_jsonl(out / "runs.jsonl")
        assert len(runs) == 3 * 2
        modes = {r["policy"]: r["mode"] for r in runs}
        assert modes["ga-virtualized:per-tier"] == "per-tier"
        assert modes["wrr"] == "total"

    def test_single_policy_single_seed_matches_run(self, tmp_path):
        cmp_out = tmp_path / "cmp"
        run_out = tmp_path / "run"
        assert run_cli("compare", "--jobs", "40", "--lambda", "4.0",
                       "--policies", "wlc", "--seeds", "5",
                       "--out-dir", str(cmp_out)) == 0
        assert run_cli("run", "--jobs", "40", "--lambda", "4.0", "--seed", "5",
                       "--policy", "wlc", "--out-dir", str(run_out)) == 0
        row = read_jsonl(cmp_out / "runs.jsonl")[0]
        summary = json.loads((run_out / "summary.json").read_text())
        assert row["violation_total"] == pytest.approx(
            summary["initial"]["violation"], abs=1e-9)
        assert row["violation_max"] == pytest.approx(
            summary["initial"]["max_violation"], abs=1e-9)

    def test_totals_rederivable_from_job_records(self, tmp_path):
        out = tmp_path / "cmp"
        assert run_cli("compare", "--jobs", "40", "--lambda", "5.0",
                       "--policies", "wrr", "ga-segmented", "--seeds", "3", "4",
                       "--generations", "80", "--out-dir", str(out)) == 0
        runs = read_jsonl(out / "runs.jsonl")
        jobs = read_jsonl(out / "jobs.jsonl")
        for row in runs:
            alphas = [r["alpha"] for r in jobs
                      if r["policy"] == row["policy"]
                      and r["seed"] == row["seed"]]
            assert len(alphas) == row["jobs"]
            assert sum(max(a, 0.0) for a in alphas) == pytest.approx(
                row["violation_total"], abs=1e-9)

    def test_unknown_policy_is_usage_error(self, tmp_path):
        assert run_cli("compare", "--jobs", "10", "--lambda", "2.0",
                       "--policies", "mystery", "--seeds", "1",
                       "--out-dir", str(tmp_path / "x")) == 2
