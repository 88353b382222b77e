"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL/SKIP line that is printed in the terminal
summary.  Criteria 1-3 need the released dataset; point ``BIDSIM_DATASET``
at its directory to run them.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from bidsim.assignment import AssignmentProblem, solve, solve_relaxed
from bidsim.cli import main
from bidsim.dataset import load_dataset
from bidsim.harness import OVERALL, ExperimentConfig, default_jobs, run_experiment
from bidsim.model import ConferenceInstance, Paper, ReviewerProfile, Taxonomy, build_similarity_matrix
from bidsim.strategies import GENERATED_STRATEGIES, StrategyKind, extract_stats, generate_honest_bids

import test_detection as det
from conftest import ACCEPTANCE_RESULTS, DATASET_ENV, MINI_DIR, random_bids, random_instance, released_dataset_dir

pytestmark = pytest.mark.acceptance


class Criterion:
    """Collects named checks; records PASS only when every check holds."""

    def __init__(self, number):
        self.number = number
        self.failures = []
        self.notes = []

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)
        return ok

    def note(self, message):
        self.notes.append(message)

    def finish(self):
        if self.failures:
            ACCEPTANCE_RESULTS[self.number] = ("FAIL", "; ".join(self.failures))
            pytest.fail("; ".join(self.failures))
        ACCEPTANCE_RESULTS[self.number] = ("PASS", "; ".join(self.notes) or "all checks hold")


def need_dataset(number):
    path = released_dataset_dir()
    if path is None:
        reason = f"released dataset not available; set {DATASET_ENV} to its directory"
        ACCEPTANCE_RESULTS[number] = ("SKIP", reason)
        pytest.skip(reason)
    return load_dataset(path)


_REAL_REPORT = {}


def real_report(dataset):
    if "report" not in _REAL_REPORT:
        start = time.perf_counter()
        report = run_experiment(dataset, ExperimentConfig(trials=100, master_seed=7), jobs=default_jobs())
        _REAL_REPORT["report"] = (report, time.perf_counter() - start)
    return _REAL_REPORT["report"]


def test_criterion_1_real_success():
    dataset = need_dataset(1)
    c = Criterion(1)
    report, seconds = real_report(dataset)
    success = {s.label: report.get("success", s.label).mean for s in StrategyKind if _has(report, "success", s.label)}
    c.note("success " + ", ".join(f"{k}={v:.3f}" for k, v in success.items()) + f", {seconds:.1f}s")
    c.check(success.get("Basic") == 1.0, f"Basic success {success.get('Basic')} != 1.0")
    c.check(success.get("Negative-in-area") == 1.0, f"Negative-in-area success {success.get('Negative-in-area')} != 1.0")
    overlap = success.get("Overlap", math.nan)
    c.check(overlap <= 0.3, f"Overlap success {overlap} > 0.3")
    c.check(all(overlap < v for k, v in success.items() if k != "Overlap"), "Overlap is not strictly the lowest")
    c.check(success.get("Cycle", 0) >= 0.9, f"Cycle success {success.get('Cycle')} < 0.9")
    c.check(seconds < 60, f"runtime {seconds:.1f}s >= 60s")
    c.finish()


def _has(report, metric, strategy):
    try:
        report.get(metric, strategy)
        return True
    except KeyError:
        return False


def test_criterion_2_real_detection():
    dataset = need_dataset(2)
    c = Criterion(2)
    report, _ = real_report(dataset)
    counting = report.get("rank_counting", OVERALL).mean
    ring = report.get("rank_ring", OVERALL).mean
    lowrank = report.get("rank_lowrank", OVERALL).mean
    c.note(f"overall mean rank counting={counting:.2f} ring={ring:.2f} lowrank={lowrank:.2f}")
    c.check(5 <= counting <= 9, f"counting overall rank {counting:.2f} outside [5, 9]")
    c.check(11.5 <= ring <= 15.5, f"ring overall rank {ring:.2f} outside [11.5, 15.5]")
    c.check(11.5 <= lowrank <= 15.5, f"low-rank overall rank {lowrank:.2f} outside [11.5, 15.5]")
    nia = report.get("rank_counting", "Negative-in-area").mean
    basic = report.get("rank_counting", "Basic").mean
    c.check(nia < basic, f"counting rank Negative-in-area {nia:.2f} not below Basic {basic:.2f}")
    c.finish()


def _synthetic(dataset, sizes, ns, trials=100, strategies=GENERATED_STRATEGIES):
    config = ExperimentConfig(
        mode="synthetic", trials=trials, master_seed=7, group_sizes=sizes, ns=ns, strategies=tuple(strategies)
    )
    return run_experiment(dataset, config, jobs=default_jobs())


@pytest.mark.slow
def test_criterion_3_synthetic_desk_scale():
    dataset = need_dataset(3)
    c = Criterion(3)
    report = _synthetic(dataset, (2, 3, 4), (500,))
    ring_ok = (StrategyKind.BASIC, StrategyKind.NEGATIVE_IN_AREA, StrategyKind.OVERLAP)
    for s in GENERATED_STRATEGIES:
        for g in (2, 3, 4):
            succ = report.get("success", s.label, g, 500).mean
            c.check(succ >= 0.9, f"{s.label} size {g}: success {succ:.3f} < 0.9")
            ring = report.get("normalized_rank_ring", s.label, g, 500).mean
            if s in ring_ok:
                c.check(ring <= 0.05, f"{s.label} size {g}: ring normalized rank {ring:.3f} > 0.05")
            elif g >= 3:
                c.check(ring >= 0.35, f"Cycle size {g}: ring normalized rank {ring:.3f} < 0.35")
            low = report.get("normalized_rank_lowrank", s.label, g, 500).mean
            c.check(low >= 0.4, f"{s.label} size {g}: low-rank normalized rank {low:.3f} < 0.4")
    trend = _synthetic(dataset, (4,), (100, 250, 500), strategies=ring_ok)
    for s in ring_ok:
        means = [trend.get("normalized_rank_ring", s.label, 4, n).mean for n in (100, 250, 500)]
        c.note(f"{s.label} ring trend {[round(m, 4) for m in means]}")
        c.check(all(a >= b for a, b in zip(means, means[1:])), f"{s.label}: ring rank increases with n {means}")
    c.finish()


@pytest.mark.slow
@pytest.mark.skipif(released_dataset_dir() is None, reason=f"released dataset not available ({DATASET_ENV})")
def test_criterion_3_full_scale_optional():
    dataset = load_dataset(released_dataset_dir())
    start = time.perf_counter()
    report = _synthetic(dataset, (2, 3, 4), (5000,))
    assert time.perf_counter() - start < 30 * 60
    for s in GENERATED_STRATEGIES:
        for g in (2, 3, 4):
            assert report.get("success", s.label, g, 5000).mean >= 0.9


def test_criterion_4_solver_oracles():
    c = Criterion(4)
    grid = np.array([0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0])
    exact = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        sim = rng.choice(grid, size=(5, 5))
        best = max(math.fsum(sim[r, p[r]] for r in range(5)) for p in itertools.permutations(range(5)))
        got = solve(AssignmentProblem(sim, frozenset(), 1, 1), seed).objective
        exact += c.check(got == best, f"5x5 seed {seed}: {got} != brute force {best}")
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(10_000 + seed)
        inst = random_instance(rng, 10, 10, paper_load=3, reviewer_load=3)
        problem = AssignmentProblem.from_instance(inst, build_similarity_matrix(inst, random_bids(rng, (10, 10))))
        gap = abs(solve(problem, seed).objective - solve_relaxed(problem)[1])
        worst = max(worst, gap)
        c.check(gap <= 1e-9, f"10x10 seed {seed}: |solve - LP| = {gap:.3g}")
    c.note(f"{exact}/100 5x5 exact, 20 10x10 max LP gap {worst:.1e}")
    c.finish()


def test_criterion_5_detector_properties():
    c = Criterion(5)
    properties = {
        "permutation-of-output": det.test_output_is_permutation,
        "own-paper invariance": det.test_own_paper_bids_are_ignored,
        "rank<=3 zero residual": det.test_low_rank_matrices_have_zero_residual,
        "planted-anomaly recovery": det.test_planted_anomaly_ranks_first,
        "ring category dominance": det.test_ring_unique_mutual_pair_dominates,
    }
    for name, prop in properties.items():
        failed = []
        for seed in range(50):
            try:
                prop(seed)
            except AssertionError:
                failed.append(seed)
        c.check(not failed, f"{name} failed for seeds {failed[:5]}")
    c.note(f"{len(properties)} properties x 50 seeds")
    c.finish()


def test_criterion_6_scaleup_example():
    c = Criterion(6)
    tax = Taxonomy.bundled()

    def instance(n_in, n_out):
        papers = tuple(Paper(i, tax.area(1 if i < n_in else 20), f"P{i}") for i in range(n_in + n_out))
        reviewer = ReviewerProfile(0, tuple(tax.area(a) for a in (0, 1, 2)), frozenset({0}))
        return ConferenceInstance(papers, (reviewer,), tax)

    old, new = instance(6, 22), instance(60, 220)
    row = np.zeros(28, dtype=np.int8)
    row[[2, 3]] = -1
    stats = extract_stats(old.reviewers[0], row, old)
    placed = generate_honest_bids(new.reviewers[0], new, stats, 280 / 28, np.random.default_rng(0))
    counts = extract_stats(new.reviewers[0], placed, new).as_tuple()
    c.check(stats.neg_in_topic == 2, f"model in-topic negatives {stats.neg_in_topic} != 2")
    c.check(counts == (0, 0, 20, 0), f"placed counts {counts} != (0, 0, 20, 0)")
    c.note(f"2 in-topic negatives at 28 papers -> {counts[2]} at 280")
    c.finish()


def _invoke(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def test_criterion_7_cli_determinism(tmp_path, capsys):
    c = Criterion(7)
    mini = MINI_DIR
    cases = {
        "validate": (["validate", "--dataset", mini], None),
        "ingest": (["ingest", "--dataset", mini, "--out", "{out}"], "setup.csv"),
        "gen": (["gen", "--dataset", mini, "--n", 60, "--group-size", 3, "--strategy", "Overlap", "--seed", 3, "--out", "{out}"], "honest_bidding.csv"),
        "assign": (["assign", "--dataset", mini, "--phase", "malicious", "--seed", 2, "--out", "{out}/a.csv"], "a.csv"),
        "detect": (["detect", "--dataset", mini, "--phase", "honest", "--out", "{out}/d.csv"], "d.csv"),
        "experiment-real": (["experiment", "--dataset", mini, "--trials", 8, "--seed", 7, "--jobs", "{jobs}", "--out", "{out}"], "report.csv"),
        "experiment-synthetic": (
            ["experiment", "--dataset", mini, "--mode", "synthetic", "--n", "40,60", "--sizes", "2,3", "--trials", 3,
             "--seed", 7, "--jobs", "{jobs}", "--out", "{out}"],
            "report.csv",
        ),
    }
    for name, (argv, artifact) in cases.items():
        outputs = []
        for k, jobs in enumerate((1, 2, 1)):
            out = tmp_path / f"{name}-{k}"
            out.mkdir()
            args = [str(a).format(out=out, jobs=jobs) for a in argv]
            code, stdout = _invoke(args, capsys)
            c.check(code == 0, f"{name} exited {code}")
            outputs.append(stdout.replace(str(out), "OUT") if artifact is None else (out / artifact).read_bytes())
            if name.startswith("experiment"):
                outputs[-1] += b"".join(p.read_bytes() for p in sorted(out.glob("*.svg")))
        c.check(outputs[0] == outputs[1] == outputs[2], f"{name}: outputs differ between runs or --jobs values")
    report_dir = tmp_path / "experiment-real-0"
    charts = [tmp_path / "charts-a", tmp_path / "charts-b"]
    for d in charts:
        _invoke(["report", "--input", report_dir / "report.csv", "--out", d], capsys)
    same = all((charts[0] / p.name).read_bytes() == p.read_bytes() for p in charts[1].iterdir())
    c.check(same, "report: charts differ between runs")
    c.note(f"{len(cases) + 1} commands repeated, experiments under --jobs 1 and 2")
    c.finish()
