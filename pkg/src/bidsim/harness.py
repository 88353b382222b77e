"""Trial protocol and experiment aggregation.

Real mode resamples reviewers from the released responses: each trial takes
one colluding group's malicious responses and fills up to one reviewer per
paper with random honest responses.  Synthetic mode rebuilds a scaled-up
instance for every trial.  Every trial draws from its own seed derived from
(master seed, cell, trial index), so serial and parallel runs agree.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assignment import AssignmentProblem, solve, success_metric
from .dataset import STRATEGIES, Dataset, DatasetError
from .detection import DEFAULT_RANK, DETECTORS, DetectionInput, run_detector
from .model import ConferenceInstance, build_similarity_matrix
from .strategies import GENERATED_STRATEGIES, StrategyKind, SyntheticConfig, build_synthetic_instance

logger = logging.getLogger(__name__)

OVERALL = "Overall"
REPORT_COLUMNS = ["metric", "strategy", "group_size", "n", "mean", "sem", "trials", "count"]
_REAL, _SYNTHETIC = 0, 1


def trial_seed(master_seed: int, *keys: int) -> int:
    """A 63-bit seed that depends only on the master seed and the keys."""
    state = np.random.SeedSequence([int(master_seed), *map(int, keys)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 ^ int(state[1])


def trial_rng(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed(master_seed, *keys))


@dataclass(frozen=True)
class Population:
    """One trial's reviewers: ``source_ids[k]`` is the dataset id of trial reviewer ``k``."""

    instance: ConferenceInstance
    bids: np.ndarray
    source_ids: tuple[int, ...]
    malicious: tuple[int, ...]  # trial-local reviewer ids


@dataclass(frozen=True)
class TrialResult:
    malicious: tuple[int, ...]  # reviewer ids in the source dataset (real) or instance (synthetic)
    strategies: tuple[int | None, ...]
    success: tuple[bool, ...]
    ranks: Mapping[str, tuple[int, ...]]
    n_reviewers: int

    def normalized(self, detector: str) -> tuple[float, ...]:
        return tuple(r / self.n_reviewers for r in self.ranks[detector])


def evaluation_units(dataset: Dataset) -> list[tuple[int, ...]]:
    """Colluding groups and solo reviewers that have at least one malicious response.

    Members without a malicious response are dropped from their unit.
    """
    inst = dataset.instance
    units = []
    for gid in sorted(inst.groups):
        members = tuple(m for m in inst.groups[gid] if m in dataset.malicious)
        if members:
            units.append(members)
    for r in inst.reviewers:
        if r.group is None and r.target_papers and r.id in dataset.malicious:
            units.append((r.id,))
    return units


def build_trial_population(
    dataset: Dataset,
    members: Sequence[int],
    rng: np.random.Generator,
    size: int | None = None,
) -> Population:
    """Malicious responses of ``members`` plus distinct random honest fillers, shuffled."""
    size = dataset.instance.n_papers if size is None else size
    malicious = [m for m in members if m in dataset.malicious]
    if len(malicious) != len(members):
        raise DatasetError("every member must have a malicious response")
    pool = sorted(h for h in dataset.honest.reviewer_ids if h not in set(members))
    need = size - len(malicious)
    if need < 0 or need > len(pool):
        raise DatasetError(f"need {need} honest fillers but only {len(pool)} are available")
    fillers = [int(h) for h in rng.choice(pool, size=need, replace=False)] if need else []
    chosen = malicious + fillers
    order = rng.permutation(len(chosen))
    source_ids = tuple(chosen[k] for k in order)
    n_mal = len(malicious)
    rows = [
        dataset.malicious.row(chosen[k]) if k < n_mal else dataset.honest.row(chosen[k])
        for k in order
    ]
    bids = np.array(rows, dtype=np.int8).reshape(len(rows), dataset.instance.n_papers)
    local_malicious = tuple(i for i, k in enumerate(order) if k < n_mal)
    return Population(dataset.instance.subset(source_ids), bids, source_ids, local_malicious)


def run_success_trial(
    instance: ConferenceInstance, bids: np.ndarray, malicious: Sequence[int], tie_seed: int = 0
) -> tuple[bool, ...]:
    problem = AssignmentProblem.from_instance(instance, build_similarity_matrix(instance, bids))
    assignment = solve(problem, tie_seed)
    return tuple(success_metric(assignment, instance.reviewers[r]) for r in malicious)


def run_detection_trial(
    instance: ConferenceInstance,
    bids: np.ndarray,
    malicious: Sequence[int],
    detectors: Sequence[str] = DETECTORS,
    rank: int = DEFAULT_RANK,
) -> dict[str, tuple[int, ...]]:
    data = DetectionInput.from_instance(instance, bids)
    out = {}
    for name in detectors:
        ranks = run_detector(name, data, rank).ranks
        out[name] = tuple(int(ranks[r]) for r in malicious)
    return out


# -- trial execution ---------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "real"  # "real" or "synthetic"
    trials: int = 100
    master_seed: int = 0
    detectors: tuple[str, ...] = DETECTORS
    rank: int = DEFAULT_RANK
    paper_load: int = 3
    reviewer_load: int = 3
    # synthetic mode
    strategies: tuple[StrategyKind, ...] = GENERATED_STRATEGIES
    group_sizes: tuple[int, ...] = (2, 3, 4)
    ns: tuple[int, ...] = (500,)

    def __post_init__(self):
        if self.mode not in ("real", "synthetic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        for d in self.detectors:
            if d not in DETECTORS:
                raise ValueError(f"unknown detector {d!r}")


_WORKER_DATASET: Dataset | None = None


def _init_worker(dataset: Dataset):
    global _WORKER_DATASET
    _WORKER_DATASET = dataset


def _real_trial(dataset: Dataset, config: ExperimentConfig, unit_index: int, members, t: int) -> TrialResult:
    rng = trial_rng(config.master_seed, _REAL, unit_index, t)
    pop = build_trial_population(dataset, members, rng)
    tie_seed = int(rng.integers(2**63 - 1))
    success = run_success_trial(pop.instance, pop.bids, pop.malicious, tie_seed)
    ranks = run_detection_trial(pop.instance, pop.bids, pop.malicious, config.detectors, config.rank)
    src = tuple(pop.source_ids[r] for r in pop.malicious)
    return TrialResult(src, tuple(dataset.strategy_of(r) for r in src), success, ranks, pop.instance.n_reviewers)


def _with_loads(dataset: Dataset, config: ExperimentConfig) -> Dataset:
    inst = dataset.instance
    if (inst.paper_load, inst.reviewer_load) == (config.paper_load, config.reviewer_load):
        return dataset
    return replace(
        dataset,
        instance=replace(dataset.instance, paper_load=config.paper_load, reviewer_load=config.reviewer_load),
    )


def _synthetic_trial(dataset: Dataset, config: ExperimentConfig, cell: tuple[int, int, int], t: int) -> TrialResult:
    strategy, size, n = cell
    seed = trial_seed(config.master_seed, _SYNTHETIC, strategy, size, n, t)
    synth = build_synthetic_instance(
        SyntheticConfig(n, size, StrategyKind(strategy), seed, dataset, config.paper_load, config.reviewer_load)
    )
    tie_seed = trial_seed(seed, 1)
    success = run_success_trial(synth.instance, synth.bids, synth.group, tie_seed)
    ranks = run_detection_trial(synth.instance, synth.bids, synth.group, config.detectors, config.rank)
    return TrialResult(synth.group, tuple(strategy for _ in synth.group), success, ranks, n)


def _run_task(task):
    config, kind, key, members, t = task
    dataset = _WORKER_DATASET
    if kind == _REAL:
        return _real_trial(dataset, config, key, members, t)
    return _synthetic_trial(dataset, config, key, t)


def _tasks(dataset: Dataset, config: ExperimentConfig):
    if config.mode == "real":
        for u, members in enumerate(evaluation_units(dataset)):
            for t in range(config.trials):
                yield (config, _REAL, u, members, t)
    else:
        for strategy, size, n in itertools.product(config.strategies, config.group_sizes, config.ns):
            for t in range(config.trials):
                yield (config, _SYNTHETIC, (int(strategy), size, n), None, t)


def run_trials(dataset: Dataset, config: ExperimentConfig, jobs: int = 1) -> list[tuple[tuple, TrialResult]]:
    """Run every trial; returns ``(cell key, result)`` in a fixed order independent of ``jobs``."""
    dataset = _with_loads(dataset, config)
    tasks = list(_tasks(dataset, config))
    if jobs <= 1:
        _init_worker(dataset)
        results = [_run_task(task) for task in tasks]
    else:
        chunk = max(1, len(tasks) // (jobs * 8))
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(dataset,)) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=chunk))
    keys = [task[3] if task[1] == _REAL else task[2] for task in tasks]
    return list(zip(keys, results))


# -- aggregation -------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    metric: str
    strategy: str
    group_size: int | None
    n: int
    mean: float
    sem: float | None
    trials: int
    count: int


@dataclass
class AggregateReport:
    mode: str
    rows: list[ReportRow] = field(default_factory=list)

    def get(self, metric: str, strategy: str, group_size: int | None = None, n: int | None = None) -> ReportRow:
        for row in self.rows:
            if (
                row.metric == metric
                and row.strategy == strategy
                and (group_size is None or row.group_size == group_size)
                and (n is None or row.n == n)
            ):
                return row
        raise KeyError((metric, strategy, group_size, n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    r.metric,
                    r.strategy,
                    "" if r.group_size is None else r.group_size,
                    r.n,
                    _fmt(r.mean),
                    "" if r.sem is None else _fmt(r.sem),
                    r.trials,
                    r.count,
                ]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, mode: str = "") -> AggregateReport:
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(
                ReportRow(
                    rec["metric"],
                    rec["strategy"],
                    int(rec["group_size"]) if rec["group_size"] else None,
                    int(rec["n"]),
                    float(rec["mean"]),
                    float(rec["sem"]) if rec["sem"] else None,
                    int(rec["trials"]),
                    int(rec.get("count") or 0),
                )
            )
        return cls(mode, rows)


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def summarize(values: Sequence[float], trials: int) -> tuple[float, float | None]:
    """Mean and standard error of the mean; the error is undefined below two trials."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(math.fsum(arr) / len(arr))
    if trials < 2 or len(arr) < 2:
        return mean, None
    return mean, float(np.std(arr, ddof=1) / math.sqrt(len(arr)))


def _metrics(result: TrialResult, detectors: Sequence[str], normalized: bool) -> Iterable[tuple[str, int, float]]:
    """(metric, member index, value) for every malicious reviewer of one trial."""
    for k, ok in enumerate(result.success):
        yield "success", k, float(ok)
    for d in detectors:
        for k, r in enumerate(result.ranks[d]):
            yield f"rank_{d}", k, float(r)
            if normalized:
                yield f"normalized_rank_{d}", k, r / result.n_reviewers


def aggregate(results: Sequence[tuple[tuple, TrialResult]], config: ExperimentConfig) -> AggregateReport:
    metric_order = ["success"] + [f"{p}_{d}" for d in config.detectors for p in ("rank", "normalized_rank")]
    buckets: dict[tuple, list[float]] = {}
    if config.mode == "real":
        for _, res in results:
            for metric, k, value in _metrics(res, config.detectors, normalized=True):
                s = res.strategies[k]
                labels = [OVERALL] + ([STRATEGIES[s]] if s is not None and s >= 0 else [])
                for label in labels:
                    key = (metric, label, None, res.n_reviewers)
                    buckets.setdefault(key, []).append(value)
        strategy_order = list(STRATEGIES) + [OVERALL]
    else:
        for (strategy, size, n), res in results:
            for metric, k, value in _metrics(res, config.detectors, normalized=True):
                key = (metric, STRATEGIES[strategy], size, n)
                buckets.setdefault(key, []).append(value)
        strategy_order = list(STRATEGIES)

    def sort_key(key):
        metric, label, size, n = key
        return (metric_order.index(metric), strategy_order.index(label), size or 0, n)

    report = AggregateReport(config.mode)
    for key in sorted(buckets, key=sort_key):
        values = buckets[key]
        mean, sem = summarize(values, config.trials)
        report.rows.append(ReportRow(key[0], key[1], key[2], key[3], mean, sem, config.trials, len(values)))
    return report


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)


def run_experiment(dataset: Dataset, config: ExperimentConfig, jobs: int = 1) -> AggregateReport:
    logger.info("running %s experiment: %d trials per cell, seed %d", config.mode, config.trials, config.master_seed)
    return aggregate(run_trials(dataset, config, jobs), config)
