"""Command-line interface.

Exit codes: 0 success, 1 findings or infeasible assignment, 2 I/O or parse errors.
Option values come from flags, then a JSON ``--config`` file, then defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .assignment import AssignmentProblem, InfeasibleAssignment, solve
from .charts import report_charts
from .dataset import (
    Dataset,
    DatasetError,
    _atomic_write,
    load_dataset,
    read_bid_matrix,
    validate_dataset,
    write_csv,
    write_dataset,
    write_instance,
)
from .detection import DETECTORS, DetectionInput, run_detector
from .harness import AggregateReport, ExperimentConfig, default_jobs, run_experiment
from .model import InstanceError, build_similarity_matrix
from .strategies import GENERATED_STRATEGIES, StrategyKind, SyntheticConfig, build_synthetic_instance

logger = logging.getLogger("bidsim")

EXIT_OK, EXIT_FINDINGS, EXIT_IO = 0, 1, 2

DEFAULTS = {
    "seed": 0,
    "trials": 100,
    "paper_load": 3,
    "reviewer_load": 3,
    "rank": 3,
    "mode": "real",
    "n": "500",
    "sizes": "2,3,4",
    "strategies": ",".join(s.label for s in GENERATED_STRATEGIES),
    "detectors": ",".join(DETECTORS),
    "phase": "honest",
    "group_size": 4,
    "strategy": "Basic",
    "jobs": None,
}


class UsageError(Exception):
    pass


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _str_list(text) -> tuple[str, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(str(x) for x in text)
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    config = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
    for key, value in vars(args).items():
        if value is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _load(args) -> Dataset:
    _require(args, "dataset")
    return load_dataset(args.dataset, int(args.paper_load), int(args.reviewer_load))


def _responses(args, dataset: Dataset):
    if getattr(args, "bids", None):
        return read_bid_matrix(args.bids, dataset)
    return dataset.honest if args.phase == "honest" else dataset.malicious


def _emit(path: str | None, header, rows):
    if path:
        write_csv(path, header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- commands ----------------------------------------------------------------


def cmd_validate(args) -> int:
    dataset = _load(args)
    findings = validate_dataset(dataset)
    for f in findings:
        print(f)
    print(f"{len(findings)} finding(s)")
    return EXIT_FINDINGS if findings else EXIT_OK


def cmd_ingest(args) -> int:
    dataset = _load(args)
    inst = dataset.instance
    summary = {
        "reviewers": inst.n_reviewers,
        "papers": inst.n_papers,
        "honest_responses": len(dataset.honest),
        "malicious_responses": len(dataset.malicious),
        "group_sizes": {str(k): v for k, v in dataset.group_size_histogram().items()},
        "solo_reviewers": len(dataset.solo_reviewers()),
        "annotations": len(dataset.annotations),
        "conventions": dict(dataset.conventions),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.out:
        write_dataset(dataset, args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    _require(args, "out")
    source = _load(args)
    n = _int_list(args.n)[0]
    config = SyntheticConfig(
        n,
        int(args.group_size),
        StrategyKind.parse(args.strategy),
        int(args.seed),
        source,
        int(args.paper_load),
        int(args.reviewer_load),
    )
    synth = build_synthetic_instance(config)
    write_instance(synth.instance, synth.bids, synth.labels, args.out)
    print(f"wrote {n} reviewers/papers, malicious group {list(synth.group)} to {args.out}")
    return EXIT_OK


def cmd_assign(args) -> int:
    dataset = _load(args)
    responses = _responses(args, dataset)
    ids = list(responses.reviewer_ids)
    instance = dataset.instance.subset(ids)
    similarity = build_similarity_matrix(instance, responses.bids)
    assignment = solve(AssignmentProblem.from_instance(instance, similarity), int(args.seed))
    rows = [(ids[r], p, format(s, ".10g")) for r, p, s in assignment.rows()]
    rows.sort()
    _emit(args.out, ["reviewer_id", "paper_id", "similarity"], rows)
    print(f"objective {format(assignment.objective, '.10g')}", file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def cmd_detect(args) -> int:
    dataset = _load(args)
    responses = _responses(args, dataset)
    ids = list(responses.reviewer_ids)
    instance = dataset.instance.subset(ids)
    data = DetectionInput.from_instance(instance, responses.bids)
    rows = []
    for name in _str_list(args.detectors):
        ranking = run_detector(name, data, int(args.rank))
        ranks = ranking.ranks
        for local in ranking.order:
            rows.append(
                (
                    ids[local],
                    int(ranks[local]),
                    format(ranks[local] / len(ids), ".10g"),
                    format(float(ranking.scores[local]), ".10g"),
                    name,
                )
            )
    _emit(args.out, ["reviewer_id", "rank", "normalized_rank", "score", "detector"], rows)
    return EXIT_OK


def _write_report(report: AggregateReport, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    text = report.to_csv()
    _atomic_write(out / "report.csv", lambda fh: fh.write(text))
    for name, svg in report_charts(report).items():
        _atomic_write(out / name, lambda fh, svg=svg: fh.write(svg))


def cmd_experiment(args) -> int:
    _require(args, "out")
    dataset = _load(args)
    config = ExperimentConfig(
        mode=args.mode,
        trials=int(args.trials),
        master_seed=int(args.seed),
        detectors=_str_list(args.detectors),
        rank=int(args.rank),
        paper_load=int(args.paper_load),
        reviewer_load=int(args.reviewer_load),
        strategies=tuple(StrategyKind.parse(s) for s in _str_list(args.strategies)),
        group_sizes=_int_list(args.sizes),
        ns=_int_list(args.n),
    )
    jobs = int(args.jobs) if args.jobs else default_jobs()
    report = run_experiment(dataset, config, jobs)
    _write_report(report, Path(args.out))
    print(f"wrote {len(report.rows)} report rows to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    _require(args, "input", "out")
    with open(args.input, encoding="utf-8") as fh:
        report = AggregateReport.from_csv(fh.read())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, svg in report_charts(report).items():
        _atomic_write(out / name, lambda fh, svg=svg: fh.write(svg))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bidsim", description="Paper-bidding manipulation simulator and benchmark.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        p.add_argument("--config", help="JSON file of option defaults")
        if dataset:
            p.add_argument("--dataset", help="dataset directory")
            p.add_argument("--paper-load", type=int, help="reviewers per paper (default 3)")
            p.add_argument("--reviewer-load", type=int, help="maximum papers per reviewer (default 3)")
        return p

    def bid_source(p):
        p.add_argument("--bids", help="bidding CSV in the dataset format (default: a phase of the dataset)")
        p.add_argument("--phase", choices=("honest", "malicious"), help="dataset phase when --bids is absent")

    p = common(sub.add_parser("validate", help="check dataset construction rules"))
    p.set_defaults(func=cmd_validate)

    p = common(sub.add_parser("ingest", help="load a dataset and print a summary"))
    p.add_argument("--out", help="also write a normalised copy here")
    p.set_defaults(func=cmd_ingest)

    p = common(sub.add_parser("gen", help="write a synthetic scaled-up instance"))
    p.add_argument("--n", help="reviewers = papers (default 500)")
    p.add_argument("--group-size", type=int, help="malicious group size (default 4)")
    p.add_argument("--strategy", help="Basic, Negative-in-area, Overlap or Cycle")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_gen)

    p = common(sub.add_parser("assign", help="compute a maximum-similarity assignment"))
    bid_source(p)
    p.add_argument("--seed", type=int, help="tie-breaking seed (default 0)")
    p.add_argument("--out", help="assignment CSV (default stdout)")
    p.set_defaults(func=cmd_assign)

    p = common(sub.add_parser("detect", help="rank reviewers by suspicion"))
    bid_source(p)
    p.add_argument("--detectors", help=f"comma list from {','.join(DETECTORS)}")
    p.add_argument("--rank", type=int, help="low-rank approximation rank (default 3)")
    p.add_argument("--out", help="ranking CSV (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = common(sub.add_parser("experiment", help="run the trial protocol and write report.csv plus SVG charts"))
    p.add_argument("--mode", choices=("real", "synthetic"), help="default real")
    p.add_argument("--trials", type=int, help="trials per group or cell (default 100)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--n", help="synthetic sizes, comma list (default 500)")
    p.add_argument("--sizes", help="synthetic group sizes, comma list (default 2,3,4)")
    p.add_argument("--strategies", help="synthetic strategies, comma list")
    p.add_argument("--detectors", help=f"comma list from {','.join(DETECTORS)}")
    p.add_argument("--rank", type=int, help="low-rank approximation rank (default 3)")
    p.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_experiment)

    p = common(sub.add_parser("report", help="render SVG charts from a report CSV"), dataset=False)
    p.add_argument("--input", help="report.csv")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        args = _resolve(args)
        return args.func(args)
    except InfeasibleAssignment as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FINDINGS
    except (DatasetError, InstanceError, OSError, json.JSONDecodeError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
