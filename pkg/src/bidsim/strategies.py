"""Honest and malicious bid generation, and synthetic scale-up of a source dataset.

Bids for a new reviewer are modelled on a reviewer from the source data:
the model's positive and negative bid counts inside and outside its own
topics are transplanted onto random papers of the new reviewer's matching
partitions.  Positive counts are kept as-is; negative counts are scaled by
the ratio of paper counts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import AbstractSet, Mapping, Sequence

import numpy as np

from .dataset import STRATEGIES, Dataset, DatasetError
from .model import ConferenceInstance, Paper, ReviewerProfile, topic_match_matrix


class StrategyKind(enum.IntEnum):
    BASIC = 0
    NEGATIVE_IN_AREA = 1
    OVERLAP = 2
    CYCLE = 3
    POPULARITY = 4

    @property
    def label(self) -> str:
        return STRATEGIES[self.value]

    @classmethod
    def parse(cls, text: str | int) -> StrategyKind:
        if isinstance(text, (int, np.integer)):
            return cls(int(text))
        key = text.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"negative_in_area": "NEGATIVE_IN_AREA", "negativeinarea": "NEGATIVE_IN_AREA", "nia": "NEGATIVE_IN_AREA"}
        if key.isdigit():
            return cls(int(key))
        try:
            return cls[aliases.get(key, key.upper())]
        except KeyError:
            raise ValueError(f"unknown strategy {text!r}") from None


GENERATED_STRATEGIES = (
    StrategyKind.BASIC,
    StrategyKind.NEGATIVE_IN_AREA,
    StrategyKind.OVERLAP,
    StrategyKind.CYCLE,
)


@dataclass(frozen=True)
class BidProfileStats:
    pos_in_topic: int
    pos_out_topic: int
    neg_in_topic: int
    neg_out_topic: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.pos_in_topic, self.pos_out_topic, self.neg_in_topic, self.neg_out_topic)


@dataclass(frozen=True)
class SyntheticConfig:
    n: int
    group_size: int
    strategy: StrategyKind
    seed: int
    source: Dataset = field(repr=False, compare=False, default=None)
    paper_load: int = 3
    reviewer_load: int = 3

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")
        if self.n < self.group_size + 1:
            raise ValueError(f"n={self.n} too small for a group of {self.group_size}")
        if StrategyKind(self.strategy) == StrategyKind.POPULARITY:
            raise ValueError("the Popularity strategy cannot be generated")


@dataclass(frozen=True)
class SyntheticInstance:
    instance: ConferenceInstance
    bids: np.ndarray
    labels: Mapping[int, tuple[bool, int | None]]
    group: tuple[int, ...]  # malicious reviewer ids, in cycle order


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _in_topic_row(reviewer: ReviewerProfile, instance: ConferenceInstance) -> np.ndarray:
    topics = reviewer.topics
    return np.array([p.subject_area.topic in topics for p in instance.papers], dtype=bool)


def extract_stats(
    model: ReviewerProfile,
    model_bids,
    instance: ConferenceInstance,
    exclude: AbstractSet[int] = frozenset(),
) -> BidProfileStats:
    """Count the model's positive/negative bids inside and outside its topics.

    The model's own papers and any paper in ``exclude`` (e.g. its target
    papers) are left out of the count.
    """
    if model_bids is None:
        raise DatasetError(f"model reviewer {model.id} has no bids")
    row = np.asarray(model_bids)
    keep = np.ones(instance.n_papers, dtype=bool)
    keep[list(model.authored_papers | set(exclude))] = False
    in_topic = _in_topic_row(model, instance)
    return BidProfileStats(
        int(np.sum((row == 1) & in_topic & keep)),
        int(np.sum((row == 1) & ~in_topic & keep)),
        int(np.sum((row == -1) & in_topic & keep)),
        int(np.sum((row == -1) & ~in_topic & keep)),
    )


def responder_stats(dataset: Dataset, reviewer_id: int, phase: str) -> BidProfileStats:
    """Stats of a source responder; malicious models also exclude their target papers."""
    responses = dataset.honest if phase == "honest" else dataset.malicious
    if reviewer_id not in responses:
        raise DatasetError(f"reviewer {reviewer_id} did not respond in the {phase} phase")
    profile = dataset.instance.reviewers[reviewer_id]
    exclude = profile.target_papers if phase == "malicious" else frozenset()
    return extract_stats(profile, responses.row(reviewer_id), dataset.instance, exclude)


def generate_honest_bids(
    new_reviewer: ReviewerProfile,
    new_instance: ConferenceInstance,
    model_stats: BidProfileStats,
    paper_ratio: float,
    rng: np.random.Generator,
    exclude: AbstractSet[int] = frozenset(),
    in_topic: np.ndarray | None = None,
) -> np.ndarray:
    """One bid row following ``model_stats``, negatives scaled by ``paper_ratio``.

    Own papers and ``exclude`` receive no bid.  Requested counts larger than
    the available partition are capped at its size.
    """
    if paper_ratio <= 0:
        raise ValueError("paper_ratio must be positive")
    n_papers = new_instance.n_papers
    if in_topic is None:
        in_topic = _in_topic_row(new_reviewer, new_instance)
    eligible = np.ones(n_papers, dtype=bool)
    eligible[list(new_reviewer.authored_papers | set(exclude))] = False
    row = np.zeros(n_papers, dtype=np.int8)
    plans = (
        (eligible & in_topic, model_stats.pos_in_topic, round_half_up(model_stats.neg_in_topic * paper_ratio)),
        (eligible & ~in_topic, model_stats.pos_out_topic, round_half_up(model_stats.neg_out_topic * paper_ratio)),
    )
    for part, n_pos, n_neg in plans:
        papers = rng.permutation(np.flatnonzero(part))
        n_pos = min(n_pos, len(papers))
        n_neg = min(n_neg, len(papers) - n_pos)
        row[papers[:n_pos]] = 1
        row[papers[n_pos : n_pos + n_neg]] = -1
    return row


def _models_for(source: Dataset, strategy: StrategyKind) -> list[int]:
    return sorted(rid for rid in source.malicious.reviewer_ids if source.strategy_of(rid) == int(strategy))


def generate_malicious_bids(
    group: Sequence[int],
    strategy: StrategyKind,
    instance: ConferenceInstance,
    source: Dataset,
    rng: np.random.Generator,
    paper_ratio: float | None = None,
    in_topic: np.ndarray | None = None,
) -> np.ndarray:
    """Bid rows (one per member, in ``group`` order) for a colluding group.

    Non-target bids are modelled on source reviewers annotated with the same
    strategy; target bids are then set per strategy.  Cycle members each
    bid positively on the next member's paper only.
    """
    strategy = StrategyKind(strategy)
    if strategy == StrategyKind.POPULARITY:
        raise ValueError("the Popularity strategy cannot be generated")
    if len(group) < 2:
        raise ValueError("a colluding group needs at least two members")
    models = _models_for(source, strategy)
    if not models:
        raise DatasetError(f"no source reviewer annotated with strategy {strategy.label}")
    if paper_ratio is None:
        paper_ratio = instance.n_papers / source.instance.n_papers
    members = [instance.reviewers[r] for r in group]
    group_papers = frozenset(p for m in members for p in m.authored_papers)
    if in_topic is None:
        in_topic = np.array([_in_topic_row(m, instance) for m in members])
    else:
        in_topic = in_topic[list(group)]

    rows = np.zeros((len(group), instance.n_papers), dtype=np.int8)
    for k, member in enumerate(members):
        model = int(rng.choice(models))
        stats = responder_stats(source, model, "malicious")
        rows[k] = generate_honest_bids(member, instance, stats, paper_ratio, rng, group_papers, in_topic[k])

    targets = [sorted(group_papers - m.authored_papers) for m in members]
    if strategy == StrategyKind.CYCLE:
        for k, member in enumerate(members):
            nxt = members[(k + 1) % len(members)]
            rows[k, targets[k]] = 0
            rows[k, sorted(nxt.authored_papers)] = 1
        return rows

    for k in range(len(members)):
        rows[k, targets[k]] = 1

    if strategy == StrategyKind.OVERLAP:
        non_target = np.ones(instance.n_papers, dtype=bool)
        non_target[sorted(group_papers)] = False
        size = int(max(np.sum((rows[k] == 1) & non_target) for k in range(len(members))))
        pool = np.flatnonzero(in_topic.any(axis=0) & non_target)
        if len(pool) < size:
            pool = np.flatnonzero(non_target)
        shared = rng.choice(pool, size=size, replace=False) if size else np.array([], dtype=np.int64)
        for k in range(len(members)):
            rows[k, non_target & (rows[k] == 1)] = 0
            rows[k, shared] = 1
    return rows


def build_synthetic_instance(config: SyntheticConfig) -> SyntheticInstance:
    """Scale a source dataset up to ``config.n`` reviewers and papers with one-to-one authorship.

    The malicious group copies the profiles of a random same-size source
    group and is placed at random reviewer ids; every other reviewer copies
    a random source profile.  All randomness derives from ``config.seed``.
    """
    source = config.source
    if source is None:
        raise ValueError("SyntheticConfig.source is required")
    strategy = StrategyKind(config.strategy)
    src = source.instance
    n, g = config.n, config.group_size
    rng = np.random.default_rng(config.seed)

    candidates = sorted(gid for gid, m in src.groups.items() if len(m) == g)
    if not candidates:
        raise DatasetError(f"source has no colluding group of size {g}")
    src_group = src.groups[candidates[int(rng.integers(len(candidates)))]]
    positions = [int(x) for x in rng.choice(n, size=g, replace=False)]
    copied = [int(x) for x in rng.integers(src.n_reviewers, size=n)]
    for k, pos in enumerate(positions):
        copied[pos] = src_group[k]

    def src_paper_area(rid: int):
        return src.papers[min(src.reviewers[rid].authored_papers)].subject_area

    papers = tuple(Paper(i, src_paper_area(copied[i]), f"Paper {i}") for i in range(n))
    malicious = set(positions)
    reviewers = tuple(
        ReviewerProfile(
            id=i,
            subject_areas=src.reviewers[copied[i]].subject_areas,
            authored_papers=frozenset({i}),
            group=0 if i in malicious else None,
            target_papers=frozenset(malicious - {i}) if i in malicious else frozenset(),
            name=f"S{i}",
        )
        for i in range(n)
    )
    instance = ConferenceInstance(
        papers=papers,
        reviewers=reviewers,
        taxonomy=src.taxonomy,
        paper_load=config.paper_load,
        reviewer_load=config.reviewer_load,
        groups={0: tuple(positions)},
    )

    ratio = n / src.n_papers
    in_topic = topic_match_matrix(instance)
    honest_models = sorted(source.honest.reviewer_ids)
    if not honest_models:
        raise DatasetError("source has no honest responders")
    stats_cache: dict[int, BidProfileStats] = {}
    bids = np.zeros((n, n), dtype=np.int8)
    for i in range(n):
        if i in malicious:
            continue
        model = honest_models[int(rng.integers(len(honest_models)))]
        if model not in stats_cache:
            stats_cache[model] = responder_stats(source, model, "honest")
        bids[i] = generate_honest_bids(reviewers[i], instance, stats_cache[model], ratio, rng, in_topic=in_topic[i])
    bids[positions] = generate_malicious_bids(positions, strategy, instance, source, rng, ratio, in_topic)

    labels = {i: ((True, int(strategy)) if i in malicious else (False, None)) for i in range(n)}
    return SyntheticInstance(instance, bids, labels, tuple(positions))
