"""Domain types shared across the package, and the reviewer-paper similarity."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

NEGATIVE, NEUTRAL, POSITIVE = -1, 0, 1
BID_LEVELS = (NEGATIVE, NEUTRAL, POSITIVE)
AREAS_PER_REVIEWER = 3

# Every value (1 + A) * 2**B can take; all exactly representable in binary.
REACHABLE_SIMILARITIES = frozenset({0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0})


class TaxonomyError(ValueError):
    """Raised for unknown subject-area indices or malformed taxonomy files."""


class InstanceError(ValueError):
    """Raised when an instance, bid matrix, or similarity input is inconsistent."""


@dataclass(frozen=True)
class Taxonomy:
    """Fine-grained subject areas grouped under high-level topics.

    ``area_topic[i]`` is the topic index of area ``i``.
    """

    topics: tuple[str, ...]
    areas: tuple[str, ...]
    area_topic: tuple[int, ...]

    def __post_init__(self):
        if len(self.areas) != len(self.area_topic):
            raise TaxonomyError("areas and area_topic differ in length")
        for t in self.area_topic:
            if not 0 <= t < len(self.topics):
                raise TaxonomyError(f"topic index {t} out of range")

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    @property
    def n_topics(self) -> int:
        return len(self.topics)

    def area(self, index: int) -> SubjectArea:
        if not 0 <= index < len(self.areas):
            raise TaxonomyError(f"subject area index {index} out of range [0, {len(self.areas)})")
        return SubjectArea(int(index), self.area_topic[index])

    def topic_of(self, index: int) -> int:
        return self.area(index).topic

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> Taxonomy:
        """Parse ``<topic> :: <area>`` lines; the line number is the area id."""
        topics: list[str] = []
        areas: list[str] = []
        area_topic: list[int] = []
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                continue
            if "::" in line:
                topic, area = line.split("::", 1)
            elif ":" in line:
                topic, area = line.split(":", 1)
            else:
                raise TaxonomyError(f"line {lineno}: expected '<topic> :: <area>', got {line!r}")
            topic, area = topic.strip(), area.strip()
            if topic not in topics:
                topics.append(topic)
            areas.append(area)
            area_topic.append(topics.index(topic))
        if not areas:
            raise TaxonomyError("taxonomy is empty")
        return cls(tuple(topics), tuple(areas), tuple(area_topic))

    @classmethod
    def from_file(cls, path: str | Path) -> Taxonomy:
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    @classmethod
    def bundled(cls) -> Taxonomy:
        text = resources.files("bidsim").joinpath("data/taxonomy.txt").read_text(encoding="utf-8")
        return cls.from_lines(text.splitlines())

    def to_lines(self) -> list[str]:
        return [f"{self.topics[t]} :: {a}" for a, t in zip(self.areas, self.area_topic)]


@dataclass(frozen=True)
class SubjectArea:
    id: int
    topic: int


@dataclass(frozen=True)
class Paper:
    id: int
    subject_area: SubjectArea
    title: str = ""


@dataclass(frozen=True)
class ReviewerProfile:
    id: int
    subject_areas: tuple[SubjectArea, ...]
    authored_papers: frozenset[int] = frozenset()
    group: int | None = None
    target_papers: frozenset[int] = frozenset()
    name: str = ""

    def __post_init__(self):
        if len(self.subject_areas) != AREAS_PER_REVIEWER:
            raise InstanceError(
                f"reviewer {self.id}: expected {AREAS_PER_REVIEWER} subject areas, got {len(self.subject_areas)}"
            )
        if self.authored_papers & self.target_papers:
            raise InstanceError(f"reviewer {self.id}: authored and target papers overlap")

    @property
    def topics(self) -> frozenset[int]:
        return frozenset(a.topic for a in self.subject_areas)


@dataclass(frozen=True)
class ConferenceInstance:
    """Papers, reviewer profiles and loads for one assignment problem.

    Reviewer and paper ids are dense and equal to their list positions.
    """

    papers: tuple[Paper, ...]
    reviewers: tuple[ReviewerProfile, ...]
    taxonomy: Taxonomy
    paper_load: int = 3
    reviewer_load: int = 3
    groups: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for i, p in enumerate(self.papers):
            if p.id != i:
                raise InstanceError(f"paper ids must be dense; position {i} holds id {p.id}")
        n_papers = len(self.papers)
        for i, r in enumerate(self.reviewers):
            if r.id != i:
                raise InstanceError(f"reviewer ids must be dense; position {i} holds id {r.id}")
            for p in r.authored_papers | r.target_papers:
                if not 0 <= p < n_papers:
                    raise InstanceError(f"reviewer {i} references unknown paper {p}")
        if self.paper_load < 1 or self.reviewer_load < 1:
            raise InstanceError("loads must be positive")

    @property
    def n_reviewers(self) -> int:
        return len(self.reviewers)

    @property
    def n_papers(self) -> int:
        return len(self.papers)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.reviewers), len(self.papers))

    def capacity_feasible(self) -> bool:
        return self.n_reviewers * self.reviewer_load >= self.n_papers * self.paper_load

    def authorship_matrix(self) -> np.ndarray:
        """Boolean R x P matrix, True where the reviewer authored the paper."""
        m = np.zeros(self.shape, dtype=bool)
        for r in self.reviewers:
            m[r.id, list(r.authored_papers)] = True
        return m

    def conflicts(self) -> frozenset[tuple[int, int]]:
        return frozenset((r.id, p) for r in self.reviewers for p in r.authored_papers)

    def subset(self, reviewer_ids: Sequence[int]) -> ConferenceInstance:
        """Instance restricted to ``reviewer_ids``, re-indexed in the given order."""
        reviewers = []
        groups: dict[int, list[int]] = {}
        for new_id, old_id in enumerate(reviewer_ids):
            old = self.reviewers[old_id]
            reviewers.append(
                ReviewerProfile(
                    id=new_id,
                    subject_areas=old.subject_areas,
                    authored_papers=old.authored_papers,
                    group=old.group,
                    target_papers=old.target_papers,
                    name=old.name,
                )
            )
            if old.group is not None:
                groups.setdefault(old.group, []).append(new_id)
        return ConferenceInstance(
            papers=self.papers,
            reviewers=tuple(reviewers),
            taxonomy=self.taxonomy,
            paper_load=self.paper_load,
            reviewer_load=self.reviewer_load,
            groups={g: tuple(m) for g, m in groups.items()},
        )


def check_bids(bids, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Validate and return a bid matrix as an int8 array with entries in {-1, 0, 1}."""
    arr = np.asarray(bids)
    if arr.ndim != 2:
        raise InstanceError(f"bid matrix must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise InstanceError(f"bid matrix shape {arr.shape} does not match instance shape {tuple(shape)}")
    if arr.size and not np.isin(arr, BID_LEVELS).all():
        raise InstanceError("bid entries must be -1, 0 or 1")
    return arr.astype(np.int8, copy=False)


def subject_score(reviewer: ReviewerProfile, paper: Paper, taxonomy: Taxonomy) -> float:
    """1 for an exact area match, 0.5 for a shared topic, 0 otherwise."""
    area = taxonomy.area(paper.subject_area.id)
    reviewer_areas = [taxonomy.area(a.id) for a in reviewer.subject_areas]
    if any(a.id == area.id for a in reviewer_areas):
        return 1.0
    if any(a.topic == area.topic for a in reviewer_areas):
        return 0.5
    return 0.0


def similarity(subject: float, bid: int) -> float:
    """(1 + subject) * 2**bid."""
    return (1.0 + subject) * 2.0**bid


def subject_score_matrix(instance: ConferenceInstance) -> np.ndarray:
    """R x P matrix of subject scores, computed from one-hot area/topic memberships."""
    tax = instance.taxonomy
    n_r, n_p = instance.shape
    rev_area = np.zeros((n_r, tax.n_areas))
    rev_topic = np.zeros((n_r, tax.n_topics))
    for r in instance.reviewers:
        for a in r.subject_areas:
            a = tax.area(a.id)
            rev_area[r.id, a.id] = 1
            rev_topic[r.id, a.topic] = 1
    pap_area = np.zeros((n_p, tax.n_areas))
    pap_topic = np.zeros((n_p, tax.n_topics))
    for p in instance.papers:
        a = tax.area(p.subject_area.id)
        pap_area[p.id, a.id] = 1
        pap_topic[p.id, a.topic] = 1
    exact = rev_area @ pap_area.T > 0
    topical = rev_topic @ pap_topic.T > 0
    return np.where(exact, 1.0, np.where(topical, 0.5, 0.0))


def topic_match_matrix(instance: ConferenceInstance) -> np.ndarray:
    """Boolean R x P matrix: paper topic is among the reviewer's area topics."""
    return subject_score_matrix(instance) > 0


def build_similarity_matrix(instance: ConferenceInstance, bids) -> np.ndarray:
    bids = check_bids(bids, instance.shape)
    subject = subject_score_matrix(instance)
    return (1.0 + subject) * np.exp2(bids.astype(np.float64))
