"""Reading and writing the bidding dataset files.

A dataset directory holds ``setup.csv``, ``honest_bidding.csv``,
``malicious_bidding.csv``, ``strategy_annotations.csv`` and two text files
listing subject areas and paper titles.  Bidding files carry two header rows:
column ids, then question text; bid columns are recognised by the paper
title appearing in the question text, so column order does not matter.
"""

from __future__ import annotations

import csv
import logging
import os
import re
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .model import ConferenceInstance, InstanceError, Paper, ReviewerProfile, Taxonomy, TaxonomyError, check_bids

logger = logging.getLogger(__name__)

STRATEGIES = ("Basic", "Negative-in-area", "Overlap", "Cycle", "Popularity")
NO_STRATEGY = -1

BID_VOCABULARY = {
    "Not willing to review": -1,
    "Indifferent": 0,
    "Eager to review": 1,
    "": 0,
}
BID_LABELS = {-1: "Not willing to review", 0: "Indifferent", 1: "Eager to review"}

SETUP_FILE = "setup.csv"
HONEST_FILE = "honest_bidding.csv"
MALICIOUS_FILE = "malicious_bidding.csv"
ANNOTATIONS_FILE = "strategy_annotations.csv"
LABELS_FILE = "labels.csv"
AREAS_FILE = "subject_areas.txt"
TITLES_FILE = "paper_titles.txt"

SETUP_COLUMNS = ["name", "sas", "authored_sa", "authored_id", "target_sa", "target_id", "group"]
ANNOTATION_COLUMNS = ["Name", "Strategy", "Discussed"]
LABEL_COLUMNS = ["reviewer_id", "is_malicious", "strategy"]


class DatasetError(Exception):
    """Missing files, malformed rows, or dangling references in a dataset."""


@dataclass(frozen=True)
class RawSetupRow:
    name: str
    sas: tuple[int, int, int]
    authored_sa: int
    authored_id: int
    target_sa: int | None
    target_id: int | None
    group: int | None


@dataclass(frozen=True)
class StrategyAnnotation:
    name: str
    strategy: int
    discussed: bool | None = None

    @property
    def label(self) -> str | None:
        return None if self.strategy == NO_STRATEGY else STRATEGIES[self.strategy]


@dataclass(frozen=True)
class Responses:
    """Bids from the reviewers who responded in one bidding phase.

    ``bids[k]`` is the row of reviewer ``reviewer_ids[k]``.
    """

    reviewer_ids: tuple[int, ...]
    bids: np.ndarray
    free_text: tuple[Mapping[str, str], ...] = ()

    def __post_init__(self):
        if len(self.reviewer_ids) != len(self.bids):
            raise DatasetError("responder ids and bid rows differ in length")
        if len(set(self.reviewer_ids)) != len(self.reviewer_ids):
            raise DatasetError("duplicate responder")

    def __len__(self) -> int:
        return len(self.reviewer_ids)

    def __contains__(self, reviewer_id: int) -> bool:
        return reviewer_id in self._index

    @cached_property
    def _index(self) -> dict[int, int]:
        return {r: k for k, r in enumerate(self.reviewer_ids)}

    def row(self, reviewer_id: int) -> np.ndarray:
        try:
            return self.bids[self._index[reviewer_id]]
        except KeyError:
            raise DatasetError(f"reviewer {reviewer_id} did not respond") from None


@dataclass(frozen=True)
class Dataset:
    instance: ConferenceInstance
    honest: Responses
    malicious: Responses
    annotations: Mapping[int, StrategyAnnotation] = field(default_factory=dict)
    conventions: Mapping[str, str] = field(default_factory=dict)

    def strategy_of(self, reviewer_id: int) -> int | None:
        ann = self.annotations.get(reviewer_id)
        return None if ann is None else ann.strategy

    def solo_reviewers(self) -> list[int]:
        inst = self.instance
        return [r.id for r in inst.reviewers if r.group is None or len(inst.groups.get(r.group, ())) == 1]

    def group_size_histogram(self) -> dict[int, int]:
        """Sizes of colluding groups with two or more members."""
        sizes = Counter(len(m) for m in self.instance.groups.values() if len(m) >= 2)
        return dict(sorted(sizes.items()))


@dataclass(frozen=True)
class Finding:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


# -- reading -----------------------------------------------------------------


def _optional_int(text: str, what: str, lineno: int) -> int | None:
    text = text.strip()
    if text == "":
        return None
    if re.fullmatch(r"-?\d+(\.0*)?", text):
        return int(float(text))
    raise DatasetError(f"{SETUP_FILE} line {lineno}: {what} is not an integer: {text!r}")


def _required_int(text: str, what: str, lineno: int) -> int:
    value = _optional_int(text, what, lineno)
    if value is None:
        raise DatasetError(f"{SETUP_FILE} line {lineno}: missing {what}")
    return value


def read_setup(path: Path) -> list[RawSetupRow]:
    rows = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        missing = set(SETUP_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DatasetError(f"{SETUP_FILE}: missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            tokens = rec["sas"].split()
            if len(tokens) != 3:
                raise DatasetError(f"{SETUP_FILE} line {lineno}: sas must hold 3 integers, got {rec['sas']!r}")
            try:
                sas = tuple(int(t) for t in tokens)
            except ValueError:
                raise DatasetError(f"{SETUP_FILE} line {lineno}: bad sas {rec['sas']!r}") from None
            rows.append(
                RawSetupRow(
                    name=rec["name"].strip(),
                    sas=sas,  # type: ignore[arg-type]
                    authored_sa=_required_int(rec["authored_sa"], "authored_sa", lineno),
                    authored_id=_required_int(rec["authored_id"], "authored_id", lineno),
                    target_sa=_optional_int(rec["target_sa"], "target_sa", lineno),
                    target_id=_optional_int(rec["target_id"], "target_id", lineno),
                    group=_optional_int(rec["group"], "group", lineno),
                )
            )
    names = [r.name for r in rows]
    dup = [n for n, c in Counter(names).items() if c > 1]
    if dup:
        raise DatasetError(f"{SETUP_FILE}: duplicate names {dup}")
    return rows


def read_lines(path: Path) -> list[str]:
    with open(path, encoding="utf-8-sig") as fh:
        return [line.strip() for line in fh if line.strip()]


def _norm(text: str) -> str:
    return " ".join(text.split()).casefold()


def parse_bid(text: str) -> int:
    key = text.strip()
    if key not in BID_VOCABULARY:
        raise DatasetError(f"unknown bid value {text!r}")
    return BID_VOCABULARY[key]


def read_bidding(path: Path, titles: Sequence[str], name_to_id: Mapping[str, int]) -> Responses:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DatasetError(f"{path.name}: expected two header rows")
    ids_row, questions = rows[0], rows[1]
    if not ids_row or ids_row[0].strip().lower() != "name":
        raise DatasetError(f"{path.name}: first column must be 'Name'")
    norm_titles = [_norm(t) for t in titles]
    # Longest matching title wins so a title that is a prefix of another is not confused.
    order = sorted(range(len(titles)), key=lambda i: -len(norm_titles[i]))
    column_paper: dict[int, int] = {}
    text_columns: list[int] = []
    for j in range(1, len(ids_row)):
        question = _norm(questions[j] if j < len(questions) else "")
        match = next((i for i in order if norm_titles[i] and norm_titles[i] in question), None)
        if match is None:
            text_columns.append(j)
        elif match in column_paper.values():
            raise DatasetError(f"{path.name}: paper {titles[match]!r} appears in two columns")
        else:
            column_paper[j] = match
    if len(column_paper) != len(titles):
        missing = sorted(set(range(len(titles))) - set(column_paper.values()))
        raise DatasetError(f"{path.name}: no bid column for papers {missing}")

    reviewer_ids, bid_rows, texts = [], [], []
    for lineno, rec in enumerate(rows[2:], start=3):
        if not any(cell.strip() for cell in rec):
            continue
        rec = rec + [""] * (len(ids_row) - len(rec))
        name = rec[0].strip()
        if name not in name_to_id:
            raise DatasetError(f"{path.name} line {lineno}: unknown participant {name!r}")
        row = np.zeros(len(titles), dtype=np.int8)
        for j, paper in column_paper.items():
            try:
                row[paper] = parse_bid(rec[j])
            except DatasetError as exc:
                raise DatasetError(f"{path.name} line {lineno}: {exc}") from None
        reviewer_ids.append(name_to_id[name])
        bid_rows.append(row)
        texts.append({(questions[j] if j < len(questions) else ids_row[j]): rec[j] for j in text_columns})
    bids = np.array(bid_rows, dtype=np.int8).reshape(len(bid_rows), len(titles))
    return Responses(tuple(reviewer_ids), bids, tuple(texts))


def read_annotations(path: Path, name_to_id: Mapping[str, int]) -> dict[int, StrategyAnnotation]:
    out: dict[int, StrategyAnnotation] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        fields = {f.strip().lower(): f for f in reader.fieldnames or ()}
        if not {"name", "strategy"} <= set(fields):
            raise DatasetError(f"{ANNOTATIONS_FILE}: expected columns {ANNOTATION_COLUMNS}")
        for lineno, rec in enumerate(reader, start=2):
            name = rec[fields["name"]].strip()
            if not name:
                continue
            if name not in name_to_id:
                raise DatasetError(f"{ANNOTATIONS_FILE} line {lineno}: unknown participant {name!r}")
            try:
                strategy = int(rec[fields["strategy"]])
            except ValueError:
                raise DatasetError(f"{ANNOTATIONS_FILE} line {lineno}: bad strategy {rec[fields['strategy']]!r}") from None
            if not NO_STRATEGY <= strategy < len(STRATEGIES):
                raise DatasetError(f"{ANNOTATIONS_FILE} line {lineno}: strategy {strategy} out of range")
            flag = rec.get(fields.get("discussed", ""), "") or ""
            discussed = {"Y": True, "N": False}.get(flag.strip().upper())
            out[name_to_id[name]] = StrategyAnnotation(name, strategy, discussed)
    return out


def _find_text_file(directory: Path, preferred: str, keywords: Sequence[str]) -> Path:
    candidate = directory / preferred
    if candidate.exists():
        return candidate
    for path in sorted(directory.glob("*.txt")):
        if any(k in path.name.lower() for k in keywords):
            return path
    raise DatasetError(f"{directory}: no {preferred} (or *.txt matching {list(keywords)})")


def build_instance(
    setup: Sequence[RawSetupRow],
    taxonomy: Taxonomy,
    titles: Sequence[str],
    paper_load: int = 3,
    reviewer_load: int = 3,
) -> tuple[ConferenceInstance, dict[str, str]]:
    """Assemble the domain model from setup rows; returns the instance and detected conventions."""
    n_papers = len(titles)
    paper_area: dict[int, int] = {}

    def note_area(paper: int, area: int, who: str):
        if not 0 <= paper < n_papers:
            raise DatasetError(f"{who}: paper index {paper} out of range [0, {n_papers})")
        try:
            taxonomy.area(area)
        except TaxonomyError as exc:
            raise DatasetError(f"{who}: {exc}") from None
        if paper_area.setdefault(paper, area) != area:
            raise DatasetError(f"{who}: paper {paper} given subject areas {paper_area[paper]} and {area}")

    for row in setup:
        note_area(row.authored_id, row.authored_sa, row.name)
        if (row.target_id is None) != (row.target_sa is None):
            raise DatasetError(f"{row.name}: target_sa and target_id must both be present or both empty")
        if row.target_id is not None:
            note_area(row.target_id, row.target_sa, row.name)
    unknown = sorted(set(range(n_papers)) - set(paper_area))
    if unknown:
        raise DatasetError(f"papers {unknown} have no recorded subject area")
    papers = tuple(Paper(i, taxonomy.area(paper_area[i]), titles[i]) for i in range(n_papers))

    group_members: dict[int, list[int]] = {}
    for rid, row in enumerate(setup):
        if row.group is not None:
            group_members.setdefault(row.group, []).append(rid)

    solo = [row for row in setup if row.target_id is not None]
    if not solo:
        marker = "none"
    elif all(row.group is None for row in solo):
        marker = "empty"
    elif all(row.group is not None and len(group_members[row.group]) == 1 for row in solo):
        marker = "singleton-id"
    else:
        marker = "mixed"
    conventions = {"solo_group_marker": marker}

    reviewers = []
    for rid, row in enumerate(setup):
        try:
            areas = tuple(taxonomy.area(a) for a in row.sas)
        except TaxonomyError as exc:
            raise DatasetError(f"{row.name}: {exc}") from None
        if row.target_id is not None:
            targets = frozenset({row.target_id})
        elif row.group is not None:
            targets = frozenset(setup[m].authored_id for m in group_members[row.group] if m != rid)
        else:
            targets = frozenset()
        targets -= {row.authored_id}
        reviewers.append(
            ReviewerProfile(
                id=rid,
                subject_areas=areas,
                authored_papers=frozenset({row.authored_id}),
                group=row.group,
                target_papers=targets,
                name=row.name,
            )
        )
    try:
        instance = ConferenceInstance(
            papers=papers,
            reviewers=tuple(reviewers),
            taxonomy=taxonomy,
            paper_load=paper_load,
            reviewer_load=reviewer_load,
            groups={g: tuple(m) for g, m in group_members.items()},
        )
    except InstanceError as exc:
        raise DatasetError(str(exc)) from None
    return instance, conventions


def load_dataset(directory: str | os.PathLike, paper_load: int = 3, reviewer_load: int = 3) -> Dataset:
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"{directory}: not a directory")
    required = [SETUP_FILE, HONEST_FILE, MALICIOUS_FILE, ANNOTATIONS_FILE]
    for name in required:
        if not (directory / name).exists():
            raise DatasetError(f"{directory}: missing {name}")
    taxonomy = Taxonomy.from_file(_find_text_file(directory, AREAS_FILE, ("subject", "area")))
    titles = read_lines(_find_text_file(directory, TITLES_FILE, ("title", "paper")))
    setup = read_setup(directory / SETUP_FILE)
    instance, conventions = build_instance(setup, taxonomy, titles, paper_load, reviewer_load)
    name_to_id = {row.name: i for i, row in enumerate(setup)}
    honest = read_bidding(directory / HONEST_FILE, titles, name_to_id)
    malicious = read_bidding(directory / MALICIOUS_FILE, titles, name_to_id)
    annotations = read_annotations(directory / ANNOTATIONS_FILE, name_to_id)
    logger.info(
        "loaded %s: %d reviewers, %d papers, %d honest / %d malicious responses",
        directory,
        instance.n_reviewers,
        instance.n_papers,
        len(honest),
        len(malicious),
    )
    return Dataset(instance, honest, malicious, annotations, conventions)


def read_labels(path: str | os.PathLike) -> dict[int, tuple[bool, int | None]]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            strategy = rec["strategy"].strip()
            out[int(rec["reviewer_id"])] = (rec["is_malicious"].strip() == "1", int(strategy) if strategy else None)
    return out


def read_bid_matrix(path: str | os.PathLike, dataset: Dataset) -> Responses:
    """Read a bidding-format CSV against an already loaded dataset's titles and names."""
    inst = dataset.instance
    titles = [p.title for p in inst.papers]
    names = {r.name: r.id for r in inst.reviewers}
    return read_bidding(Path(path), titles, names)


# -- writing -----------------------------------------------------------------


def _atomic_write(path: Path, write):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str | os.PathLike, header: Sequence[str], rows) -> None:
    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    _atomic_write(Path(path), write)


def _reviewer_name(r: ReviewerProfile) -> str:
    return r.name or f"R{r.id}"


def _setup_rows(instance: ConferenceInstance):
    for r in instance.reviewers:
        if len(r.authored_papers) != 1:
            raise DatasetError(f"reviewer {r.id}: setup format holds exactly one authored paper")
        (authored,) = r.authored_papers
        mates = [m for m in instance.groups.get(r.group, ()) if m != r.id] if r.group is not None else []
        implied = frozenset(p for m in mates for p in instance.reviewers[m].authored_papers) - r.authored_papers
        target_sa = target_id = ""
        if r.target_papers != implied:
            if len(r.target_papers) != 1:
                raise DatasetError(f"reviewer {r.id}: explicit targets must be a single paper")
            (target_id,) = r.target_papers
            target_sa = instance.papers[target_id].subject_area.id
        yield [
            _reviewer_name(r),
            " ".join(str(a.id) for a in r.subject_areas),
            instance.papers[authored].subject_area.id,
            authored,
            target_sa,
            target_id,
            "" if r.group is None else r.group,
        ]


def _write_bidding(path: Path, instance: ConferenceInstance, responses: Responses):
    text_keys: list[str] = []
    for texts in responses.free_text:
        for k in texts:
            if k not in text_keys:
                text_keys.append(k)

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Name"] + [f"Q1_{p.id + 1}" for p in instance.papers] + [f"Q{k + 2}" for k in range(len(text_keys))])
        w.writerow(["Name"] + [p.title for p in instance.papers] + text_keys)
        for k, rid in enumerate(responses.reviewer_ids):
            texts = responses.free_text[k] if k < len(responses.free_text) else {}
            w.writerow(
                [_reviewer_name(instance.reviewers[rid])]
                + [BID_LABELS[int(b)] for b in responses.bids[k]]
                + [texts.get(key, "") for key in text_keys]
            )

    _atomic_write(path, write)


def write_dataset(dataset: Dataset, directory: str | os.PathLike) -> None:
    directory = Path(directory)
    inst = dataset.instance
    names = [_reviewer_name(r) for r in inst.reviewers]
    if len(set(names)) != len(names):
        raise DatasetError("reviewer names must be unique to be written")
    if any(not p.title for p in inst.papers) or len({p.title for p in inst.papers}) != inst.n_papers:
        raise DatasetError("paper titles must be non-empty and unique to be written")
    write_csv(directory / SETUP_FILE, SETUP_COLUMNS, _setup_rows(inst))
    _atomic_write(directory / AREAS_FILE, lambda fh: fh.write("\n".join(inst.taxonomy.to_lines()) + "\n"))
    _atomic_write(directory / TITLES_FILE, lambda fh: fh.write("".join(p.title + "\n" for p in inst.papers)))
    _write_bidding(directory / HONEST_FILE, inst, dataset.honest)
    _write_bidding(directory / MALICIOUS_FILE, inst, dataset.malicious)
    write_csv(
        directory / ANNOTATIONS_FILE,
        ANNOTATION_COLUMNS,
        (
            [a.name or names[rid], a.strategy, {True: "Y", False: "N", None: ""}[a.discussed]]
            for rid, a in sorted(dataset.annotations.items())
        ),
    )


def write_instance(
    instance: ConferenceInstance,
    bids,
    labels: Mapping[int, tuple[bool, int | None]],
    directory: str | os.PathLike,
) -> Dataset:
    """Write an instance whose reviewers are split into honest and malicious by ``labels``.

    ``labels[r] = (is_malicious, strategy index or None)``.  Produces the
    standard dataset files plus ``labels.csv``; returns the dataset written.
    """
    bids = check_bids(bids, instance.shape)
    honest_ids = tuple(r.id for r in instance.reviewers if not labels.get(r.id, (False, None))[0])
    malicious_ids = tuple(r.id for r in instance.reviewers if labels.get(r.id, (False, None))[0])
    annotations = {
        rid: StrategyAnnotation(_reviewer_name(instance.reviewers[rid]), NO_STRATEGY if s is None else s)
        for rid in malicious_ids
        for s in [labels[rid][1]]
    }
    dataset = Dataset(
        instance,
        Responses(honest_ids, bids[list(honest_ids)].reshape(len(honest_ids), instance.n_papers)),
        Responses(malicious_ids, bids[list(malicious_ids)].reshape(len(malicious_ids), instance.n_papers)),
        annotations,
    )
    write_dataset(dataset, directory)
    write_csv(
        Path(directory) / LABELS_FILE,
        LABEL_COLUMNS,
        (
            [r.id, int(labels.get(r.id, (False, None))[0]), "" if labels.get(r.id, (False, None))[1] is None else labels[r.id][1]]
            for r in instance.reviewers
        ),
    )
    return dataset


# -- validation --------------------------------------------------------------


def validate_dataset(dataset: Dataset | ConferenceInstance, max_authors: int = 2) -> list[Finding]:
    """Check the construction rules of the original activity.

    Groupmates must not share an authored paper, and no paper may have more
    than ``max_authors`` authors.
    """
    inst = dataset.instance if isinstance(dataset, Dataset) else dataset
    findings = []
    for gid, members in sorted(inst.groups.items()):
        owners: dict[int, list[int]] = {}
        for m in members:
            for p in inst.reviewers[m].authored_papers:
                owners.setdefault(p, []).append(m)
        for p, who in sorted(owners.items()):
            if len(who) > 1:
                names = ", ".join(_reviewer_name(inst.reviewers[m]) for m in who)
                findings.append(Finding("shared-authored-paper", f"group {gid}: members {names} all authored paper {p}"))
    authors = Counter(p for r in inst.reviewers for p in r.authored_papers)
    for p, count in sorted(authors.items()):
        if count > max_authors:
            findings.append(Finding("too-many-authors", f"paper {p} has {count} authors (at most {max_authors})"))
    return findings
