"""Baseline detectors for malicious bidding.

Each detector returns a full ranking of reviewers, most suspicious first.
Ties are always broken by ascending reviewer id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .model import ConferenceInstance, check_bids

DETECTORS = ("counting", "ring", "lowrank")
DEFAULT_RANK = 3
# Residuals are rounded to this many decimals before ordering so that
# floating-point noise on exactly representable matrices does not reorder reviewers.
_RESIDUAL_DECIMALS = 9


@dataclass(frozen=True)
class SuspicionRanking:
    order: np.ndarray  # reviewer ids, most suspicious first
    scores: np.ndarray  # raw score per reviewer id
    detector: str = ""

    def __post_init__(self):
        n = len(self.scores)
        if len(self.order) != n or not np.array_equal(np.sort(self.order), np.arange(n)):
            raise ValueError("ranking order must be a permutation of reviewer ids")

    @property
    def ranks(self) -> np.ndarray:
        """rank[r] = position of reviewer r in the ordering."""
        out = np.empty(len(self.order), dtype=np.int64)
        out[self.order] = np.arange(len(self.order))
        return out

    def rank_of(self, reviewer: int) -> int:
        if not 0 <= reviewer < len(self.order):
            raise KeyError(f"unknown reviewer {reviewer}")
        return int(self.ranks[reviewer])

    def normalized_rank(self, reviewer: int) -> float:
        return self.rank_of(reviewer) / len(self.order)


def rank_of(ranking: SuspicionRanking, reviewer: int) -> int:
    return ranking.rank_of(reviewer)


def normalized_rank(ranking: SuspicionRanking, reviewer: int) -> float:
    return ranking.normalized_rank(reviewer)


@dataclass(frozen=True)
class DetectionInput:
    """Bids with every reviewer's bids on their own papers set to neutral."""

    bids: np.ndarray
    authorship: tuple[frozenset[int], ...]

    @classmethod
    def build(cls, bids, authorship: Sequence[frozenset[int] | set[int]]) -> DetectionInput:
        bids = check_bids(bids).copy()
        if len(authorship) != bids.shape[0]:
            raise ValueError("authorship must list one paper set per reviewer")
        authorship = tuple(frozenset(a) for a in authorship)
        for r, papers in enumerate(authorship):
            bids[r, list(papers)] = 0
        return cls(bids, authorship)

    @classmethod
    def from_instance(cls, instance: ConferenceInstance, bids) -> DetectionInput:
        return cls.build(check_bids(bids, instance.shape), [r.authored_papers for r in instance.reviewers])

    @property
    def n_reviewers(self) -> int:
        return self.bids.shape[0]

    def authorship_matrix(self) -> sparse.csr_matrix:
        rows = [r for r, papers in enumerate(self.authorship) for _ in papers]
        cols = [p for papers in self.authorship for p in sorted(papers)]
        return sparse.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.n_reviewers, self.bids.shape[1])
        )


def _descending(scores: np.ndarray) -> np.ndarray:
    ids = np.arange(len(scores))
    return np.lexsort((ids, -scores))


def net_negativity(bids: np.ndarray) -> np.ndarray:
    """Per-reviewer count of negative bids minus positive bids."""
    return (bids == -1).sum(axis=1).astype(np.int64) - (bids == 1).sum(axis=1)


def counting_detect(data: DetectionInput) -> SuspicionRanking:
    scores = net_negativity(data.bids)
    return SuspicionRanking(_descending(scores), scores.astype(np.float64), "counting")


def ring_pair_tables(data: DetectionInput) -> tuple[np.ndarray, np.ndarray]:
    """Category and total side score for every ordered reviewer pair.

    ``category[i, j]`` counts how many of i->j and j->i include a positive
    bid on the other's paper (2 = mutual).  ``total[i, j]`` sums both
    reviewers' net negativity, each ignoring their bids on the other's papers.
    """
    bids = data.bids
    auth_t = data.authorship_matrix().T.tocsr()  # P x R
    pos = np.asarray((bids == 1).astype(np.float64) @ auth_t)  # pos[i, j]: i's positives on j's papers
    neg = np.asarray((bids == -1).astype(np.float64) @ auth_t)
    pos = np.rint(pos).astype(np.int64)
    neg = np.rint(neg).astype(np.int64)
    base = net_negativity(bids)
    side = base[:, None] - (neg - pos)  # side[i, j]: i's score excluding bids on j's papers
    total = side + side.T
    category = (pos > 0).astype(np.int64) + (pos.T > 0)
    return category, total


def ring_detect(data: DetectionInput) -> SuspicionRanking:
    """Rank reviewers by the best pair they belong to.

    Pairs are ordered by category (mutual positive, one-sided, none) and then
    by descending total side score.  A reviewer's score encodes the best
    (category, total) over its pairs; equal scores fall back to reviewer id.
    """
    n = data.n_reviewers
    if n < 2:
        raise ValueError("ring detection needs at least two reviewers")
    category, total = ring_pair_tables(data)
    width = 4 * data.bids.shape[1] + 1  # exceeds the range of any total
    key = category * width + total
    np.fill_diagonal(key, np.iinfo(np.int64).min)
    best = key.max(axis=1)
    return SuspicionRanking(_descending(best), best.astype(np.float64), "ring")


def truncated_svd(matrix: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leading ``rank`` singular triplets via the eigendecomposition of the smaller Gram matrix.

    Singular vectors are sign-normalised so that the largest-magnitude
    entry of each right singular vector is positive.
    """
    m = np.asarray(matrix, dtype=np.float64)
    n_rows, n_cols = m.shape
    if not 1 <= rank <= min(n_rows, n_cols):
        raise ValueError(f"rank {rank} out of bounds for a {n_rows}x{n_cols} matrix")
    transpose = n_rows < n_cols
    a = m.T if transpose else m  # a has at least as many rows as columns
    evals, evecs = np.linalg.eigh(a.T @ a)
    top = np.argsort(evals)[::-1][:rank]
    s = np.sqrt(np.clip(evals[top], 0.0, None))
    v = evecs[:, top]
    u = np.zeros((a.shape[0], rank))
    nz = s > s[0] * 1e-12 if s[0] > 0 else np.zeros(rank, dtype=bool)
    u[:, nz] = (a @ v[:, nz]) / s[nz]
    if transpose:
        u, v = v, u
    flip = np.sign(v[np.abs(v).argmax(axis=0), np.arange(rank)])
    flip[flip == 0] = 1
    return u * flip, s, (v * flip).T


def low_rank_approximation(matrix: np.ndarray, rank: int) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if rank >= min(m.shape):
        return m.copy()
    u, s, vt = truncated_svd(m, rank)
    # Project onto the leading right singular subspace; exact even where u is undefined.
    if m.shape[0] >= m.shape[1]:
        return m @ vt.T @ vt
    return u @ (u.T @ m)


def lowrank_residuals(data: DetectionInput, rank: int = DEFAULT_RANK) -> np.ndarray:
    b = data.bids.astype(np.float64)
    return np.abs(b - low_rank_approximation(b, rank)).sum(axis=1)


def lowrank_detect(data: DetectionInput, rank: int = DEFAULT_RANK) -> SuspicionRanking:
    scores = lowrank_residuals(data, rank)
    order = _descending(np.round(scores, _RESIDUAL_DECIMALS))
    return SuspicionRanking(order, scores, "lowrank")


def run_detector(name: str, data: DetectionInput, rank: int = DEFAULT_RANK) -> SuspicionRanking:
    if name == "counting":
        return counting_detect(data)
    if name == "ring":
        return ring_detect(data)
    if name == "lowrank":
        return lowrank_detect(data, rank)
    raise ValueError(f"unknown detector {name!r}; choose from {DETECTORS}")
