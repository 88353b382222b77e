"""Maximum-similarity reviewer assignment under load and conflict constraints.

Each paper receives exactly ``paper_load`` reviewers, each reviewer at most
``reviewer_load`` papers, and no reviewer is given a paper they authored.
The integral problem is solved as a min-cost flow
(source -> reviewer -> paper -> sink); the LP relaxation is kept as an
independent diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import AbstractSet, Iterable

import numpy as np
from ortools.graph.python import max_flow, min_cost_flow
from scipy import optimize, sparse

from .model import ConferenceInstance, ReviewerProfile

# Bits of resolution used when similarities are not small dyadic rationals.
_QUANT_BITS = 24
_TIE_LEVELS = 1 << 8
_MAX_DYADIC_SHIFT = 16


class InfeasibleAssignment(Exception):
    def __init__(self, message: str, paper: int | None = None):
        super().__init__(message)
        self.paper = paper


@dataclass(frozen=True)
class AssignmentProblem:
    similarity: np.ndarray
    conflicts: AbstractSet[tuple[int, int]] = frozenset()
    paper_load: int = 3
    reviewer_load: int = 3

    @classmethod
    def from_instance(cls, instance: ConferenceInstance, similarity: np.ndarray) -> AssignmentProblem:
        similarity = np.asarray(similarity, dtype=np.float64)
        if similarity.shape != instance.shape:
            raise ValueError(f"similarity shape {similarity.shape} does not match instance {instance.shape}")
        return cls(similarity, instance.conflicts(), instance.paper_load, instance.reviewer_load)

    @property
    def shape(self) -> tuple[int, int]:
        return self.similarity.shape

    def allowed(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for r, p in self.conflicts:
            mask[r, p] = False
        return mask


@dataclass(frozen=True)
class Assignment:
    pairs: frozenset[tuple[int, int]]
    objective: float
    similarity: np.ndarray = field(repr=False, compare=False, default=None)

    def papers_of(self, reviewer: int) -> set[int]:
        return {p for r, p in self.pairs if r == reviewer}

    def reviewers_of(self, paper: int) -> set[int]:
        return {r for r, p in self.pairs if p == paper}

    def rows(self) -> list[tuple[int, int, float]]:
        """``(reviewer, paper, similarity)`` sorted by reviewer then paper."""
        return [(r, p, float(self.similarity[r, p])) for r, p in sorted(self.pairs)]


def total_similarity(similarity: np.ndarray, pairs: Iterable[tuple[int, int]]) -> float:
    """Correctly rounded sum, so equal pair sets always give bit-identical objectives."""
    return math.fsum(float(similarity[r, p]) for r, p in pairs)


def _integer_weights(similarity: np.ndarray) -> np.ndarray:
    """Scale similarities to exact integers when they are dyadic, else quantise."""
    for shift in range(_MAX_DYADIC_SHIFT + 1):
        scaled = similarity * (1 << shift)
        if np.all(scaled == np.round(scaled)) and np.abs(scaled).max(initial=0) < 2**20:
            return scaled.astype(np.int64)
    peak = np.abs(similarity).max(initial=0.0)
    return np.round(similarity / peak * (1 << _QUANT_BITS)).astype(np.int64)


def _check_capacity(problem: AssignmentProblem):
    n_r, n_p = problem.shape
    if problem.paper_load < 1 or problem.reviewer_load < 1:
        raise ValueError("loads must be positive")
    if n_r * problem.reviewer_load < n_p * problem.paper_load:
        paper = _short_paper(problem)
        raise InfeasibleAssignment(
            f"paper {paper} cannot be assigned {problem.paper_load} reviewers: {n_r} reviewers x load "
            f"{problem.reviewer_load} cannot cover {n_p} papers x load {problem.paper_load}",
            paper=paper,
        )


def _network(problem: AssignmentProblem):
    n_r, n_p = problem.shape
    allowed = problem.allowed()
    rev, pap = np.nonzero(allowed)
    source, sink = n_r + n_p, n_r + n_p + 1
    tails = np.concatenate([np.full(n_r, source), rev, n_r + np.arange(n_p)]).astype(np.int32)
    heads = np.concatenate([np.arange(n_r), n_r + pap, np.full(n_p, sink)]).astype(np.int32)
    caps = np.concatenate(
        [np.full(n_r, problem.reviewer_load), np.ones(len(rev)), np.full(n_p, problem.paper_load)]
    ).astype(np.int64)
    return rev, pap, source, sink, tails, heads, caps


def _short_paper(problem: AssignmentProblem) -> int:
    """Find a paper that cannot reach its load even under maximum flow."""
    n_r, n_p = problem.shape
    rev, pap, source, sink, tails, heads, caps = _network(problem)
    mf = max_flow.SimpleMaxFlow()
    mf.add_arcs_with_capacity(tails, heads, caps)
    mf.solve(source, sink)
    flows = mf.flows(np.arange(mf.num_arcs()))
    into_sink = flows[len(tails) - n_p :]
    short = np.nonzero(into_sink < problem.paper_load)[0]
    return int(short[0]) if len(short) else 0


def solve(problem: AssignmentProblem, tie_seed: int = 0) -> Assignment:
    """Exact maximum-similarity assignment.

    Costs are the negated (integer-scaled) similarities multiplied by a
    factor larger than any possible sum of tie-breaking offsets; the offsets
    are drawn from ``tie_seed``, so among co-optimal assignments the one
    returned depends only on the problem and the seed.
    """
    _check_capacity(problem)
    n_r, n_p = problem.shape
    sim = np.asarray(problem.similarity, dtype=np.float64)
    rev, pap, source, sink, tails, heads, caps = _network(problem)

    weights = _integer_weights(sim)
    n_units = n_p * problem.paper_load
    spread = n_units * (_TIE_LEVELS - 1) + 1
    if np.abs(weights).max(initial=0) * spread * (n_r + n_p + 2) >= 2**62:
        raise OverflowError("similarity range too wide for exact integer costs")
    offsets = np.random.default_rng(tie_seed).integers(0, _TIE_LEVELS, size=sim.shape, dtype=np.int64)
    arc_cost = -weights[rev, pap] * spread + offsets[rev, pap]
    costs = np.concatenate([np.zeros(n_r, np.int64), arc_cost, np.zeros(n_p, np.int64)])

    mcf = min_cost_flow.SimpleMinCostFlow()
    mcf.add_arcs_with_capacity_and_unit_cost(tails, heads, caps, costs)
    mcf.set_nodes_supplies(np.array([source, sink]), np.array([n_units, -n_units]))
    status = mcf.solve()
    if status != mcf.OPTIMAL:
        paper = _short_paper(problem)
        raise InfeasibleAssignment(f"paper {paper} cannot be assigned {problem.paper_load} reviewers", paper=paper)
    flows = mcf.flows(np.arange(n_r, n_r + len(rev)))
    chosen = np.nonzero(flows > 0)[0]
    pairs = frozenset(zip(rev[chosen].tolist(), pap[chosen].tolist()))
    return Assignment(pairs, total_similarity(sim, pairs), sim)


def solve_relaxed(problem: AssignmentProblem) -> tuple[np.ndarray, float]:
    """LP relaxation (0 <= x <= 1) solved with HiGHS; returns the fractional matrix and its objective."""
    _check_capacity(problem)
    n_r, n_p = problem.shape
    sim = np.asarray(problem.similarity, dtype=np.float64)
    allowed = problem.allowed()
    rev, pap = np.nonzero(allowed)
    n_var = len(rev)
    if n_var == 0:
        if n_p:
            raise InfeasibleAssignment("every reviewer-paper pair is conflicted", paper=0)
        return np.zeros(sim.shape), 0.0
    var = np.arange(n_var)
    a_eq = sparse.csr_matrix((np.ones(n_var), (pap, var)), shape=(n_p, n_var))
    a_ub = sparse.csr_matrix((np.ones(n_var), (rev, var)), shape=(n_r, n_var))
    res = optimize.linprog(
        -sim[rev, pap],
        A_ub=a_ub,
        b_ub=np.full(n_r, problem.reviewer_load),
        A_eq=a_eq,
        b_eq=np.full(n_p, problem.paper_load),
        bounds=(0, 1),
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleAssignment("LP relaxation is infeasible", paper=_short_paper(problem))
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    x = np.zeros(sim.shape)
    x[rev, pap] = res.x
    return x, float(-res.fun)


def success_metric(assignment: Assignment, reviewer: ReviewerProfile) -> bool:
    """True iff the reviewer was assigned at least one of their target papers."""
    if not reviewer.target_papers:
        raise ValueError(f"reviewer {reviewer.id} has no target papers")
    return any((reviewer.id, p) in assignment.pairs for p in reviewer.target_papers)
