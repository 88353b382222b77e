import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bidsim.assignment import (
    Assignment,
    AssignmentProblem,
    InfeasibleAssignment,
    solve,
    solve_relaxed,
    success_metric,
)
from bidsim.model import REACHABLE_SIMILARITIES, ReviewerProfile, build_similarity_matrix

from conftest import random_bids, random_instance

GRID = np.array(sorted(REACHABLE_SIMILARITIES))


def brute_force_permutation(sim, conflicts=frozenset()):
    n = sim.shape[0]
    best = -math.inf
    for perm in itertools.permutations(range(n)):
        if any((r, perm[r]) in conflicts for r in range(n)):
            continue
        best = max(best, math.fsum(sim[r, perm[r]] for r in range(n)))
    return best


def brute_force_bmatching(sim, conflicts, paper_load, reviewer_load):
    """Enumerate a reviewer subset per paper; returns -inf when infeasible."""
    n_r, n_p = sim.shape
    choices = [
        [c for c in itertools.combinations(range(n_r), paper_load) if all((r, p) not in conflicts for r in c)]
        for p in range(n_p)
    ]
    best = -math.inf
    for combo in itertools.product(*choices):
        load = [0] * n_r
        for c in combo:
            for r in c:
                load[r] += 1
        if max(load, default=0) <= reviewer_load:
            best = max(best, math.fsum(sim[r, p] for p, c in enumerate(combo) for r in c))
    return best


def check_feasible(assignment, problem):
    n_r, n_p = problem.shape
    for p in range(n_p):
        assert len(assignment.reviewers_of(p)) == problem.paper_load
    for r in range(n_r):
        assert len(assignment.papers_of(r)) <= problem.reviewer_load
    assert not (assignment.pairs & set(problem.conflicts))


def grid_problem(rng, n_r, n_p, loads=(1, 1), conflict_rate=0.0):
    sim = rng.choice(GRID, size=(n_r, n_p))
    conflicts = frozenset((int(r), int(p)) for r, p in zip(*np.nonzero(rng.random((n_r, n_p)) < conflict_rate)))
    return AssignmentProblem(sim, conflicts, *loads)


def test_dominant_diagonal():
    problem = AssignmentProblem(np.array([[4.0, 1.0], [1.0, 4.0]]), frozenset(), 1, 1)
    a = solve(problem)
    assert a.pairs == {(0, 0), (1, 1)}
    assert a.objective == 8.0
    assert solve_relaxed(problem)[1] == pytest.approx(8.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_unit_load_matches_permutation_oracle(seed):
    rng = np.random.default_rng(seed)
    problem = grid_problem(rng, 5, 5)
    assert solve(problem, seed).objective == brute_force_permutation(problem.similarity)


@pytest.mark.parametrize("seed", range(40))
def test_unit_load_with_conflicts_matches_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(2, 7))
    problem = grid_problem(rng, n, n, conflict_rate=0.2)
    best = brute_force_permutation(problem.similarity, problem.conflicts)
    if best == -math.inf:
        with pytest.raises(InfeasibleAssignment):
            solve(problem)
        return
    a = solve(problem, seed)
    check_feasible(a, problem)
    assert a.objective == best


@pytest.mark.parametrize("seed", range(30))
def test_continuous_similarities_match_oracle(seed):
    # non-dyadic weights are quantised to 24 bits before solving
    rng = np.random.default_rng(2000 + seed)
    problem = AssignmentProblem(rng.random((5, 5)) * 4, frozenset(), 1, 1)
    assert solve(problem).objective == pytest.approx(brute_force_permutation(problem.similarity), abs=1e-6)


@pytest.mark.parametrize("seed", range(25))
def test_bmatching_matches_enumeration(seed):
    rng = np.random.default_rng(3000 + seed)
    n_r, n_p = int(rng.integers(3, 6)), int(rng.integers(2, 5))
    loads = (2, int(rng.integers(2, 4)))
    problem = grid_problem(rng, n_r, n_p, loads, conflict_rate=0.15)
    best = brute_force_bmatching(problem.similarity, problem.conflicts, *loads)
    if best == -math.inf:
        with pytest.raises(InfeasibleAssignment):
            solve(problem)
        return
    a = solve(problem, seed)
    check_feasible(a, problem)
    assert a.objective == best


@pytest.mark.parametrize("seed", range(20))
def test_load3_matches_lp_relaxation(seed):
    rng = np.random.default_rng(4000 + seed)
    inst = random_instance(rng, 10, 10, paper_load=3, reviewer_load=3)
    problem = AssignmentProblem.from_instance(inst, build_similarity_matrix(inst, random_bids(rng, (10, 10))))
    a = solve(problem, seed)
    check_feasible(a, problem)
    x, lp = solve_relaxed(problem)
    assert abs(a.objective - lp) <= 1e-9
    assert len(a.pairs) == 30


def test_28x28_load3_gives_84_pairs():
    rng = np.random.default_rng(28)
    inst = random_instance(rng, 28, 28, paper_load=3, reviewer_load=3)
    a = solve(AssignmentProblem.from_instance(inst, build_similarity_matrix(inst, random_bids(rng, (28, 28)))))
    assert len(a.pairs) == 84
    assert all(len(a.papers_of(r)) == 3 for r in range(28))


def test_all_conflicted_is_infeasible():
    sim = np.ones((3, 3))
    conflicts = frozenset(itertools.product(range(3), range(3)))
    problem = AssignmentProblem(sim, conflicts, 1, 1)
    with pytest.raises(InfeasibleAssignment) as err:
        solve(problem)
    assert err.value.paper is not None
    with pytest.raises(InfeasibleAssignment):
        solve_relaxed(problem)


def test_capacity_shortfall_names_paper():
    problem = AssignmentProblem(np.ones((28, 28)), frozenset(), 28, 1)
    with pytest.raises(InfeasibleAssignment, match="paper"):
        solve(problem)


def test_one_paper_unreachable():
    # paper 2 is conflicted for everyone
    conflicts = frozenset((r, 2) for r in range(4))
    with pytest.raises(InfeasibleAssignment) as err:
        solve(AssignmentProblem(np.ones((4, 3)), conflicts, 1, 2))
    assert err.value.paper == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 5), st.integers(0, 5))
def test_raising_a_bid_never_lowers_objective(seed, r, p):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 6, 6, paper_load=2, reviewer_load=2)
    bids = random_bids(rng, (6, 6))
    bids[r, p] = 0
    before = solve(AssignmentProblem.from_instance(inst, build_similarity_matrix(inst, bids))).objective
    bids[r, p] = 1
    after = solve(AssignmentProblem.from_instance(inst, build_similarity_matrix(inst, bids))).objective
    assert after >= before


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_conflict_safety_and_determinism(seed, tie_seed):
    rng = np.random.default_rng(seed)
    problem = grid_problem(rng, 8, 8, (2, 3), conflict_rate=0.3)
    try:
        a = solve(problem, tie_seed)
    except InfeasibleAssignment:
        return
    check_feasible(a, problem)
    assert solve(problem, tie_seed).pairs == a.pairs


def test_tie_seed_changes_choice_not_value():
    problem = AssignmentProblem(np.ones((6, 6)), frozenset(), 1, 1)
    results = {solve(problem, s).pairs for s in range(10)}
    assert len(results) > 1
    assert {solve(problem, s).objective for s in range(10)} == {6.0}


def _target_reviewer(targets):
    from bidsim.model import Taxonomy

    tax = Taxonomy.bundled()
    return ReviewerProfile(0, tuple(tax.area(a) for a in (0, 1, 2)), target_papers=frozenset(targets))


def test_success_metric():
    r = _target_reviewer({4, 9})
    hit = Assignment(frozenset({(0, 4), (0, 12), (0, 20)}), 0.0)
    miss = Assignment(frozenset({(0, 1), (0, 2), (0, 3)}), 0.0)
    assert success_metric(hit, r)
    assert not success_metric(miss, r)
    with pytest.raises(ValueError):
        success_metric(hit, _target_reviewer(set()))
