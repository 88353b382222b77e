import os
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from bidsim.dataset import load_dataset
from bidsim.model import ConferenceInstance, Paper, ReviewerProfile, Taxonomy

MINI_DIR = Path(str(resources.files("bidsim") / "data" / "mini"))
DATASET_ENV = "BIDSIM_DATASET"


def released_dataset_dir() -> Path | None:
    path = os.environ.get(DATASET_ENV)
    if path and Path(path).is_dir():
        return Path(path)
    return None


@pytest.fixture(scope="session")
def mini_dir() -> Path:
    return MINI_DIR


@pytest.fixture(scope="session")
def mini():
    return load_dataset(MINI_DIR)


@pytest.fixture(scope="session")
def taxonomy():
    return Taxonomy.bundled()


def random_instance(
    rng: np.random.Generator,
    n_reviewers: int,
    n_papers: int,
    taxonomy: Taxonomy | None = None,
    paper_load: int = 1,
    reviewer_load: int = 1,
    one_to_one: bool = True,
) -> ConferenceInstance:
    """Random profiles; reviewer i authors paper i when ``one_to_one`` and i < n_papers."""
    tax = taxonomy or Taxonomy.bundled()
    papers = tuple(Paper(p, tax.area(int(rng.integers(tax.n_areas))), f"Paper {p}") for p in range(n_papers))
    reviewers = []
    for r in range(n_reviewers):
        areas = tuple(tax.area(int(a)) for a in rng.choice(tax.n_areas, size=3, replace=False))
        authored = frozenset({r}) if one_to_one and r < n_papers else frozenset()
        reviewers.append(ReviewerProfile(r, areas, authored))
    return ConferenceInstance(papers, tuple(reviewers), tax, paper_load, reviewer_load)


def random_bids(rng: np.random.Generator, shape, p=(0.2, 0.6, 0.2)) -> np.ndarray:
    return rng.choice(np.array([-1, 0, 1], dtype=np.int8), size=shape, p=p)


# Acceptance outcomes, printed as one line each at the end of the run.
ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"CRITERION {k}: {status} ({detail})")
