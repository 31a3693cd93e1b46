import numpy as np
import pytest
from hypothesis import strategies as st

from distcone import DistanceMatrix


def euclidean(points) -> DistanceMatrix:
    points = np.asarray(points, dtype=float)
    square = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    return DistanceMatrix.from_square(square, check=False)


def random_metric(rng: np.random.Generator, n: int, dim: int = 3) -> DistanceMatrix:
    """A true distance matrix: distinct random points in R^dim."""
    return euclidean(rng.normal(size=(n, dim)))


def random_semimetric(rng: np.random.Generator, n: int, classes: int) -> DistanceMatrix:
    """``classes`` distinct points, each repeated at least once, in random order."""
    base = rng.normal(size=(classes, 2))
    labels = np.concatenate([np.arange(classes), rng.integers(0, classes, n - classes)])
    return euclidean(base[rng.permutation(labels)])


@st.composite
def metrics(draw, min_order=1, max_order=6):
    n = draw(st.integers(min_order, max_order))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    if n >= 2 and draw(st.booleans()):
        return random_semimetric(rng, n, draw(st.integers(1, n)))
    return random_metric(rng, n, draw(st.integers(1, 4)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def unit3():
    return DistanceMatrix([1.0, 1.0, 1.0])


# one line per acceptance criterion, echoed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
