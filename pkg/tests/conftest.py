import numpy as np
import pytest

from kfusion.frames import FusionSystem, subspace_from_spanning

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_system(ambient_dim, spans, weights=None):
    if weights is None:
        weights = [1.0] * len(spans)
    members = tuple(
        (subspace_from_spanning([np.asarray(v, dtype=float) for v in span]), weight)
        for span, weight in zip(spans, weights)
    )
    return FusionSystem(ambient_dim, members)


def random_fusion_system(rng, ambient_dim, member_dims, weights=None):
    spans = [rng.standard_normal((ambient_dim, d)).T for d in member_dims]
    return make_system(ambient_dim, spans, weights)


@pytest.fixture
def r4_k():
    return np.array(
        [
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )


@pytest.fixture
def r4_system():
    return make_system(4, [[(1, 0, 0, 0), (0, 1, 0, 0)], [(0, 0, 1, 0)]])


@pytest.fixture
def r3_k():
    return np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@pytest.fixture
def r3_system():
    return make_system(3, [[(1, 1, 0), (0, 0, 1)], [(0, 0, 1)], [(1, 1, 0)]])


@pytest.fixture
def r3_dual():
    return make_system(3, [[(1, 0, 0), (0, 1, 0)], [(0, 1, 0)], [(1, 0, 0), (0, 0, 1)]])


@pytest.fixture
def r3_perturbed():
    return make_system(3, [[(1, 1, 0), (0, 0, 1)], [(0, 0, 1), (1, 1, 0)], [(1, 1, 0)]])
