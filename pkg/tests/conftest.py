import numpy as np
import pytest

from tetraform import (
    affine_cosine_gain,
    complete_graph,
    cross_formation,
    exponential_gain,
    polar_tetrahedron,
    reference_tetrahedron,
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def topo4():
    return complete_graph(4)


@pytest.fixture(scope="session")
def gain_cos():
    return affine_cosine_gain(1.0)


@pytest.fixture(scope="session")
def gain_exp():
    return exponential_gain()


@pytest.fixture(scope="session")
def tetra():
    return reference_tetrahedron()


@pytest.fixture(scope="session")
def tetra_polar():
    return polar_tetrahedron()


@pytest.fixture(scope="session")
def cross():
    return cross_formation()


def random_states(rng, count, n=4):
    v = rng.standard_normal((count, n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
