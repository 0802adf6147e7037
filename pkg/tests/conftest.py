import numpy as np
import pytest

from obstaclecontrol.assembly import build_matrices
from obstaclecontrol.mesh import build_friedrichs_keller

_CACHE = {}


def mesh_and_mats(n):
    if n not in _CACHE:
        mesh = build_friedrichs_keller(n)
        _CACHE[n] = (mesh, build_matrices(mesh))
    return _CACHE[n]


@pytest.fixture
def mesh4():
    return mesh_and_mats(4)


@pytest.fixture
def mesh8():
    return mesh_and_mats(8)


@pytest.fixture
def mesh16():
    return mesh_and_mats(16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
