import numpy as np
import pytest

from higa import KnotVector, TensorKnotVector, initial_mesh


def open_knots(p, interior=()):
    return KnotVector(p, (0.0,) * (p + 1) + tuple(interior) + (1.0,) * (p + 1))


def tensor_knots(p, interior=()):
    kv = open_knots(p, interior)
    return TensorKnotVector((kv, kv))


def corner_refined_mesh(p=2, rounds=3):
    """Repeatedly refine the lower-left corner element of a unit-square mesh."""
    mesh = initial_mesh(tensor_knots(p))
    for _ in range(rounds):
        deepest = max(e.level for e in mesh.active)
        corner = min(e for e in mesh.active if e.level == deepest)
        mesh = mesh.refine([corner])
    return mesh


@pytest.fixture
def rng():
    return np.random.default_rng(42)
