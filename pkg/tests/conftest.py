"""Shared fixtures: seeded random data and small meshes."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fem import BoundaryKind, DGFunction, DirichletData, Mesh1D  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


@pytest.fixture
def periodic_mesh():
    return Mesh1D.uniform(-np.pi, np.pi, 12)


@pytest.fixture
def dirichlet_mesh():
    return Mesh1D.uniform(0.0, 1.0, 10, BoundaryKind.DIRICHLET, DirichletData(0.3, -0.2))


@pytest.fixture
def random_function(rng):
    def make(mesh, k):
        return DGFunction(mesh, k, rng.standard_normal((mesh.n_cells, k + 1)))

    return make
