import numpy as np
import pytest

from ldrbm.generators import generate_ideal_atrium, generate_ideal_biventricle, generate_slab
from ldrbm.mesh import Mesh


@pytest.fixture(scope="session")
def slab():
    return generate_slab((1.0, 0.5, 0.3), 0.1)


@pytest.fixture(scope="session")
def biv():
    return generate_ideal_biventricle(h=0.15)


@pytest.fixture(scope="session")
def la():
    return generate_ideal_atrium("LA", h=0.1)


@pytest.fixture(scope="session")
def ra():
    return generate_ideal_atrium("RA", h=0.1)


def unit_cube():
    """One hexahedron with its six faces tagged separately."""
    nodes = np.array(
        [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float
    )
    elements = np.arange(8)[None]
    facets = np.array(
        [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [3, 7, 6, 2], [0, 4, 7, 3], [1, 2, 6, 5]]
    )
    tags = {"z0": 1, "z1": 2, "y0": 3, "y1": 4, "x0": 5, "x1": 6}
    return Mesh(nodes, elements, facets, np.arange(1, 7), tags)
