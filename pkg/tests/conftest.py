import numpy as np
import pytest
from hypothesis import settings

from nhllg.mesh import Mesh, generate_structured

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

CENTERED_BOX = [(-0.5, 0.5), (-0.5, 0.5)]

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def unit_square():
    return generate_structured([(0.0, 1.0), (0.0, 1.0)], [1, 1], "fixed")


@pytest.fixture
def obtuse_mesh():
    """Two flat triangles sharing the long edge (0,0)-(1,0); both opposite angles are obtuse."""
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [0.5, -0.1]])
    return Mesh(2, nodes, np.array([[0, 1, 2], [0, 3, 1]]), frozenset(range(4)))


def random_unit_field(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def node_index(mesh, point):
    return int(np.argmin(np.linalg.norm(mesh.nodes - np.asarray(point), axis=1)))
