import numpy as np
import pytest

from eitcem.mesh import Mesh, build_regular_polygon_mesh, refine_uniform


@pytest.fixture(scope="session")
def hexadecagon_levels():
    meshes = [build_regular_polygon_mesh(16, 8)]
    for _ in range(4):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


@pytest.fixture(scope="session")
def square_mesh():
    """Unit square split along a diagonal, electrodes on bottom and top edges."""
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    triangles = np.array([[0, 1, 2], [0, 2, 3]])
    bedges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    tags = np.array([1, 0, 2, 0])
    return Mesh(vertices, triangles, bedges, tags)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """Record ``(criterion, passed, detail)`` for the end-of-run acceptance summary."""

    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[criterion] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
