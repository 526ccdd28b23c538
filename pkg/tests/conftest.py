import numpy as np
import pytest

from vkmorley.mesh import Mesh, l_shape_crisscross, red_refine, unit_square_crisscross


def perturbed_square(seed=0, amount=0.08):
    """Criss-cross(2) with interior vertices moved, so no two triangles are congruent."""
    m = unit_square_crisscross(2)
    rng = np.random.default_rng(seed)
    p = m.vertices.copy()
    inner = ~m.boundary_vertex_flags
    p[inner] += rng.uniform(-amount, amount, size=(inner.sum(), 2))
    return Mesh(p, m.triangles)


SMALL_MESHES = {
    "square-cc1": lambda: unit_square_crisscross(1),
    "square-cc2": lambda: unit_square_crisscross(2),
    "square-red1": lambda: red_refine(unit_square_crisscross(1)),
    "lshape-cc1": lambda: l_shape_crisscross(1),
    "square-perturbed": perturbed_square,
}


@pytest.fixture(params=sorted(SMALL_MESHES))
def small_mesh(request):
    """Every test mesh with at most 16 triangles."""
    return SMALL_MESHES[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
