"""Shared fixtures and hypothesis profile."""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fumot.grid import AngularGrid, SpatialGrid
from fumot.transport import hg_kernel

# transport solves are slow compared to the usual hypothesis budget
settings.register_profile(
    "fumot",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("fumot")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["unit-square", "unit-disk"])
def small_setup(request):
    """A 13-node lattice with 8 ordinates and an anisotropic kernel."""
    grid = SpatialGrid(request.param, 13)
    ang = AngularGrid(8)
    return grid, ang, hg_kernel(0.5, ang)


def random_coefficients(grid, rng, lo=0.1, hi=1.0):
    """Smooth random positive field: a + b x + c y + d sin(...)."""
    a, b, c, d = rng.uniform(0.0, 1.0, 4)
    f = a + 0.5 * b * grid.X + 0.5 * c * grid.Y + 0.3 * d * np.sin(3.0 * grid.X + 2.0 * grid.Y)
    f = lo + (hi - lo) * (f - f.min()) / (f.max() - f.min() + 1e-12)
    return grid.fill_ghosts(f)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion, at the end of the run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
