import numpy as np
import pytest

from topnets import SimplicialComplex
from topnets import _accel

BACKENDS = ["numba", "numpy"] if _accel.HAVE_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def path3():
    return SimplicialComplex.from_graph(3, [(0, 1), (1, 2)])


def cycle(n):
    return SimplicialComplex.from_graph(n, [(i, (i + 1) % n) if i + 1 < n else (0, n - 1) for i in range(n)])


def filled_triangle():
    return SimplicialComplex([(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)])


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
