import numpy as np
import pytest

from ballpack import kernels
from ballpack.triangulation import generate_16cell, generate_boundary_4simplex, load_triangulation
from helpers import DATA


@pytest.fixture(scope="session")
def t5():
    return generate_boundary_4simplex()


@pytest.fixture(scope="session")
def t16():
    return generate_16cell()


@pytest.fixture(scope="session")
def tsub():
    return load_triangulation((DATA / "subdivided_5cell.tri").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    old = kernels.backend_name
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(old)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number][1])
