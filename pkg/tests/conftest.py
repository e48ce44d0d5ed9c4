import math

import numpy as np
import pytest

from fraclab.grid_ops import assemble_elliptic, build_uniform_grid, elliptic_spec
from fraclab.spectral import decompose, neumann_augment


def make_operator(n, coef="const:1", bc="dirichlet", alpha=0.0, beta=math.pi):
    spec = elliptic_spec(coef, bc)
    grid = build_uniform_grid(alpha, beta, n, spec.bc.layout)
    return assemble_elliptic(spec, grid)


@pytest.fixture(scope="session")
def dir256():
    return decompose(make_operator(256))


@pytest.fixture(scope="session")
def neu128():
    return neumann_augment(decompose(make_operator(128, bc="neumann")))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
