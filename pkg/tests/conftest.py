import numpy as np
import pytest

from clifford_miura.algebra import Multivector, algebra


def random_mv(rng, n, witt=False, complex_coeffs=True):
    alg = algebra(n, witt)
    data = rng.normal(size=alg.dim)
    if complex_coeffs:
        data = data + 1j * rng.normal(size=alg.dim)
    return Multivector(alg, data)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
