import numpy as np
import pytest


def random_matrix(rng, rows, cols=None):
    cols = rows if cols is None else cols
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_hermitian(rng, n):
    a = random_matrix(rng, n)
    return a + a.conj().T


def random_density(rng, n):
    g = random_matrix(rng, n)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
CRITERIA_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(CRITERIA_LINES):
            terminalreporter.write_line(CRITERIA_LINES[key])
