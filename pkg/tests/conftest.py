import numpy as np
import pytest

from opdiff.linops import PolyOperator, SymTridiag
from opdiff.schemes import SecondOrderProblem

ACCEPTANCE_LINES = []


def random_base(rng, n, lo=2.0, hi=4.0):
    """Diagonally dominant symmetric tridiagonal matrix (SPD)."""
    off = rng.uniform(-0.9, 0.9, n - 1)
    return SymTridiag(rng.uniform(lo, hi, n), off)


def random_problem(rng, n, rhs=None):
    D = random_base(rng, n)
    C = PolyOperator(D, *rng.uniform(0.2, 1.5, 1), 0.0, 0.0)
    B = PolyOperator(D, rng.uniform(0.1, 1.0), rng.uniform(0.0, 1.0), 0.0)
    A = PolyOperator(D, rng.uniform(0.0, 1.0), rng.uniform(0.5, 2.0), rng.uniform(0.0, 0.5))
    return SecondOrderProblem(A, B, C, rng.standard_normal(n), rng.standard_normal(n), rhs=rhs)


def scalar_op(c0=0.0, c1=0.0, c2=0.0, d=1.0):
    return PolyOperator(SymTridiag([d], []), c0, c1, c2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
