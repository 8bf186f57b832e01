from pathlib import Path

import pytest

from starpde.network import StarNetwork
from starpde.problem import ClassicalProblemData, ProblemData

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture
def star3():
    return StarNetwork(3, 1.0)


def constant_one(network, **overrides):
    """g = psi = 1, f = c = r = phi = 0: u = 1 is an exact discrete solution."""
    kw = dict(a=["1 + 0.5*x", 2.0, "1 + t*l"], b=["0.3*sin(x)", -0.5, 0.0], c=0, f=0,
              alpha=[0.5, 1.0, 2.0], r=0, phi=0, psi=1, g=1, dl_g0=0, a_floor=1.0, alpha_floor=0.5)
    kw.update(overrides)
    return ProblemData.create(network, 1.0, 1.0, **kw)


def steady_classical(network, **overrides):
    kw = dict(a=1, b=0, c=0, f=0, alpha=0.5, lam=1, gamma=-1, g=1,
              a_floor=1, alpha_floor=0.5, lambda_floor=1)
    kw.update(overrides)
    return ClassicalProblemData.create(network, 1.0, **kw)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
