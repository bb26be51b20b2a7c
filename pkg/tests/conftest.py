import numpy as np
import pytest

from fundmat.lasserre import SemiAlgebraicProblem
from fundmat.polyopt import Polynomial

GOLDEN_RATIO = (1 + np.sqrt(5)) / 2


def worked_example(objective_var: int = 0) -> SemiAlgebraicProblem:
    """Two-variable test problem; objective -x1 (objective_var=0) or -x2 (1)."""
    x1, x2 = Polynomial.variables(2)
    obj = -(x1 if objective_var == 0 else x2)
    return SemiAlgebraicProblem(
        obj,
        inequalities=(3 - 2 * x2 - x1 * x1 - x2 * x2, -x1 - x2 - x1 * x2, 1 + x1 * x2),
    )


@pytest.fixture
def example_problem():
    return worked_example(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance check, echoed again at the end of the run
ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
