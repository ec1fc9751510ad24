import numpy as np
import pytest

from milnorlab.expr import parse_expr
from milnorlab.germ import ExplicitChart


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def complex_chart(name, c1, c2, **kw):
    return ExplicitChart.from_complex(name, parse_expr(c1), parse_expr(c2), **kw)


@pytest.fixture
def parabola():
    """The holomorphic graph (z, z^2)."""
    return complex_chart("parabola", "z", "z^2")


@pytest.fixture
def cusp():
    return complex_chart("cusp", "z^2", "z^3")


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
