from __future__ import annotations

from dataclasses import dataclass

import pytest

from heatlab.fractal_ops import build_gasket
from heatlab.graph_ops import discretize_graph, interval, star
from heatlab.kernel_engine import compute_spectrum

# acceptance outcomes, filled by tests/test_acceptance.py and printed at the end
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@dataclass
class Case:
    name: str
    op: object
    space: object
    spec: object
    graph: object = None


def _case(name, g, h):
    op, sp = discretize_graph(g, h)
    return Case(name, op, sp, compute_spectrum(op), g)


@pytest.fixture(scope="session")
def interval_case():
    return _case("interval", interval(), 1 / 200)


@pytest.fixture(scope="session")
def star_case():
    return _case("star", star(), 1 / 100)


@pytest.fixture(scope="session")
def star_kirchhoff_case():
    return _case("star-kirchhoff", star(dirichlet_leaves=False), 1 / 100)


@pytest.fixture(scope="session")
def gasket4_case():
    g, op, rs, es = build_gasket(4)
    c = Case("gasket4", op, rs, compute_spectrum(op))
    c.gasket = g
    c.euclidean = es
    return c


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
