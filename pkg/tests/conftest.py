from __future__ import annotations

from pathlib import Path

import pytest

from dcsens import loads_diagram
from dcsens.corpus import corpus

ROOT = Path(__file__).resolve().parents[1]
DIAGRAMS = ROOT / "diagrams"

SINGLE_NODE = """
format: 1
variables:
  - {id: X, kind: chance, outcomes: [x, not_x]}
chance:
  - {variable: X, parents: [], cpt: [0.3, 0.7]}
"""

TWO_NODE_NET = """
format: 1
variables:
  - {id: W, kind: chance, outcomes: [w, not_w]}
  - {id: B, kind: chance, outcomes: [b, not_b]}
chance:
  - {variable: W, parents: [], cpt: [0.6, 0.4]}
  - {variable: B, parents: [W], cpt: [0.2, 0.8, 0.9, 0.1]}
"""


@pytest.fixture(scope="session")
def mini():
    from dcsens import load_diagram
    return load_diagram(DIAGRAMS / "mini_umbrella.yaml")


@pytest.fixture(scope="session")
def report():
    from dcsens import load_diagram
    return load_diagram(DIAGRAMS / "report_umbrella.yaml")


@pytest.fixture(scope="session")
def gather():
    from dcsens import load_diagram
    return load_diagram(DIAGRAMS / "gather_umbrella.yaml")


@pytest.fixture(scope="session")
def single_node():
    return loads_diagram(SINGLE_NODE)


@pytest.fixture(scope="session")
def two_node_net():
    return loads_diagram(TWO_NODE_NET)


@pytest.fixture(scope="session")
def small_corpus():
    return corpus(40)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
