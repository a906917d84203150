import numpy as np
import pytest

from dysparse.graph_store import DynamicGraph


def path_graph(n, w=1.0):
    return DynamicGraph.from_edges(n, [(i, i + 1, w) for i in range(n - 1)])


def triangle(w=1.0):
    return DynamicGraph.from_edges(3, [(0, 1, w), (1, 2, w), (0, 2, w)])


def star(leaves):
    return DynamicGraph.from_edges(leaves + 1, [(0, i, 1.0) for i in range(1, leaves + 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
