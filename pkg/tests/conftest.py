import numpy as np
import pytest

from smallworld_seir import graph as sw


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_graph():
    return sw.generate(10_000, 20, 0.1, seed=1)


def cycle(n):
    """Pure ring: k=2, p=0."""
    return sw.generate(n, 2, 0.0, seed=0)


def star(leaves):
    u = np.zeros(leaves, dtype=int)
    v = np.arange(1, leaves + 1)
    return sw.from_edges(leaves + 1, 2, 0.0, u, v, np.zeros(leaves, dtype=bool))


def path(n, long=None):
    u = np.arange(n - 1)
    v = u + 1
    long = np.zeros(n - 1, dtype=bool) if long is None else np.asarray(long)
    return sw.from_edges(n, 2, 0.0, u, v, long)


@pytest.fixture
def criterion(request):
    """Report one acceptance criterion as a PASS/FAIL line, then assert it."""

    def report(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
        request.config.__dict__.setdefault("_acceptance_lines", []).append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
