import numpy as np
import pytest
from hypothesis import settings

from dcss.graph import Topology

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_connected_topology(rng: np.random.Generator, n: int, extra: float = 0.3) -> Topology:
    """Random spanning tree plus independent extra edges."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra:
                edges.add((i, j))
    return Topology(n, tuple(sorted(edges)), name=f"rand{n}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
