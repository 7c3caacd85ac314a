import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from riffled import dense, perm, riffle  # noqa: E402


@st.composite
def rankings(draw, min_n=1, max_n=7):
    n = draw(st.integers(min_n, max_n))
    return tuple(draw(st.permutations(range(n))))


@st.composite
def partitions(draw, n):
    size = draw(st.integers(1, n - 1))
    a = draw(st.lists(st.integers(0, n - 1), min_size=size, max_size=size, unique=True))
    return perm.ItemPartition(tuple(sorted(a)), n)


def random_split_model(rng, n, a_items, concentration=1.0):
    part = perm.ItemPartition(tuple(a_items), n)
    m = riffle.InterleavingDistribution(part.p, part.q, rng.dirichlet(np.ones(math.comb(n, part.p)) * concentration))
    f = dense.random_distribution(part.p, rng, concentration)
    g = dense.random_distribution(part.q, rng, concentration)
    return m, f, g, part


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
