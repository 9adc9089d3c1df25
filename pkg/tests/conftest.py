import numpy as np
import pytest

from randcache.analytic import NetworkParams
from randcache.content import CachePlacement, ContentParams, FileAllocation

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fig2():
    """Small reference deployment: 8 files, 4 cached with decreasing probabilities."""
    content = ContentParams(8, 1.0, 2, 2)
    alloc = FileAllocation((5, 6, 7, 8), (1, 2, 3, 4))
    placement = CachePlacement.from_vector([5, 6, 7, 8], [0.8, 0.6, 0.4, 0.2])
    net = NetworkParams(1e-4, 1e-3, 4.0, 1, 1.0)
    return net, content, alloc, placement


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
