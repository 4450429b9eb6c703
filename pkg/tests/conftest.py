from collections import deque

import pytest

from heurlearn.domain import GOAL

from oracles import three_cell_tree_data


def _neighbours_by_coordinates(s):
    z = s.index(0)
    r, c = divmod(z, 3)
    out = []
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        rr, cc = r + dr, c + dc
        if 0 <= rr < 3 and 0 <= cc < 3:
            j = rr * 3 + cc
            t = list(s)
            t[z], t[j] = t[j], t[z]
            out.append(tuple(t))
    return out


@pytest.fixture(scope="session")
def distance_table():
    """True move distance to GOAL for every reachable 8-puzzle state (exhaustive BFS)."""
    dist = {GOAL: 0}
    queue = deque([GOAL])
    while queue:
        s = queue.popleft()
        for t in _neighbours_by_coordinates(s):
            if t not in dist:
                dist[t] = dist[s] + 1
                queue.append(t)
    return dist


@pytest.fixture
def coordinate_neighbours():
    return _neighbours_by_coordinates


@pytest.fixture
def three_cell_tree():
    return three_cell_tree_data()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
