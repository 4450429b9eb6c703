import io
from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heurlearn.domain import GOAL, ProblemInstance, features, scramble, successors
from heurlearn.search import (
    SearchBudget,
    SearchNode,
    SearchTree,
    best_first,
    breadth_first,
    mark_success,
    read_trace,
    solve,
    write_trace,
)


def neg_manhattan(x):
    return -x[0]


def order_of(tree):
    return [n.state for n in tree.developed()]


def fifo_order(problem, budget):
    """Reference FIFO development with duplicate skipping and goal test on development."""
    seen = {problem.start}
    queue = deque([problem.start])
    order = []
    while queue and len(order) < budget:
        s = queue.popleft()
        order.append(s)
        if s == problem.goal:
            break
        for t in successors(s):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return order


class TestBudget:
    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            SearchBudget(0)


class TestBestFirst:
    def test_start_is_goal(self):
        t = best_first(ProblemInstance(GOAL), neg_manhattan, SearchBudget(10))
        assert t.solved and t.developed_count == 1 and t.solution_length == 0

    @pytest.mark.parametrize("seed", range(8))
    def test_constant_h_equals_breadth_first(self, seed):
        p = scramble(GOAL, 8, seed)
        a = best_first(p, lambda x: 3.5, SearchBudget(300))
        b = breadth_first(p, SearchBudget(300))
        assert order_of(a) == order_of(b)

    @pytest.mark.parametrize("seed", range(5))
    def test_depth4_manhattan(self, seed, distance_table):
        p = scramble(GOAL, 4, seed)
        t = best_first(p, neg_manhattan, SearchBudget(500))
        assert t.solved
        assert t.solution_length >= distance_table[p.start]
        # Frozen: greedy Manhattan finds 4-move paths on these seeds.
        assert t.solution_length == 4

    def test_develops_max_h_first(self):
        p = scramble(GOAL, 10, 3)
        t = best_first(p, neg_manhattan, SearchBudget(50))
        dev = t.developed()
        # Each developed node had the best h among nodes open at that moment.
        for k, node in enumerate(dev):
            open_nodes = [
                n for n in t.nodes
                if (n.parent is None or t.nodes[n.parent].developed and t.nodes[n.parent].order < k)
                and (not n.developed or n.order >= k)
            ]
            assert -node.x[0] == max(-n.x[0] for n in open_nodes)

    def test_no_duplicate_states(self):
        t = best_first(scramble(GOAL, 14, 1), neg_manhattan, SearchBudget(400))
        states = [n.state for n in t.nodes]
        assert len(states) == len(set(states))

    def test_tree_structure(self):
        t = best_first(scramble(GOAL, 14, 2), neg_manhattan, SearchBudget(400))
        assert t.nodes[0].parent is None
        for n in t.nodes[1:]:
            parent = t.nodes[n.parent]
            assert parent.developed and n.state in successors(parent.state)
            assert n.depth == parent.depth + 1
            assert n.x == features(n.state, GOAL)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 60), st.integers(0, 25), st.integers(0, 1000))
    def test_budget_respected(self, budget, depth, seed):
        t = best_first(scramble(GOAL, depth, seed), neg_manhattan, SearchBudget(budget))
        assert t.developed_count <= budget
        assert t.developed_count == sum(n.developed for n in t.nodes)
        assert t.solved == any(n.developed and n.state == GOAL for n in t.nodes)

    def test_deterministic(self):
        p = scramble(GOAL, 16, 5)
        assert best_first(p, neg_manhattan, SearchBudget(200)) == best_first(p, neg_manhattan, SearchBudget(200))

    @pytest.mark.parametrize("seed", range(6))
    def test_larger_budget_keeps_solution_and_prefix(self, seed):
        p = scramble(GOAL, 12, seed)
        full = breadth_first(p, SearchBudget(100_000))
        b = full.developed_count
        small = breadth_first(p, SearchBudget(b))
        assert small.solved
        for extra in (1, 37, 500):
            big = breadth_first(p, SearchBudget(b + extra))
            assert big.solved
            assert order_of(big)[: b - 1] == order_of(small)[: b - 1]

    def test_goal_takes_last_slot(self):
        p = scramble(GOAL, 6, 0)
        full = breadth_first(p, SearchBudget(10_000))
        goal_node = full.nodes[full.goal_index]
        parent_order = full.nodes[goal_node.parent].order
        # Budget that runs out right after the goal is generated, with unrelated nodes still queued.
        budget = parent_order + 2
        assert budget < full.developed_count
        t = breadth_first(p, SearchBudget(budget))
        assert t.solved and t.developed_count == budget
        assert t.solution_length == full.solution_length

    def test_unsolved_tree_keeps_frontier(self):
        t = breadth_first(scramble(GOAL, 20, 4), SearchBudget(5))
        assert not t.solved and t.solution_length is None
        assert any(not n.developed for n in t.nodes)

    def test_affine_transform_of_h_keeps_order(self):
        p = scramble(GOAL, 18, 9)

        def h(x):
            return -x[0] - 0.5 * x[1] + 0.1 * x[3]

        a = best_first(p, h, SearchBudget(300))
        b = best_first(p, lambda x: 3.0 * h(x) + 11.0, SearchBudget(300))
        assert order_of(a) == order_of(b)


class TestBreadthFirst:
    def test_start_is_goal(self):
        t = breadth_first(ProblemInstance(GOAL), SearchBudget(1))
        assert t.solved and t.developed_count == 1

    def test_depth_one(self):
        t = breadth_first(scramble(GOAL, 1, 11), SearchBudget(5))
        assert t.solved and t.solution_length == 1

    @pytest.mark.parametrize("seed", range(10))
    def test_depth_six_is_optimal(self, seed, distance_table):
        p = scramble(GOAL, 6, seed)
        t = breadth_first(p, SearchBudget(5000))
        assert t.solution_length == distance_table[p.start]

    @pytest.mark.parametrize("seed", range(5))
    def test_fifo_reference(self, seed):
        p = scramble(GOAL, 7, seed)
        assert order_of(breadth_first(p, SearchBudget(200))) == fifo_order(p, 200)


class TestMarkSuccess:
    def test_unsolved_has_no_labels(self):
        t = mark_success(breadth_first(scramble(GOAL, 20, 1), SearchBudget(10)))
        assert t.success_count() == 0
        assert not any(n.on_solution_path for n in t.nodes)

    def test_chain_fully_labelled(self):
        g = GOAL
        s1 = successors(g)[0]
        s0 = [s for s in successors(s1) if s != g][0]
        nodes = (
            SearchNode(s0, None, features(s0), 0, True, 0),
            SearchNode(s1, 0, features(s1), 1, True, 1),
            SearchNode(g, 1, features(g), 2, True, 2),
        )
        t = mark_success(SearchTree(nodes, 3, True, 2, 2))
        assert all(n.on_solution_path for n in t.nodes)

    @pytest.mark.parametrize("depth, seed", [(4, 0), (8, 1), (12, 2), (16, 3)])
    def test_label_count_is_length_plus_one(self, depth, seed):
        t = mark_success(best_first(scramble(GOAL, depth, seed), neg_manhattan, SearchBudget(2000)))
        assert t.solved
        assert t.success_count() == t.solution_length + 1
        labelled = [n for n in t.nodes if n.on_solution_path]
        assert len(labelled) == t.solution_length + 1
        assert {n.depth for n in labelled} == set(range(t.solution_length + 1))

    def test_original_tree_untouched(self):
        t = best_first(scramble(GOAL, 4, 0), neg_manhattan, SearchBudget(100))
        mark_success(t)
        assert not any(n.on_solution_path for n in t.nodes)


def test_guidance_raises_success_fraction():
    fr_bfs, fr_h = [], []
    for seed in range(15):
        p = scramble(GOAL, 8, seed)
        fr_bfs.append(solve(p, None, SearchBudget(1000)).success_fraction())
        fr_h.append(solve(p, neg_manhattan, SearchBudget(1000)).success_fraction())
    assert sum(fr_h) / len(fr_h) >= sum(fr_bfs) / len(fr_bfs)


def test_trace_round_trip():
    t = solve(scramble(GOAL, 6, 2), neg_manhattan, SearchBudget(100))
    buf = io.StringIO()
    write_trace(t, buf)
    rows = read_trace(io.StringIO(buf.getvalue()))
    assert [r[0] for r in rows] == list(range(t.developed_count))
    assert [r[1] for r in rows] == [n.x for n in t.developed()]
    assert sum(r[2] for r in rows) == t.solution_length + 1
