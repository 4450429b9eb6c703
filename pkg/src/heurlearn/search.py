"""Best-first and breadth-first search that keep the whole search tree.

Trees record every generated node. Only developed (expanded) nodes count
towards probability statistics; frontier nodes are kept for inspection.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from .domain import FeatureVector, ProblemInstance, State, features, successors

# Evaluates a state through its feature vector; larger is better.
Evaluator = Callable[[FeatureVector], float]


@dataclass(frozen=True)
class SearchBudget:
    max_developed: int = 1000

    def __post_init__(self):
        if self.max_developed < 1:
            raise ValueError("max_developed must be >= 1")


@dataclass(frozen=True)
class SearchNode:
    state: State
    parent: Optional[int]
    x: FeatureVector
    depth: int = 0
    developed: bool = False
    # Position in development order, -1 while on the frontier.
    order: int = -1
    on_solution_path: bool = False


@dataclass(frozen=True)
class SearchTree:
    nodes: tuple[SearchNode, ...]
    developed_count: int
    solved: bool
    solution_length: Optional[int] = None
    goal_index: Optional[int] = None

    def developed(self) -> list[SearchNode]:
        """Developed nodes in development order."""
        out = [n for n in self.nodes if n.developed]
        out.sort(key=lambda n: n.order)
        return out

    def success_count(self) -> int:
        return sum(1 for n in self.nodes if n.developed and n.on_solution_path)

    def success_fraction(self) -> float:
        if self.developed_count == 0:
            return 0.0
        return self.success_count() / self.developed_count


def best_first(problem: ProblemInstance, h: Evaluator, budget: SearchBudget) -> SearchTree:
    """Develop the open node with the largest ``h`` until the goal is developed or the budget runs out.

    Ties go to the node generated first. States already generated are not
    re-added. If the goal has been generated when only one development is
    left, that last development goes to the goal.
    """
    goal = problem.goal
    x0 = features(problem.start, goal)
    nodes: list[dict] = [dict(state=problem.start, parent=None, x=x0, depth=0, order=-1)]
    seen = {problem.start: 0}
    open_heap = [(-h(x0), 0)]
    pending_goal = 0 if problem.start == goal else None
    developed = 0
    goal_index = None

    while open_heap and developed < budget.max_developed:
        if pending_goal is not None and developed == budget.max_developed - 1:
            idx = pending_goal
        else:
            _, idx = heapq.heappop(open_heap)
        node = nodes[idx]
        node["order"] = developed
        developed += 1
        if node["state"] == goal:
            goal_index = idx
            break
        for child in successors(node["state"]):
            if child in seen:
                continue
            cx = features(child, goal)
            cidx = len(nodes)
            seen[child] = cidx
            nodes.append(dict(state=child, parent=idx, x=cx, depth=node["depth"] + 1, order=-1))
            heapq.heappush(open_heap, (-h(cx), cidx))
            if child == goal and pending_goal is None:
                pending_goal = cidx

    frozen = tuple(
        SearchNode(
            state=n["state"],
            parent=n["parent"],
            x=n["x"],
            depth=n["depth"],
            developed=n["order"] >= 0,
            order=n["order"],
        )
        for n in nodes
    )
    solved = goal_index is not None
    return SearchTree(
        nodes=frozen,
        developed_count=developed,
        solved=solved,
        solution_length=frozen[goal_index].depth if solved else None,
        goal_index=goal_index,
    )


def _constant(x: FeatureVector) -> float:
    return 0.0


def breadth_first(problem: ProblemInstance, budget: SearchBudget) -> SearchTree:
    """FIFO development order; a constant evaluator under first-generated tie-breaking."""
    return best_first(problem, _constant, budget)


def mark_success(tree: SearchTree) -> SearchTree:
    """Return a copy of ``tree`` whose root-to-goal path nodes are labelled as successes."""
    on_path = set()
    if tree.solved:
        idx = tree.goal_index
        while idx is not None:
            on_path.add(idx)
            idx = tree.nodes[idx].parent
    nodes = tuple(replace(n, on_solution_path=(i in on_path)) for i, n in enumerate(tree.nodes))
    return replace(tree, nodes=nodes)


def solve(problem: ProblemInstance, h: Optional[Evaluator], budget: SearchBudget) -> SearchTree:
    """Search with ``h`` (breadth-first when None) and label the solution path."""
    tree = breadth_first(problem, budget) if h is None else best_first(problem, h, budget)
    return mark_success(tree)


def labelled_points(trees: Sequence[SearchTree]) -> list[tuple[FeatureVector, bool]]:
    """(feature vector, success) for every developed node, trees in order."""
    out = []
    for t in trees:
        for n in t.developed():
            out.append((n.x, n.on_solution_path))
    return out


def write_trace(tree: SearchTree, fh) -> None:
    """One developed node per line: development index, features, success flag (tab separated)."""
    for n in tree.developed():
        xs = " ".join(repr(v) for v in n.x)
        fh.write(f"{n.order}\t{xs}\t{int(n.on_solution_path)}\n")


def read_trace(fh) -> list[tuple[int, FeatureVector, bool]]:
    out = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        order, xs, flag = line.split("\t")
        out.append((int(order), tuple(float(v) for v in xs.split()), flag == "1"))
    return out
