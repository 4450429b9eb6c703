"""The 8-puzzle: states, moves, scrambled instances and state features.

States are 9-tuples read row by row, 0 standing for the blank.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Tuple

SIDE = 3
CELLS = SIDE * SIDE

State = Tuple[int, ...]
FeatureVector = Tuple[float, ...]

GOAL: State = (1, 2, 3, 4, 5, 6, 7, 8, 0)

N_FEATURES = 4
FEATURE_NAMES = ("manhattan", "misplaced", "reversals", "blank_distance")
# Loose a-priori bounds; every valid state maps inside them.
FEATURE_LO = (0.0, 0.0, 0.0, 0.0)
FEATURE_HI = (24.0, 8.0, 12.0, 4.0)


def _neighbours(i: int) -> Tuple[int, ...]:
    r, c = divmod(i, SIDE)
    out = []
    if r > 0:
        out.append(i - SIDE)
    if r < SIDE - 1:
        out.append(i + SIDE)
    if c > 0:
        out.append(i - 1)
    if c < SIDE - 1:
        out.append(i + 1)
    return tuple(out)


# Cell adjacency in fixed order: up, down, left, right.
ADJACENT = tuple(_neighbours(i) for i in range(CELLS))
ADJACENT_PAIRS = tuple((i, j) for i in range(CELLS) for j in ADJACENT[i] if i < j)


@dataclass(frozen=True)
class ProblemInstance:
    start: State
    goal: State = GOAL
    scramble_depth: int = 0
    seed: int = 0

    def to_record(self) -> str:
        """One-line text form: start digits, goal digits, depth, seed."""
        return "{} {} {} {}".format(
            "".join(map(str, self.start)),
            "".join(map(str, self.goal)),
            self.scramble_depth,
            self.seed,
        )

    @classmethod
    def from_record(cls, line: str) -> "ProblemInstance":
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"expected 4 fields, got {len(parts)}: {line!r}")
        start = parse_state(parts[0])
        goal = parse_state(parts[1])
        return cls(start, goal, int(parts[2]), int(parts[3]))


def parse_state(text: str) -> State:
    if len(text) != CELLS or not text.isdigit():
        raise ValueError(f"bad state {text!r}")
    s = tuple(int(ch) for ch in text)
    validate_state(s)
    return s


def validate_state(s: State) -> None:
    if len(s) != CELLS or sorted(s) != list(range(CELLS)):
        raise ValueError(f"not a permutation of 0..{CELLS - 1}: {s!r}")


def read_problems(path) -> list[ProblemInstance]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(ProblemInstance.from_record(line))
    return out


def write_problems(problems, path) -> None:
    with open(path, "w") as fh:
        for p in problems:
            fh.write(p.to_record() + "\n")


def _swap(s: State, i: int, j: int) -> State:
    lst = list(s)
    lst[i], lst[j] = lst[j], lst[i]
    return tuple(lst)


def successors(s: State) -> list[State]:
    """States reachable by sliding one tile into the blank (blank moves up, down, left, right)."""
    z = s.index(0)
    return [_swap(s, z, j) for j in ADJACENT[z]]


def is_goal(s: State, goal: State = GOAL) -> bool:
    return s == goal


def scramble(goal: State, depth: int, seed: int) -> ProblemInstance:
    """Random walk of ``depth`` blank moves from ``goal`` that never undoes the previous move."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    rng = random.Random(seed)
    s = goal
    prev_blank = None
    for _ in range(depth):
        z = s.index(0)
        moves = [j for j in ADJACENT[z] if j != prev_blank]
        j = moves[rng.randrange(len(moves))]
        s = _swap(s, z, j)
        prev_blank = z
    return ProblemInstance(s, goal, depth, seed)


def goal_positions(goal: State) -> list[int]:
    pos = [0] * CELLS
    for i, t in enumerate(goal):
        pos[t] = i
    return pos


def features(s: State, goal: State = GOAL) -> FeatureVector:
    """(total Manhattan distance, misplaced tiles, reversed adjacent pairs, blank distance)."""
    gpos = goal_positions(goal)
    manhattan = 0
    misplaced = 0
    for i, t in enumerate(s):
        if t == 0:
            continue
        g = gpos[t]
        if g != i:
            misplaced += 1
            manhattan += abs(i // SIDE - g // SIDE) + abs(i % SIDE - g % SIDE)
    reversals = 0
    for i, j in ADJACENT_PAIRS:
        a, b = s[i], s[j]
        if a and b and gpos[a] == j and gpos[b] == i:
            reversals += 1
    z = s.index(0)
    g = gpos[0]
    blank = abs(z // SIDE - g // SIDE) + abs(z % SIDE - g % SIDE)
    return (float(manhattan), float(misplaced), float(reversals), float(blank))
