"""Utility clustering: split cells where success probability differs assuredly."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .domain import FeatureVector
from .estimate import EstimatorConfig, smoothed_estimate
from .knowledge import Hyperrectangle, Region, RegionSet


class SamplePoint(NamedTuple):
    x: FeatureVector
    success: bool


@dataclass(frozen=True)
class SideSummary:
    s: int
    m: int
    p_hat: float
    e: float


@dataclass(frozen=True)
class SplitCandidate:
    axis: int
    threshold: float
    d: float
    left: SideSummary
    right: SideSummary


def dissimilarity(p1: float, e1: float, p2: float, e2: float) -> float:
    """|log p1 - log p2| - log(e1 e2); positive means the two probabilities differ beyond their errors."""
    return abs(math.log(p1) - math.log(p2)) - math.log(e1 * e2)


def quinlan_dissimilarity(p1: float, p2: float) -> float:
    """Information-style comparison measure; kept for experiments, never used to split."""
    q1, q2 = p1 / (p1 + p2), p2 / (p1 + p2)
    m1, m2 = (1 - p1) / (2 - p1 - p2), (1 - p2) / (2 - p1 - p2)
    return q1 * math.log(q1) + q2 * math.log(q2) + m1 * math.log(m1) + m2 * math.log(m2)


def _as_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(points, tuple) and len(points) == 2 and isinstance(points[0], np.ndarray):
        return points
    if len(points) == 0:
        return np.zeros((0, 0)), np.zeros(0, dtype=bool)
    X = np.array([p[0] for p in points], dtype=float)
    y = np.array([bool(p[1]) for p in points])
    return X, y


def _side(s: int, m: int, cfg: EstimatorConfig) -> SideSummary:
    p, e = smoothed_estimate(s, m, cfg)
    return SideSummary(s, m, p, e)


def best_split(points, cell: Hyperrectangle, cfg: EstimatorConfig = EstimatorConfig()) -> Optional[SplitCandidate]:
    """Best axis-parallel dichotomy of ``cell`` by dissimilarity, or None if no split has d > 0.

    Thresholds are midpoints between consecutive distinct observed values.
    Ties on d go to the lowest axis, then the lowest threshold.
    """
    X, y = _as_arrays(points)
    n_pts = len(y)
    if n_pts < 2 * cfg.min_cell_count:
        return None
    s_total = int(y.sum())
    best: Optional[SplitCandidate] = None
    for axis in range(X.shape[1]):
        values, inverse = np.unique(X[:, axis], return_inverse=True)
        if len(values) < 2:
            continue
        m_cum = np.cumsum(np.bincount(inverse, minlength=len(values)))
        s_cum = np.cumsum(np.bincount(inverse, weights=y.astype(float), minlength=len(values)))
        for j in range(len(values) - 1):
            m1 = int(m_cum[j])
            m2 = n_pts - m1
            if m1 < cfg.min_cell_count or m2 < cfg.min_cell_count:
                continue
            s1 = int(round(s_cum[j]))
            left = _side(s1, m1, cfg)
            right = _side(s_total - s1, m2, cfg)
            d = dissimilarity(left.p_hat, left.e, right.p_hat, right.e)
            if d > 0 and (best is None or d > best.d):
                threshold = (float(values[j]) + float(values[j + 1])) / 2
                best = SplitCandidate(axis, threshold, d, left, right)
    return best


@dataclass(frozen=True)
class Leaf:
    r: Hyperrectangle
    X: np.ndarray
    y: np.ndarray

    @property
    def s(self) -> int:
        return int(self.y.sum())

    @property
    def m(self) -> int:
        return len(self.y)


def split_cell(points, cell: Hyperrectangle, cfg: EstimatorConfig = EstimatorConfig()) -> list[Leaf]:
    """Recursively dichotomize ``cell`` until no split is warranted; leaves in left-to-right order."""
    X, y = _as_arrays(points)
    out: list[Leaf] = []
    stack = [(cell, X, y)]
    while stack:
        r, Xc, yc = stack.pop()
        cand = best_split((Xc, yc), r, cfg) if len(yc) else None
        if cand is None:
            out.append(Leaf(r, Xc, yc))
            continue
        rl, rr = r.split(cand.axis, cand.threshold)
        go_left = Xc[:, cand.axis] <= cand.threshold
        # Right pushed first so the left half is processed first.
        stack.append((rr, Xc[~go_left], yc[~go_left]))
        stack.append((rl, Xc[go_left], yc[go_left]))
    return out


def leaf_region(leaf: Leaf, p_hat: float, e: float) -> Region:
    centroid = tuple(float(v) for v in np.clip(leaf.X.mean(axis=0), leaf.r.lo, leaf.r.hi))
    return Region(leaf.r, p_hat, e, centroid, leaf.s, leaf.m)


def route_points(rs: RegionSet, points) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition points by containing region; one (X, y) pair per region."""
    X, y = _as_arrays(points)
    if len(y) == 0:
        n = rs.bounds.n
        return [(np.zeros((0, n)), np.zeros(0, dtype=bool)) for _ in rs.regions]
    X = rs.clamp(X)
    idx = rs.route(X)
    return [(X[idx == i], y[idx == i]) for i in range(len(rs.regions))]


def refine(rs: RegionSet, points, cfg: EstimatorConfig = EstimatorConfig()) -> RegionSet:
    """Split every region whose routed points support it; new cells take smoothed estimates of their points."""
    routed = route_points(rs, points)
    regions: list[Region] = []
    for rg, (X, y) in zip(rs.regions, routed):
        leaves = split_cell((X, y), rg.r, cfg)
        if len(leaves) == 1:
            regions.append(rg)
            continue
        for leaf in leaves:
            p, e = smoothed_estimate(leaf.s, leaf.m, cfg)
            regions.append(leaf_region(leaf, p, e))
    out = rs.with_regions(regions)
    out.clamped = rs.clamped
    return out
