"""Region sets: disjoint axis-parallel cells carrying success-probability estimates.

A region set partitions a fixed outer box. Cells are stored as closed boxes,
but membership is half-open so that every point belongs to exactly one cell:
a point sits in a cell when ``lo < x <= hi`` on each axis, except on axes
where the cell touches the outer lower bound, where ``lo <= x`` is used.
Splitting at threshold ``t`` therefore sends ``x <= t`` left and ``x > t`` right.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .domain import FEATURE_HI, FEATURE_LO, FeatureVector

log = logging.getLogger(__name__)

MODEL_FORMAT = "heurlearn-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Hyperrectangle:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi differ in length")
        for a, b in zip(self.lo, self.hi):
            if not a <= b:
                raise ValueError(f"empty interval [{a}, {b}]")

    @property
    def n(self) -> int:
        return len(self.lo)

    def contains(self, x: Sequence[float]) -> bool:
        """Closed-box containment."""
        return all(a <= v <= b for a, v, b in zip(self.lo, x, self.hi))

    def center(self) -> tuple[float, ...]:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    def split(self, axis: int, threshold: float) -> tuple["Hyperrectangle", "Hyperrectangle"]:
        if not self.lo[axis] < threshold < self.hi[axis]:
            raise ValueError(f"threshold {threshold} not inside axis {axis} of {self}")
        left_hi = list(self.hi)
        left_hi[axis] = threshold
        right_lo = list(self.lo)
        right_lo[axis] = threshold
        return Hyperrectangle(self.lo, tuple(left_hi)), Hyperrectangle(tuple(right_lo), self.hi)

    def corners(self) -> list[tuple[float, ...]]:
        out = [()]
        for a, b in zip(self.lo, self.hi):
            out = [c + (v,) for c in out for v in ((a, b) if a != b else (a,))]
        return out

    def volume(self) -> float:
        return float(np.prod([b - a for a, b in zip(self.lo, self.hi)]))


TILE_BOUNDS = Hyperrectangle(FEATURE_LO, FEATURE_HI)


@dataclass(frozen=True)
class Region:
    r: Hyperrectangle
    p_hat: float
    e: float
    centroid: tuple[float, ...]
    s: int = 0
    m: int = 0

    def __post_init__(self):
        if not 0.0 < self.p_hat <= 1.0:
            raise ValueError(f"p_hat out of range: {self.p_hat}")
        if self.e < 1.0:
            raise ValueError(f"error factor below 1: {self.e}")
        if not 0 <= self.s <= self.m:
            raise ValueError(f"bad counts s={self.s} m={self.m}")


@dataclass
class RegionSet:
    regions: tuple[Region, ...]
    bounds: Hyperrectangle
    # Points clamped into bounds by locate/route; diagnostic only.
    clamped: int = field(default=0, compare=False)

    @cached_property
    def _arrays(self):
        lo = np.array([rg.r.lo for rg in self.regions], dtype=float)
        hi = np.array([rg.r.hi for rg in self.regions], dtype=float)
        at_floor = lo == np.asarray(self.bounds.lo, dtype=float)
        return lo, hi, at_floor

    def __len__(self) -> int:
        return len(self.regions)

    def clamp(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, np.asarray(self.bounds.lo, dtype=float), np.asarray(self.bounds.hi, dtype=float))

    def route(self, X) -> np.ndarray:
        """Index of the containing region for each row of ``X`` (points are clamped first)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] == 0:
            return np.zeros(0, dtype=int)
        Xc = self.clamp(X)
        n_out = int(np.any(Xc != X, axis=1).sum())
        if n_out:
            self.clamped += n_out
            log.debug("clamped %d points into feature bounds", n_out)
        lo, hi, at_floor = self._arrays
        out = np.empty(len(Xc), dtype=int)
        for start in range(0, len(Xc), 2048):
            B = Xc[start : start + 2048, None, :]
            above = (B > lo[None]) | ((B == lo[None]) & at_floor[None])
            inside = np.all(above & (B <= hi[None]), axis=2)
            hits = inside.sum(axis=1)
            if np.any(hits != 1):
                bad = np.flatnonzero(hits != 1)[0]
                raise AssertionError(f"point {B[bad, 0].tolist()} lies in {hits[bad]} regions")
            out[start : start + len(B)] = np.argmax(inside, axis=1)
        return out

    def index_of(self, x: Sequence[float]) -> int:
        return int(self.route([x])[0])

    def with_regions(self, regions: Iterable[Region]) -> "RegionSet":
        return RegionSet(tuple(regions), self.bounds)


class PartitionError(AssertionError):
    """A region set no longer partitions its bounds."""


def check_partition(rs: RegionSet) -> None:
    """Raise PartitionError unless the cells are disjoint and exactly cover the bounds."""
    blo = np.asarray(rs.bounds.lo, dtype=float)
    bhi = np.asarray(rs.bounds.hi, dtype=float)
    live = bhi > blo
    lo, hi, _ = rs._arrays
    if lo.shape[0] == 0:
        raise PartitionError("no regions")
    if np.any(lo < blo) or np.any(hi > bhi):
        raise PartitionError("a region extends outside the bounds")
    widths = (hi - lo)[:, live]
    total = float(np.prod(bhi[live] - blo[live]))
    covered = float(np.prod(widths, axis=1).sum())
    if abs(covered - total) > 1e-9 * max(total, 1.0):
        raise PartitionError(f"cells cover volume {covered}, bounds have {total}")
    llo, lhi = lo[:, live], hi[:, live]
    for i in range(len(llo) - 1):
        overlap = np.all(np.maximum(llo[i], llo[i + 1 :]) < np.minimum(lhi[i], lhi[i + 1 :]), axis=1)
        if np.any(overlap):
            j = i + 1 + int(np.flatnonzero(overlap)[0])
            raise PartitionError(f"regions {i} and {j} overlap")
    corners = [c for rg in rs.regions for c in rg.r.corners()]
    try:
        rs.route(corners)
    except AssertionError as exc:
        raise PartitionError(str(exc)) from None


def initial_region_set(bounds: Hyperrectangle, prior_p: float, prior_e: float) -> RegionSet:
    if not 0.0 < prior_p <= 1.0:
        raise ValueError("prior_p must lie in (0, 1]")
    if prior_e < 1.0:
        raise ValueError("prior_e must be >= 1")
    return RegionSet((Region(bounds, prior_p, prior_e, bounds.center()),), bounds)


def locate(rs: RegionSet, x: Sequence[float]) -> Region:
    return rs.regions[rs.index_of(x)]


def discrete_heuristic(rs: RegionSet, x: Sequence[float]) -> float:
    return locate(rs, x).p_hat


def _running_mean(box: Hyperrectangle, c: Sequence[float], m: int, total: np.ndarray, k: int) -> tuple[float, ...]:
    mean = total / k if m == 0 else (np.asarray(c) * m + total) / (m + k)
    # Rounding must not push the centroid out of its own box.
    return tuple(float(v) for v in np.clip(mean, box.lo, box.hi))


def update_counts(rs: RegionSet, points: Sequence[tuple[FeatureVector, bool]]) -> RegionSet:
    """Route labelled points to their regions, adding to (s, m) and the running-mean centroid."""
    if not points:
        return rs
    X = np.array([p[0] for p in points], dtype=float)
    ok = np.array([bool(p[1]) for p in points])
    idx = rs.route(X)
    X = rs.clamp(X)
    regions = list(rs.regions)
    for i in np.unique(idx):
        sel = idx == i
        k = int(sel.sum())
        rg = regions[i]
        regions[i] = replace(
            rg,
            s=rg.s + int(ok[sel].sum()),
            m=rg.m + k,
            centroid=_running_mean(rg.r, rg.centroid, rg.m, X[sel].sum(axis=0), k),
        )
    out = rs.with_regions(regions)
    out.clamped = rs.clamped
    return out


def split_region(rs: RegionSet, index: int, axis: int, threshold: float,
                 left: Optional[dict] = None, right: Optional[dict] = None) -> RegionSet:
    """Replace region ``index`` by its two halves; ``left``/``right`` override fields of each half."""
    parent = rs.regions[index]
    rl, rr = parent.r.split(axis, threshold)
    new_l = Region(rl, parent.p_hat, parent.e, rl.center())
    new_r = Region(rr, parent.p_hat, parent.e, rr.center())
    if left:
        new_l = replace(new_l, **left)
    if right:
        new_r = replace(new_r, **right)
    regions = list(rs.regions)
    regions[index : index + 1] = [new_l, new_r]
    return rs.with_regions(regions)


def region_to_record(rg: Region) -> dict:
    return {
        "lo": list(rg.r.lo),
        "hi": list(rg.r.hi),
        "p_hat": rg.p_hat,
        "e": rg.e,
        "s": rg.s,
        "m": rg.m,
        "centroid": list(rg.centroid),
    }


def region_from_record(rec: dict) -> Region:
    return Region(
        r=Hyperrectangle(tuple(float(v) for v in rec["lo"]), tuple(float(v) for v in rec["hi"])),
        p_hat=float(rec["p_hat"]),
        e=float(rec["e"]),
        centroid=tuple(float(v) for v in rec["centroid"]),
        s=int(rec["s"]),
        m=int(rec["m"]),
    )


def dumps_region_set(rs: RegionSet, header: Optional[dict] = None) -> str:
    """JSON-lines text: a versioned header line, then one region per line."""
    head = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "bounds": {"lo": list(rs.bounds.lo), "hi": list(rs.bounds.hi)},
        "n_regions": len(rs.regions),
    }
    head.update(header or {})
    lines = [json.dumps(head, sort_keys=True)]
    lines.extend(json.dumps(region_to_record(rg), sort_keys=True) for rg in rs.regions)
    return "\n".join(lines) + "\n"


def loads_region_set(text: str) -> tuple[RegionSet, dict]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty model file")
    head = json.loads(lines[0])
    if head.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} file")
    if head.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {head.get('version')}")
    bounds = Hyperrectangle(
        tuple(float(v) for v in head["bounds"]["lo"]), tuple(float(v) for v in head["bounds"]["hi"])
    )
    regions = tuple(region_from_record(json.loads(ln)) for ln in lines[1:])
    if len(regions) != head["n_regions"]:
        raise ValueError(f"expected {head['n_regions']} regions, found {len(regions)}")
    return RegionSet(regions, bounds), head


def write_region_set(rs: RegionSet, path, header: Optional[dict] = None) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_region_set(rs, header))


def read_region_set(path) -> tuple[RegionSet, dict]:
    with open(path) as fh:
        return loads_region_set(fh.read())
