"""Success probabilities from labelled search trees.

Covers raw and smoothed estimates with multiplicative error factors,
rescaling of biased (heuristically sampled) estimates onto the cumulative
scale, and error-weighted merging of two estimates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .knowledge import Hyperrectangle
from .search import SearchTree

log = logging.getLogger(__name__)

CAP_EPS = 1e-6


class NoInformationError(ValueError):
    """An estimate was requested from zero observations."""


class InconsistentEstimatesError(ValueError):
    """Two exact (error-free) estimates disagree."""


@dataclass(frozen=True)
class EstimatorConfig:
    z: float = 2.0
    a: float = 1.0
    b: float = 2.0
    min_cell_count: int = 3

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError("z must be positive")
        if not (self.a > 0 and self.b > self.a):
            raise ValueError("smoothing constants need a > 0 and b > a")
        if self.min_cell_count < 1:
            raise ValueError("min_cell_count must be >= 1")


@dataclass(frozen=True)
class ElementaryRegion:
    r: Hyperrectangle
    p_raw: Optional[float]
    p_prime: float
    e_prime: float
    s: int
    m: int
    capped: bool = False


def elementary_counts(trees: Sequence[SearchTree], r: Hyperrectangle) -> tuple[int, int]:
    """(success, total) over developed nodes of ``trees`` whose features fall in the closed box ``r``."""
    s = m = 0
    for t in trees:
        for n in t.nodes:
            if n.developed and r.contains(n.x):
                m += 1
                s += n.on_solution_path
    return s, m


def raw_probability(s: int, m: int) -> float:
    if m <= 0:
        raise NoInformationError("raw probability needs m > 0")
    return s / m


def smoothed_estimate(s: int, m: int, cfg: EstimatorConfig = EstimatorConfig()) -> tuple[float, float]:
    """Laplace-smoothed probability and its error factor.

    p = (s + a) / (m + b); the error factor is exp of ``z`` standard errors
    of log p (delta method), so the truth is believed within [p/e, p*e].
    """
    if not 0 <= s <= m:
        raise ValueError(f"need 0 <= s <= m, got s={s} m={m}")
    p = (s + cfg.a) / (m + cfg.b)
    log_e = cfg.z * math.sqrt((1.0 - p) / (p * (m + cfg.b)))
    return p, math.exp(log_e)


def elementary_region(r: Hyperrectangle, s: int, m: int, cfg: EstimatorConfig = EstimatorConfig()) -> ElementaryRegion:
    p, e = smoothed_estimate(s, m, cfg)
    return ElementaryRegion(r, s / m if m else None, p, e, s, m)


def normalization_factor(p_cumulative: float, p_elementary: float) -> float:
    if p_elementary <= 0:
        raise NoInformationError("elementary probability is zero")
    return p_cumulative / p_elementary


def aggregate_probability(sub: Sequence[ElementaryRegion]) -> float:
    """Count-weighted mean of the sub-region estimates."""
    total = sum(q.m for q in sub)
    if total == 0:
        raise NoInformationError("sub-regions carry no observations")
    return sum(q.m * q.p_prime for q in sub) / total


def normalize(sub: Sequence[ElementaryRegion], k: float, eps: float = CAP_EPS) -> list[ElementaryRegion]:
    """Scale each sub-region estimate by ``k``, capping just below 1."""
    if not k > 0:
        raise ValueError("normalization factor must be positive")
    out = []
    for q in sub:
        p = k * q.p_prime
        if p > 1.0 - eps:
            log.warning("normalized estimate %.6g capped at 1 - %g", p, eps)
            out.append(replace(q, p_prime=1.0 - eps, capped=True))
        else:
            out.append(replace(q, p_prime=p))
    return out


def reclassify(p_hat: float, e: float, p_new: float, e_new: float) -> tuple[float, float]:
    """Merge two estimates by inverse-variance weighting of log p.

    An estimate with e == 1 is exact and wins outright.
    """
    if e < 1 or e_new < 1:
        raise ValueError("error factors must be >= 1")
    if e == 1.0 or e_new == 1.0:
        if e == 1.0 and e_new == 1.0 and p_hat != p_new:
            raise InconsistentEstimatesError(f"exact estimates disagree: {p_hat} vs {p_new}")
        return (p_hat, e) if e == 1.0 else (p_new, e_new)
    w = 1.0 / math.log(e) ** 2
    w_new = 1.0 / math.log(e_new) ** 2
    e_merged = min(math.exp(1.0 / math.sqrt(w + w_new)), e, e_new)
    if p_hat == p_new:
        return p_hat, e_merged
    log_p = (w * math.log(p_hat) + w_new * math.log(p_new)) / (w + w_new)
    return math.exp(log_p), e_merged
