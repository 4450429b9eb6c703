"""Weighted forward-stepwise linear regression of success probability on features."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .knowledge import Region

log = logging.getLogger(__name__)

# Residual sums below this fraction of the total are treated as an exact fit.
EXACT_FIT = 1e-18


class RegressionDatum(NamedTuple):
    x: tuple[float, ...]
    y: float
    w: float


@dataclass(frozen=True)
class LinearHeuristic:
    b: tuple[float, ...]
    included: tuple[int, ...] = ()

    def __call__(self, x) -> float:
        return linear_eval(self, x)

    def to_record(self) -> dict:
        return {"b": list(self.b), "included": list(self.included)}

    @classmethod
    def from_record(cls, rec: dict) -> "LinearHeuristic":
        return cls(tuple(float(v) for v in rec["b"]), tuple(int(i) for i in rec["included"]))


def weight_of(region: Region) -> float:
    """Inverse squared log error factor; infinite for exact regions (see weights_of)."""
    if region.e <= 1.0:
        return math.inf
    return 1.0 / math.log(region.e) ** 2


def weights_of(regions: Sequence[Region]) -> list[float]:
    """Weights for a datum set: exact regions get ten times the largest finite weight."""
    ws = [weight_of(r) for r in regions]
    finite = [w for w in ws if math.isfinite(w)]
    top = 10.0 * max(finite) if finite else 1.0
    return [w if math.isfinite(w) else top for w in ws]


def data_from_regions(regions: Sequence[Region]) -> list[RegressionDatum]:
    return [RegressionDatum(rg.centroid, rg.p_hat, w) for rg, w in zip(regions, weights_of(regions))]


def _wls(A: np.ndarray, y: np.ndarray, w: np.ndarray) -> Optional[tuple[np.ndarray, float]]:
    G = A.T @ (w[:, None] * A)
    if np.linalg.matrix_rank(G) < A.shape[1]:
        return None
    beta = np.linalg.solve(G, A.T @ (w * y))
    resid = y - A @ beta
    return beta, float(np.sum(w * resid * resid))


def fit(data: Sequence[RegressionDatum], tolerance: float = 0.01) -> LinearHeuristic:
    """Forward selection from the intercept-only model.

    Each step adds the feature giving the smallest weighted residual sum of
    squares (normal equations); selection stops when the relative reduction
    falls below ``tolerance``. Rank-deficient candidates are skipped.
    """
    if len(data) < 2:
        raise ValueError("need at least two data")
    X = np.array([d.x for d in data], dtype=float)
    y = np.array([d.y for d in data], dtype=float)
    w = np.array([d.w for d in data], dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    n_obs, n_feat = X.shape
    ones = np.ones((n_obs, 1))

    included: list[int] = []
    beta, rss = _wls(ones, y, w)
    tss = rss
    while len(included) < n_feat and len(included) + 2 <= n_obs:
        if rss <= EXACT_FIT * tss or rss == 0.0:
            break
        best = None
        for j in range(n_feat):
            if j in included:
                continue
            cols = sorted(included + [j])
            res = _wls(np.hstack([ones, X[:, cols]]), y, w)
            if res is None:
                log.info("feature %d skipped: rank-deficient design", j)
                continue
            if best is None or res[1] < best[2]:
                best = (j, res[0], res[1])
        if best is None:
            break
        j, beta_j, rss_j = best
        if (rss - rss_j) / rss < tolerance:
            break
        included = sorted(included + [j])
        beta, rss = beta_j, rss_j

    b = [0.0] * (n_feat + 1)
    b[0] = float(beta[0])
    for k, j in enumerate(included):
        b[j + 1] = float(beta[k + 1])
    return LinearHeuristic(tuple(b), tuple(included))


def linear_eval(h: LinearHeuristic, x) -> float:
    """Intercept plus dot product; unclamped, used only to order states."""
    b = h.b
    total = b[0]
    for i, v in enumerate(x):
        total += b[i + 1] * v
    return total
