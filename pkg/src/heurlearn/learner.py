"""The learning loop: solve a batch of problems, then learn from the search trees.

Each iteration searches with the current heuristic (breadth-first on the
first iteration), measures success probabilities per cumulative region,
rescales heuristically biased measurements onto the cumulative scale,
merges or splits regions, and refits the linear evaluation function.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .cluster import leaf_region, route_points, split_cell
from .domain import GOAL, ProblemInstance, scramble
from .estimate import (
    EstimatorConfig,
    aggregate_probability,
    elementary_region,
    normalization_factor,
    normalize,
    reclassify,
    smoothed_estimate,
)
from .knowledge import (
    TILE_BOUNDS,
    Region,
    RegionSet,
    dumps_region_set,
    initial_region_set,
    loads_region_set,
)
from .regression import LinearHeuristic, data_from_regions, fit, linear_eval
from .search import Evaluator, SearchBudget, SearchTree, solve

log = logging.getLogger(__name__)

HEURISTIC_MODES = ("discrete", "linear")
DEFAULT_SCHEDULE = (4, 6, 8, 10, 12, 14, 16, 18, 20, 22)
# Keeps probe seeds apart from curriculum seeds.
_PROBE_STREAM = 0x70726F62


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class LearnerConfig:
    iterations: int = 10
    problems_per_iteration: int = 25
    depth_schedule: tuple[int, ...] = DEFAULT_SCHEDULE
    budget: SearchBudget = SearchBudget(1000)
    heuristic_mode: str = "discrete"
    estimator: EstimatorConfig = EstimatorConfig()
    regression_tolerance: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations", "must be >= 1")
        if self.problems_per_iteration < 1:
            raise ConfigError("problems_per_iteration", "must be >= 1")
        sched = self.depth_schedule
        if not sched:
            raise ConfigError("depth_schedule", "must not be empty")
        if any(d < 0 for d in sched):
            raise ConfigError("depth_schedule", "depths must be non-negative")
        if any(b < a for a, b in zip(sched, sched[1:])):
            raise ConfigError("depth_schedule", "must be non-decreasing")
        if self.heuristic_mode not in HEURISTIC_MODES:
            raise ConfigError("heuristic_mode", f"must be one of {HEURISTIC_MODES}")
        if not self.regression_tolerance >= 0:
            raise ConfigError("regression_tolerance", "must be >= 0")

    def depth(self, i: int) -> int:
        """Scramble depth for iteration ``i``; a short schedule repeats its last depth."""
        return self.depth_schedule[min(i, len(self.depth_schedule) - 1)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depth_schedule"] = list(self.depth_schedule)
        d["budget"] = self.budget.max_developed
        return d

    @classmethod
    def from_dict(cls, raw: Optional[dict]) -> "LearnerConfig":
        """Build from plain data, defaulting every missing field; errors name the offending field."""
        raw = dict(raw or {})
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        kw = {}
        for key in ("iterations", "problems_per_iteration", "seed"):
            if key in raw:
                kw[key] = _as_int(key, raw[key])
        if "depth_schedule" in raw:
            val = raw["depth_schedule"]
            if not isinstance(val, (list, tuple)):
                raise ConfigError("depth_schedule", "must be a list of integers")
            kw["depth_schedule"] = tuple(_as_int("depth_schedule", v) for v in val)
        if "budget" in raw:
            val = raw["budget"]
            if isinstance(val, dict):
                val = val.get("max_developed")
            kw["budget"] = _budget(val)
        if "heuristic_mode" in raw:
            kw["heuristic_mode"] = str(raw["heuristic_mode"])
        if "regression_tolerance" in raw:
            kw["regression_tolerance"] = _as_float("regression_tolerance", raw["regression_tolerance"])
        if "estimator" in raw:
            kw["estimator"] = _estimator(raw["estimator"])
        return cls(**kw)


def _as_int(name, v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(name, f"expected an integer, got {v!r}")
    return int(v)


def _as_float(name, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"expected a number, got {v!r}")
    return float(v)


def _budget(v) -> SearchBudget:
    n = _as_int("budget", v)
    if n < 1:
        raise ConfigError("budget", "must be >= 1")
    return SearchBudget(n)


def _estimator(raw) -> EstimatorConfig:
    if not isinstance(raw, dict):
        raise ConfigError("estimator", "must be a mapping")
    kw = {}
    for key, v in raw.items():
        name = f"estimator.{key}"
        if key == "min_cell_count":
            kw[key] = _as_int(name, v)
        elif key in ("z", "a", "b"):
            kw[key] = _as_float(name, v)
        else:
            raise ConfigError(name, "unknown field")
    try:
        return EstimatorConfig(**kw)
    except ValueError as exc:
        raise ConfigError("estimator", str(exc)) from None


@dataclass(frozen=True)
class Knowledge:
    region_set: RegionSet
    linear: Optional[LinearHeuristic] = None
    iteration_index: int = 0


@dataclass(frozen=True)
class IterationMetrics:
    iteration: int
    depth: int
    attempted: int
    solved: int
    mean_developed: float
    mean_success_fraction: float
    regions: int
    norm_count: int = 0
    norm_k_min: float = math.nan
    norm_k_max: float = math.nan
    capped: int = 0
    no_solution: bool = False

    @property
    def solved_fraction(self) -> float:
        return self.solved / self.attempted if self.attempted else 0.0


METRIC_COLUMNS = tuple(f.name for f in fields(IterationMetrics))


def initial_knowledge(cfg: LearnerConfig) -> Knowledge:
    p, e = smoothed_estimate(0, 0, cfg.estimator)
    return Knowledge(initial_region_set(TILE_BOUNDS, p, e))


def _derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def curriculum(cfg: LearnerConfig, i: int) -> list[ProblemInstance]:
    if not 0 <= i < cfg.iterations:
        raise IndexError(f"iteration {i} outside 0..{cfg.iterations - 1}")
    depth = cfg.depth(i)
    return [scramble(GOAL, depth, _derive_seed(cfg.seed, i, j)) for j in range(cfg.problems_per_iteration)]


def probe_set(depth: int, count: int, seed: int) -> list[ProblemInstance]:
    """Held-out problems drawn from a seed stream disjoint from any curriculum."""
    return [scramble(GOAL, depth, _derive_seed(seed, _PROBE_STREAM, j)) for j in range(count)]


def heuristic(k: Knowledge, mode: str) -> Evaluator:
    """Evaluator for search: the linear fit when requested and available, else the region map."""
    cache: dict = {}
    if mode == "linear" and k.linear is not None:
        lin = k.linear

        def h(x):
            v = cache.get(x)
            if v is None:
                v = cache[x] = linear_eval(lin, x)
            return v
    else:
        rs = k.region_set

        def h(x):
            v = cache.get(x)
            if v is None:
                v = cache[x] = rs.regions[rs.index_of(x)].p_hat
            return v
    return h


def _batch_metrics(trees: Sequence[SearchTree], iteration: int, depth: int, regions: int) -> dict:
    n = len(trees)
    return dict(
        iteration=iteration,
        depth=depth,
        attempted=n,
        solved=sum(t.solved for t in trees),
        mean_developed=sum(t.developed_count for t in trees) / n if n else 0.0,
        mean_success_fraction=sum(t.success_fraction() for t in trees) / n if n else 0.0,
        regions=regions,
    )


def _common_depth(problems: Sequence[ProblemInstance]) -> int:
    depths = {p.scramble_depth for p in problems}
    return depths.pop() if len(depths) == 1 else -1


def _points(trees: Sequence[SearchTree]) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for t in trees:
        for n in t.nodes:
            if n.developed:
                xs.append(n.x)
                ys.append(n.on_solution_path)
    return np.array(xs, dtype=float), np.array(ys, dtype=bool)


def _absorb(rg: Region, p: float, e: float, X: np.ndarray, y: np.ndarray) -> Region:
    """Region with a new estimate and its counts and centroid extended by the points."""
    k = len(y)
    mean = X.sum(axis=0) if rg.m == 0 else np.asarray(rg.centroid) * rg.m + X.sum(axis=0)
    centroid = np.clip(mean / (rg.m + k), rg.r.lo, rg.r.hi)
    return replace(
        rg,
        p_hat=p,
        e=e,
        s=rg.s + int(y.sum()),
        m=rg.m + k,
        centroid=tuple(float(v) for v in centroid),
    )


def fit_linear(rs: RegionSet, tolerance: float) -> Optional[LinearHeuristic]:
    observed = [rg for rg in rs.regions if rg.m > 0]
    if len(observed) < 2:
        return None
    return fit(data_from_regions(observed), tolerance)


def run_iteration(k: Knowledge, problems: Sequence[ProblemInstance], cfg: LearnerConfig) -> tuple[Knowledge, IterationMetrics]:
    rs = k.region_set
    first = k.iteration_index == 0
    h = None if first else heuristic(k, cfg.heuristic_mode)
    trees = [solve(p, h, cfg.budget) for p in problems]
    depth = _common_depth(problems)

    if not any(t.solved for t in trees):
        log.warning("iteration %d: no problem solved; knowledge unchanged", k.iteration_index)
        m = IterationMetrics(**_batch_metrics(trees, k.iteration_index, depth, len(rs)), no_solution=True)
        return replace(k, iteration_index=k.iteration_index + 1), m

    routed = route_points(rs, _points(trees))
    regions: list[Region] = []
    factors: list[float] = []
    capped = 0
    for rg, (X, y) in zip(rs.regions, routed):
        if len(y) == 0:
            regions.append(rg)
            continue
        leaves = split_cell((X, y), rg.r, cfg.estimator)
        sub = [elementary_region(leaf.r, leaf.s, leaf.m, cfg.estimator) for leaf in leaves]
        # The first iteration is the unbiased reference; prior-only regions have nothing to anchor to.
        if not first and rg.m > 0:
            factor = normalization_factor(rg.p_hat, aggregate_probability(sub))
            sub = normalize(sub, factor)
            factors.append(factor)
            capped += sum(q.capped for q in sub)
        if len(leaves) == 1:
            q = sub[0]
            if rg.m == 0:
                p, e = q.p_prime, q.e_prime
            else:
                p, e = reclassify(rg.p_hat, rg.e, q.p_prime, q.e_prime)
            regions.append(_absorb(rg, p, e, X, y))
        else:
            regions.extend(leaf_region(leaf, q.p_prime, q.e_prime) for leaf, q in zip(leaves, sub))

    new_rs = rs.with_regions(regions)
    linear = fit_linear(new_rs, cfg.regression_tolerance) if cfg.heuristic_mode == "linear" else None
    metrics = IterationMetrics(
        **_batch_metrics(trees, k.iteration_index, depth, len(new_rs)),
        norm_count=len(factors),
        norm_k_min=min(factors) if factors else math.nan,
        norm_k_max=max(factors) if factors else math.nan,
        capped=capped,
    )
    return Knowledge(new_rs, linear, k.iteration_index + 1), metrics


def train(
    cfg: LearnerConfig,
    on_iteration: Optional[Callable[[Knowledge, IterationMetrics], None]] = None,
) -> tuple[Knowledge, list[IterationMetrics]]:
    k = initial_knowledge(cfg)
    history = []
    for i in range(cfg.iterations):
        k, m = run_iteration(k, curriculum(cfg, i), cfg)
        log.info(
            "iteration %d depth %d: solved %d/%d, mean developed %.1f, success fraction %.3f, regions %d",
            m.iteration, m.depth, m.solved, m.attempted, m.mean_developed, m.mean_success_fraction, m.regions,
        )
        history.append(m)
        if on_iteration is not None:
            on_iteration(k, m)
    return k, history


def evaluate(k: Knowledge, problems: Sequence[ProblemInstance], cfg: LearnerConfig) -> IterationMetrics:
    """Solve ``problems`` with the knowledge's heuristic; nothing is learned."""
    h = heuristic(k, cfg.heuristic_mode)
    trees = [solve(p, h, cfg.budget) for p in problems]
    return IterationMetrics(**_batch_metrics(trees, k.iteration_index, _common_depth(problems), len(k.region_set)))


def dumps_model(k: Knowledge, cfg: LearnerConfig) -> str:
    header = {
        "iteration": k.iteration_index,
        "config": cfg.to_dict(),
        "linear": k.linear.to_record() if k.linear is not None else None,
    }
    return dumps_region_set(k.region_set, header)


def loads_model(text: str) -> tuple[Knowledge, LearnerConfig]:
    rs, head = loads_region_set(text)
    lin = head.get("linear")
    k = Knowledge(rs, LinearHeuristic.from_record(lin) if lin else None, int(head.get("iteration", 0)))
    return k, LearnerConfig.from_dict(head.get("config"))


def save_model(k: Knowledge, cfg: LearnerConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_model(k, cfg))


def load_model(path) -> tuple[Knowledge, LearnerConfig]:
    with open(path) as fh:
        return loads_model(fh.read())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    return repr(v)


def write_metrics(metrics: Sequence[IterationMetrics], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for m in metrics:
            w.writerow([_fmt(getattr(m, c)) for c in METRIC_COLUMNS])


def read_metrics(path) -> list[IterationMetrics]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for f in fields(IterationMetrics):
                raw = row[f.name]
                if f.name == "no_solution":
                    kw[f.name] = raw == "1"
                elif f.type in ("int", int):
                    kw[f.name] = int(raw)
                else:
                    kw[f.name] = float(raw)
            out.append(IterationMetrics(**kw))
    return out
