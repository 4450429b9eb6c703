"""Command line: train, eval, inspect, export.

Exit codes: 0 success, 2 bad config, 3 unreadable input or unwritable
output, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import logging
import sys
from pathlib import Path

import yaml

from .domain import FEATURE_NAMES, read_problems
from .knowledge import check_partition
from .learner import (
    METRIC_COLUMNS,
    ConfigError,
    LearnerConfig,
    evaluate,
    load_model,
    probe_set,
    save_model,
    train,
    write_metrics,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_INVARIANT = 4


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def load_config(path) -> LearnerConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CommandError(EXIT_INPUT, f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CommandError(EXIT_CONFIG, f"config: not valid YAML/JSON: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise CommandError(EXIT_CONFIG, "config: top level must be a mapping")
    try:
        return LearnerConfig.from_dict(raw)
    except ConfigError as exc:
        raise CommandError(EXIT_CONFIG, f"invalid config field {exc.field!r}: {exc}") from None


def _load_model(path):
    try:
        k, cfg = load_model(path)
        check_partition(k.region_set)
    except (OSError, ValueError, KeyError, TypeError, AssertionError) as exc:
        raise CommandError(EXIT_INPUT, f"cannot load model {path}: {exc}") from None
    return k, cfg


def _metrics_row(m) -> list[str]:
    out = []
    for c in METRIC_COLUMNS:
        v = getattr(m, c)
        out.append(str(int(v)) if isinstance(v, bool) else repr(v))
    return out


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    metrics_path = Path(args.metrics) if args.metrics else out.with_suffix(".metrics.csv")

    def report(k, m):
        print(
            f"iteration {m.iteration} depth {m.depth}: solved {m.solved}/{m.attempted} "
            f"mean_developed {m.mean_developed:.2f} success_fraction {m.mean_success_fraction:.4f} "
            f"regions {m.regions}"
        )

    k, history = train(cfg, on_iteration=report)
    try:
        check_partition(k.region_set)
    except AssertionError as exc:
        raise CommandError(EXIT_INVARIANT, f"trained region set invalid: {exc}") from None
    try:
        save_model(k, cfg, out)
        write_metrics(history, metrics_path)
    except OSError as exc:
        raise CommandError(EXIT_INPUT, f"cannot write output: {exc}") from None
    print(f"wrote {out} and {metrics_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    k, cfg = _load_model(args.model)
    if args.problems:
        try:
            problems = read_problems(args.problems)
        except (OSError, ValueError) as exc:
            raise CommandError(EXIT_INPUT, f"cannot read problems {args.problems}: {exc}") from None
    else:
        if args.depth is None:
            raise CommandError(EXIT_CONFIG, "eval needs --problems or --depth")
        problems = probe_set(args.depth, args.count, args.seed)
    if not problems:
        raise CommandError(EXIT_INPUT, "no problems to evaluate")
    m = evaluate(k, problems, cfg)
    w = csv.writer(sys.stdout)
    w.writerow(METRIC_COLUMNS)
    w.writerow(_metrics_row(m))
    if args.out:
        try:
            write_metrics([m], args.out)
        except OSError as exc:
            raise CommandError(EXIT_INPUT, f"cannot write {args.out}: {exc}") from None
    return EXIT_OK


def format_region(rg) -> str:
    fmt = lambda vs: "[" + ", ".join(f"{v:g}" for v in vs) + "]"
    return (
        f"lo={fmt(rg.r.lo)} hi={fmt(rg.r.hi)} p_hat={rg.p_hat:.6g} e={rg.e:.6g} "
        f"s={rg.s} m={rg.m} centroid={fmt(rg.centroid)}"
    )


def cmd_inspect(args) -> int:
    k, _ = _load_model(args.model)
    order = sorted(range(len(k.region_set)), key=lambda i: (-k.region_set.regions[i].p_hat, i))
    for i in order:
        print(format_region(k.region_set.regions[i]))
    return EXIT_OK


def cmd_export(args) -> int:
    k, _ = _load_model(args.model)
    try:
        with open(args.metrics, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise CommandError(EXIT_INPUT, f"cannot read metrics {args.metrics}: {exc}") from None
    if rows and any(c not in rows[0] for c in ("iteration", "mean_developed", "mean_success_fraction")):
        raise CommandError(EXIT_INPUT, f"{args.metrics} is not a metrics file")
    out_dir = Path(args.out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "learning_curve.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            cols = ("iteration", "depth", "solved", "attempted", "mean_developed", "mean_success_fraction")
            w.writerow(cols)
            for row in rows:
                w.writerow([row[c] for c in cols])
        written.append(path)
        n = k.region_set.bounds.n
        for a, b in itertools.combinations(range(n), 2):
            path = out_dir / f"regions_x{a + 1}_x{b + 1}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow((f"lo{a + 1}", f"hi{a + 1}", f"lo{b + 1}", f"hi{b + 1}", "p_hat"))
                for rg in k.region_set.regions:
                    w.writerow([repr(rg.r.lo[a]), repr(rg.r.hi[a]), repr(rg.r.lo[b]), repr(rg.r.hi[b]), repr(rg.p_hat)])
            written.append(path)
    except OSError as exc:
        raise CommandError(EXIT_INPUT, f"cannot write to {out_dir}: {exc}") from None
    for p in written:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heurlearn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--metrics", help="metrics CSV (default: next to the model)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on held-out problems")
    p.add_argument("--model", required=True)
    p.add_argument("--problems", help="file of problem records")
    p.add_argument("--depth", type=int)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the metrics row to this CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="list regions by decreasing probability")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("export", help="write plot-ready tables")
    p.add_argument("--model", required=True)
    p.add_argument("--metrics", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        _err(str(exc))
        return exc.code
    except AssertionError as exc:
        _err(f"invariant violated: {exc}")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
