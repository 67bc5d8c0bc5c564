"""``stochdec`` command line: run an experiment to CSV, or summarise results.

Exit status is 0 when every check passes, 1 when any check fails and 2 on a
usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .harness import EXPERIMENTS, ConfigError, summarize_files, timed_run, write_results
from .oracle import BudgetExceeded

OUT_DIR_ENV = "STOCHDEC_OUT_DIR"


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochdec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENTS:
        s = sub.add_parser(kind, help=f"run the {kind} experiment")
        s.add_argument("--config", help="JSON file of parameter overrides (may hold 'seed')")
        s.add_argument("--seed", type=_u64, default=None, help="master seed (default 0)")
        s.add_argument("--out", default=None, help=f"CSV path (default {kind}.csv); "
                                                   f"${OUT_DIR_ENV} overrides the directory")
        s.add_argument("--trials", type=_positive, default=None)
        s.add_argument("--parallelism", type=_positive, default=1,
                       help="worker processes (results do not depend on it)")
    r = sub.add_parser("report", help="summarise result CSV files")
    r.add_argument("paths", nargs="+", help="CSV files written by the experiment commands")
    return p


def _output_path(kind: str, out: str | None) -> str:
    path = out or f"{kind}.csv"
    override = os.environ.get(OUT_DIR_ENV)
    if override:
        os.makedirs(override, exist_ok=True)
        path = os.path.join(override, os.path.basename(path))
    return path


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        try:
            text, ok = summarize_files(args.paths)
        except (OSError, ValueError) as exc:
            print(f"stochdec report: {exc}", file=sys.stderr)
            return 2
        print(text)
        return 0 if ok else 1

    try:
        cfg = _load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.pop("seed", 0))
        cfg.pop("seed", None)
        trials = args.trials if args.trials is not None else cfg.pop("trials", None)
        cfg.pop("trials", None)
        rows, runtime = timed_run(args.command, cfg, seed, trials, args.parallelism)
    except (OSError, json.JSONDecodeError, ConfigError, BudgetExceeded) as exc:
        print(f"stochdec {args.command}: {exc}", file=sys.stderr)
        return 2
    path = _output_path(args.command, args.out)
    failed = sum(not r.passed for r in rows)
    write_results(rows, path, {
        "experiment": args.command, "seed": seed,
        "trials": EXPERIMENTS[args.command].trials if trials is None else int(trials),
        "parallelism": args.parallelism, "config": cfg, "runtime_s": runtime,
        "rows": len(rows), "failed": failed, "version": __version__,
    })
    print(f"{args.command}: {len(rows)} rows, {failed} failed, {runtime:.2f}s -> {path}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
