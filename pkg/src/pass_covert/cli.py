"""Command line interface: ``pass-covert {run,compare,sweep,validate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .errors import PassCovertError
from .export import write_metrics_csv, write_sidecar, write_trace_csv
from .harness import METHODS, mean_rate_trace, monte_carlo, summarize


def _load(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.runs is not None:
        cfg = cfg.replace(monte_carlo_runs=args.runs)
    return cfg


def _write_batch(cfg, batch, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    for method, traces in batch.items():
        for tr in traces:
            stem = out / f"{method}_run{tr.run:02d}"
            write_trace_csv(tr, stem.with_suffix(".csv"))
            write_sidecar(stem.with_suffix(".json"), cfg, cfg.seed, method=method, run=tr.run,
                          failed=tr.failed, failure=tr.failure)
    window = cfg.moving_average_window
    write_metrics_csv({m: mean_rate_trace(t, window) for m, t in batch.items()},
                      out / "metrics.csv")
    summary = summarize(batch, window)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _print_summary(summary, file=None):
    file = sys.stdout if file is None else file
    print(f"{'method':<10} {'mean rate':>10} {'final rate':>11} {'pos MSE':>10} "
          f"{'vel MSE':>10} {'infeasible':>10}", file=file)
    for m, s in summary.items():
        print(f"{m:<10} {s['mean_rate']:>10.3f} {s['final_rate']:>11.3f} "
              f"{s['median_position_mse']:>10.2e} {s['median_velocity_mse']:>10.2e} "
              f"{s['infeasible_fraction']:>10.2%}", file=file)


def cmd_run(args) -> int:
    cfg = _load(args)
    batch = monte_carlo(cfg, [args.method], cfg.monte_carlo_runs)
    _print_summary(_write_batch(cfg, batch, Path(args.out)))
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    methods = args.method.split(",") if args.method else METHODS
    batch = monte_carlo(cfg, methods, cfg.monte_carlo_runs)
    _print_summary(_write_batch(cfg, batch, Path(args.out)))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    methods = args.method.split(",") if args.method else METHODS
    levels = [float(x) for x in args.levels.split(",")] if args.levels else cfg.sweep_dbm
    for p in levels:
        sub = cfg.replace(**{"power.p_max_dbm": p})
        batch = monte_carlo(sub, methods, sub.monte_carlo_runs)
        print(f"P_max = {p:g} dBm")
        _print_summary(_write_batch(sub, batch, Path(args.out) / f"p{p:g}dBm"))
    return 0


def cmd_validate(args) -> int:
    from .validate import run_checks

    cfg = _load(args)
    results = run_checks(cfg, np.random.default_rng(cfg.seed))
    ok = True
    for name, passed, detail in results:
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pass-covert", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, method_default=None, out=True):
        sp.add_argument("--config", help="JSON scenario file (defaults when omitted)")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--runs", type=int, help="override the Monte-Carlo run count")
        sp.add_argument("--method", default=method_default,
                        help=f"method (one of {', '.join(METHODS)}; comma list for compare/sweep)")
        if out:
            sp.add_argument("--out", default="results", help="output directory")

    sp = sub.add_parser("run", help="simulate one method")
    common(sp, "sac")
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("compare", help="simulate all methods on paired randomness")
    common(sp)
    sp.set_defaults(func=cmd_compare)
    sp = sub.add_parser("sweep", help="compare methods across transmit powers")
    common(sp)
    sp.add_argument("--levels", help="comma separated P_max levels in dBm")
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("validate", help="run the numerical invariant checks")
    common(sp, out=False)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run" and args.method not in METHODS:
        print(f"error: unknown method {args.method!r}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (PassCovertError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
