"""Command-line entry points.

Subcommands: ``universe`` (dump the rule list), ``backtest`` (build and
cache a performance matrix), ``spa`` (test a cached matrix), ``report``
(full pipeline), ``calibrate`` (synthetic size/power check). Failures
print a single machine-readable JSON line to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from ._kernels import backend_name
from .backtest import (
    Benchmark,
    build_performance_matrix,
    export_matrix_csv,
    read_matrix,
    write_matrix,
)
from .experiment import (
    ExperimentConfig,
    ExperimentError,
    _parse_date,
    emit_report,
    parse_rolling_spec,
    run_calibration,
    run_experiment,
)
from .market_data import load_csv, slice_period
from .rules.universe import dump_universe_csv, enumerate_universe, family_counts
from .spa import DEFAULT_Q_GRID, spa_sweep


class _Parser(argparse.ArgumentParser):
    # keep CLI failures machine-readable, matching the run-time error path
    def error(self, message):
        _fail(ExperimentError(message))


def _fail(exc: Exception) -> "NoReturn":
    line = json.dumps({"error": str(exc), "type": type(exc).__name__})
    print(line, file=sys.stderr)
    raise SystemExit(2)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snooptest",
                     description="Trading-rule backtests with snooping-robust "
                                 "significance tests.")
    parser.add_argument("--version", action="version",
                        version=f"snooptest {__version__} ({backend_name()} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("universe", help="dump the full rule list as CSV")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")

    p = sub.add_parser("backtest", help="build a performance matrix")
    p.add_argument("--data", required=True, help="OHLCV CSV file")
    p.add_argument("--period", help="START:END dates (defaults to full range)")
    p.add_argument("--kind", default="return", choices=["return", "sharpe"])
    p.add_argument("--benchmark", default="out", choices=["out", "hold"])
    p.add_argument("--no-short", action="store_true",
                   help="long/neutral positions only")
    p.add_argument("--warmup", type=int, default=250)
    p.add_argument("--rf", type=float, default=0.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="matrix cache file to write")
    p.add_argument("--export-csv", help="also export the matrix as CSV")

    p = sub.add_parser("spa", help="test a cached performance matrix")
    p.add_argument("--matrix", required=True, help="matrix cache file")
    p.add_argument("--q-grid", type=float, nargs="+", default=list(DEFAULT_Q_GRID))
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write results CSV here")

    p = sub.add_parser("report", help="full pipeline: periods, backtests, tests")
    p.add_argument("--data", help="OHLCV CSV file")
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--periods", nargs="+", metavar="START:END",
                   help="explicit evaluation periods")
    p.add_argument("--rolling", help="window:step rolling spec, e.g. 5y:1y")
    p.add_argument("--kind", choices=["return", "sharpe", "both"])
    p.add_argument("--benchmark", choices=["out", "hold"])
    p.add_argument("--no-short", action="store_true",
                   help="long/neutral positions only")
    p.add_argument("--q-grid", type=float, nargs="+")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--cache-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--figures", action="store_true",
                   help="also write scatter/running-max/trajectory CSVs")

    p = sub.add_parser("calibrate", help="synthetic size/power check")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--rules", type=int, default=50)
    p.add_argument("--days", type=int, default=500)
    p.add_argument("--q", type=float, default=0.10)
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.10)
    p.add_argument("--plant", type=float, default=3.0)
    p.add_argument("--pvalues", action="store_true",
                   help="include the per-trial p-values in the output")
    return parser


def _parse_period(text: str):
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ExperimentError(f"period must look like START:END, got {text!r}")
    return _parse_date(parts[0]), _parse_date(parts[1])


def _cmd_universe(args) -> int:
    rules = enumerate_universe()
    if args.out == "-":
        dump_universe_csv(rules, sys.stdout)
    else:
        dump_universe_csv(rules, args.out)
        counts = family_counts(rules)
        total = sum(counts.values())
        print(f"wrote {total} rules to {args.out} "
              f"({', '.join(f'{k.value}={v}' for k, v in counts.items())})")
    return 0


def _cmd_backtest(args) -> int:
    prices = load_csv(args.data)
    if args.period:
        start, end = _parse_period(args.period)
        prices = slice_period(prices, start, end)
    rules = enumerate_universe()
    matrix = build_performance_matrix(
        prices, rules, kind=args.kind, benchmark=Benchmark(args.benchmark),
        warmup=args.warmup, rf=args.rf, short_selling=not args.no_short,
        workers=args.workers,
    )
    write_matrix(matrix, args.out)
    if args.export_csv:
        export_matrix_csv(matrix, args.export_csv)
    print(json.dumps({
        "matrix": args.out, "kind": matrix.kind, "days": matrix.n_days,
        "rules": matrix.n_rules, "degenerate": int(matrix.flags.sum()),
    }))
    return 0


def _cmd_spa(args) -> int:
    matrix = read_matrix(args.matrix)
    results = spa_sweep(matrix, args.q_grid, args.replicates, args.seed)
    for r in results:
        print(f"q={r.q:g}  statistic={r.statistic:.4f}  "
              f"p={r.p_consistent:.3f}  bounds=[{r.p_lower:.3f}, {r.p_upper:.3f}]")
    if args.out:
        import csv as _csv
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["q", "statistic", "p_lower", "p_consistent",
                             "p_upper", "replicates", "seed"])
            for r in results:
                writer.writerow([repr(r.q), repr(r.statistic), repr(r.p_lower),
                                 repr(r.p_consistent), repr(r.p_upper),
                                 str(r.replicates), str(r.seed)])
        print(f"wrote {args.out}")
    return 0


def _cmd_report(args) -> int:
    raw = {}
    if args.config:
        raw.update(ExperimentConfig.from_json(args.config).__dict__)
        # round-trip through the parsed config so flag overrides layer on top
        raw["benchmark"] = raw["benchmark"].value
    overrides = {
        "data": args.data,
        "kind": args.kind,
        "benchmark": args.benchmark,
        "q_grid": args.q_grid,
        "replicates": args.replicates,
        "seed": args.seed,
        "warmup": args.warmup,
        "out_dir": args.out_dir,
        "cache_dir": args.cache_dir,
        "workers": args.workers,
    }
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    if args.periods:
        raw["periods"] = [_parse_period(p) for p in args.periods]
        raw.pop("rolling", None)
    if args.rolling:
        raw["rolling"] = parse_rolling_spec(args.rolling)
        raw.pop("periods", None)
    if args.no_short:
        raw["short_selling"] = False
    if args.figures:
        raw["figures"] = True
    cfg = ExperimentConfig.from_dict(raw)
    rows = run_experiment(cfg)
    paths = emit_report(rows, cfg.out_dir)
    for row in rows:
        cells = "  ".join(
            f"q={q:g}:{p}" for q, p in
            zip(row.q_grid, (f"{pc:.2f}{s}" for pc, s in
                             zip(row.p_consistent, row.stars)))
        )
        print(f"{row.period_label} [{row.kind}] best={row.rule_label} "
              f"perf={row.performance:.6f}  {cells}")
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_calibrate(args) -> int:
    result = run_calibration(
        trials=args.trials, n_rules=args.rules, n_days=args.days, q=args.q,
        replicates=args.replicates, seed=args.seed, level=args.level,
        plant=args.plant,
    )
    if not args.pvalues:
        result = {k: v for k, v in result.items() if not k.endswith("_pvalues")}
    print(json.dumps(result))
    return 0


_COMMANDS = {
    "universe": _cmd_universe,
    "backtest": _cmd_backtest,
    "spa": _cmd_spa,
    "report": _cmd_report,
    "calibrate": _cmd_calibrate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except Exception as exc:  # one JSON line per contract, nonzero exit
        _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
