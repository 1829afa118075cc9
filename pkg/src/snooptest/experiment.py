"""End-to-end experiment driver: periods, backtests, tests, reports.

A run takes one price series, a set of evaluation periods (explicit pairs
or a rolling window spec), and one or two performance kinds, and
produces one report row per period and kind: the best rule, its mean
performance, and the snooping-adjusted p-values across a grid of
bootstrap smoothing parameters. Everything is deterministic given the
config and dataset; worker count must not change a single output byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .backtest import (
    DEFAULT_WARMUP,
    Benchmark,
    PerformanceMatrix,
    best_rule,
    build_performance_matrix,
    max_trajectory,
    read_matrix,
    write_matrix,
)
from .market_data import PriceSeries, load_csv, slice_period
from .rules.definitions import RuleSpec
from .rules.universe import enumerate_universe
from .spa import (
    DEFAULT_Q_GRID,
    BootstrapParams,
    TrajectoryPoint,
    pvalue_trajectory,
    spa_pvalue,
    spa_sweep,
)

__all__ = [
    "ExperimentError",
    "ExperimentConfig",
    "ReportRow",
    "rolling_windows",
    "resolve_periods",
    "run_experiment",
    "significance_stars",
    "format_pvalue",
    "emit_report",
    "emit_figure_data",
    "run_calibration",
]


class ExperimentError(Exception):
    """A configured run cannot proceed; message says which part failed."""


_KIND_CHOICES = {"return": ("return",), "sharpe": ("sharpe",),
                 "both": ("return", "sharpe")}


def _parse_date(text: str) -> np.datetime64:
    raw = str(text).strip()
    compact = raw.replace("-", "")
    if len(compact) == 8 and compact.isdigit():
        raw = f"{compact[:4]}-{compact[4:6]}-{compact[6:]}"
    try:
        return np.datetime64(raw, "D")
    except ValueError:
        raise ExperimentError(f"unparsable date {text!r} (use YYYY-MM-DD or YYYYMMDD)")


def _date_tag(day: np.datetime64) -> str:
    return np.datetime_as_string(day, unit="D").replace("-", "")


@dataclass(frozen=True)
class ExperimentConfig:
    """Run configuration; mirrors the CLI flags one to one."""

    data: str | None = None
    columns: dict | None = None  # canonical name -> file header
    periods: tuple = ()  # ((start, end) datetime64 pairs)
    rolling: tuple | None = None  # (window_years, step_years)
    kind: str = "return"  # "return", "sharpe", or "both"
    benchmark: Benchmark = Benchmark.OUT_OF_MARKET
    short_selling: bool = True
    rf: float = 0.0
    q_grid: tuple = DEFAULT_Q_GRID
    replicates: int = 500
    seed: int = 0
    warmup: int = DEFAULT_WARMUP
    cb_extremes: str = "close"
    out_dir: str = "."
    cache_dir: str | None = None
    workers: int = 1
    figures: bool = False
    trajectory_q: float = 0.10

    def __post_init__(self):
        if self.kind not in _KIND_CHOICES:
            raise ExperimentError(
                f"kind must be one of {sorted(_KIND_CHOICES)}, got {self.kind!r}"
            )
        if self.rolling is not None:
            window, step = self.rolling
            if not window > step > 0:
                raise ExperimentError(
                    f"rolling spec needs window > step > 0 years, got {self.rolling}"
                )
        if self.periods and self.rolling:
            raise ExperimentError("give explicit periods or a rolling spec, not both")
        for start, end in self.periods:
            if start > end:
                raise ExperimentError(
                    f"period start {start} is after its end {end}"
                )
        if self.warmup < 1:
            raise ExperimentError("warmup must be >= 1")
        if not self.q_grid:
            raise ExperimentError("q grid must not be empty")

    @property
    def kinds(self) -> tuple:
        return _KIND_CHOICES[self.kind]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ExperimentError(f"unknown config keys: {', '.join(unknown)}")
        params = dict(raw)
        if "periods" in params:
            params["periods"] = tuple(
                (_parse_date(a), _parse_date(b)) for a, b in params["periods"]
            )
        if "rolling" in params and params["rolling"] is not None:
            rolling = params["rolling"]
            if isinstance(rolling, str):
                rolling = parse_rolling_spec(rolling)
            params["rolling"] = (int(rolling[0]), int(rolling[1]))
        if "benchmark" in params and not isinstance(params["benchmark"], Benchmark):
            try:
                params["benchmark"] = Benchmark(params["benchmark"])
            except ValueError:
                raise ExperimentError(
                    f"benchmark must be 'out' or 'hold', got {params['benchmark']!r}"
                )
        if "q_grid" in params:
            params["q_grid"] = tuple(float(q) for q in params["q_grid"])
        return cls(**params)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ExperimentError(f"{path}: invalid JSON config ({exc})")
        if not isinstance(raw, dict):
            raise ExperimentError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)


def parse_rolling_spec(text: str) -> tuple[int, int]:
    """Parse a '5y:1y' window:step spec into integer year counts."""
    parts = str(text).lower().split(":")
    if len(parts) != 2:
        raise ExperimentError(f"rolling spec must look like '5y:1y', got {text!r}")
    out = []
    for part in parts:
        part = part.strip().removesuffix("y")
        if not part.isdigit() or int(part) < 1:
            raise ExperimentError(f"rolling spec must look like '5y:1y', got {text!r}")
        out.append(int(part))
    return tuple(out)


@dataclass(frozen=True)
class ReportRow:
    """One period x kind result line."""

    period_label: str
    start: np.datetime64
    end: np.datetime64
    kind: str
    rule_id: int
    rule_label: str
    performance: float  # annualized return, or daily Sharpe statistic
    q_grid: tuple
    p_consistent: tuple
    p_lower: tuple
    p_upper: tuple

    @property
    def stars(self) -> tuple:
        return tuple(significance_stars(p) for p in self.p_consistent)


def rolling_windows(first: np.datetime64, last: np.datetime64,
                    window_years: int, step_years: int) -> list:
    """Calendar-year windows walked forward until the data end is covered.

    The first window runs from ``first`` through December 31 of its
    (window_years - 1)th following year; each subsequent window starts at
    January 1, step_years later. The final window is the first whose
    natural end reaches ``last`` and is truncated there.
    """
    first = np.datetime64(first, "D")
    last = np.datetime64(last, "D")
    if first > last:
        raise ExperimentError(f"no window fits: start {first} is after end {last}")
    if not window_years > step_years > 0:
        raise ExperimentError(
            f"rolling spec needs window > step > 0 years, "
            f"got {window_years}y:{step_years}y"
        )
    first_year = first.astype("datetime64[Y]").astype(int) + 1970
    windows = []
    year = first_year
    while True:
        start = first if year == first_year else np.datetime64(f"{year}-01-01", "D")
        natural_end = np.datetime64(f"{year + window_years - 1}-12-31", "D")
        windows.append((start, min(natural_end, last)))
        if natural_end >= last:
            return windows
        year += step_years


def resolve_periods(cfg: ExperimentConfig, prices: PriceSeries) -> list:
    """Explicit periods, rolling windows over the data span, or the full span."""
    if cfg.periods:
        return list(cfg.periods)
    if cfg.rolling is not None:
        return rolling_windows(prices.dates[0], prices.dates[-1], *cfg.rolling)
    return [(prices.dates[0], prices.dates[-1])]


def _load_prices(cfg: ExperimentConfig) -> tuple[PriceSeries, str]:
    if cfg.data is None:
        raise ExperimentError("no data file configured")
    try:
        with open(cfg.data, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()[:16]
    except OSError as exc:
        raise ExperimentError(f"cannot read data file {cfg.data}: {exc}")
    return load_csv(cfg.data, schema=cfg.columns), digest


def _series_digest(prices: PriceSeries) -> str:
    h = hashlib.sha256()
    h.update(prices.dates.astype("<M8[D]").tobytes())
    for arr in (prices.close, prices.open, prices.high, prices.low, prices.volume):
        h.update(b"|" + (b"" if arr is None else arr.astype("<f8").tobytes()))
    return h.hexdigest()[:16]


def _universe_digest(rules: list) -> str:
    h = hashlib.sha256()
    for rule in rules:
        h.update(rule.label().encode())
        h.update(b"\n")
    return h.hexdigest()[:8]


def _cached_matrix(cfg: ExperimentConfig, key: str, build) -> PerformanceMatrix:
    if cfg.cache_dir is None:
        return build()
    os.makedirs(cfg.cache_dir, exist_ok=True)
    path = os.path.join(cfg.cache_dir, key + ".mtx")
    if os.path.exists(path):
        return read_matrix(path)
    matrix = build()
    write_matrix(matrix, path)
    return matrix


def run_experiment(cfg: ExperimentConfig,
                   prices: PriceSeries | None = None,
                   rules: list | None = None) -> list[ReportRow]:
    """Backtest every rule over every period and test the best performers.

    ``prices`` and ``rules`` override the data file and the full rule
    universe (used by tests and the calibration path). Figure data files
    are written as a side effect when cfg.figures is set.
    """
    if prices is None:
        prices, digest = _load_prices(cfg)
    else:
        digest = _series_digest(prices)
    if rules is None:
        rules = enumerate_universe()
    universe_tag = _universe_digest(rules)

    rows = []
    for start, end in resolve_periods(cfg, prices):
        label = f"{_date_tag(start)}-{_date_tag(end)}"
        try:
            window = slice_period(prices, start, end)
        except Exception as exc:
            raise ExperimentError(f"period {label}: {exc}")
        for kind in cfg.kinds:
            key = "_".join([
                digest, universe_tag, label, kind, cfg.benchmark.value,
                "s1" if cfg.short_selling else "s0", f"w{cfg.warmup}",
            ])
            try:
                matrix = _cached_matrix(cfg, key, lambda: build_performance_matrix(
                    window, rules, kind=kind, benchmark=cfg.benchmark,
                    warmup=cfg.warmup, rf=cfg.rf, cb_extremes=cfg.cb_extremes,
                    short_selling=cfg.short_selling, workers=cfg.workers,
                ))
            except Exception as exc:
                raise ExperimentError(f"period {label} ({kind}): {exc}")
            results = spa_sweep(matrix, cfg.q_grid, cfg.replicates, cfg.seed)
            top = best_rule(matrix)
            rows.append(ReportRow(
                period_label=label,
                start=np.datetime64(start, "D"),
                end=np.datetime64(end, "D"),
                kind=kind,
                rule_id=top.rule_id,
                rule_label=rules[top.rule_id].label(),
                performance=top.annualized,
                q_grid=tuple(cfg.q_grid),
                p_consistent=tuple(r.p_consistent for r in results),
                p_lower=tuple(r.p_lower for r in results),
                p_upper=tuple(r.p_upper for r in results),
            ))
            if cfg.figures:
                params = BootstrapParams(q=cfg.trajectory_q,
                                         replicates=cfg.replicates, seed=cfg.seed)
                trajectory = pvalue_trajectory(
                    matrix, params, range(1, matrix.n_rules + 1)
                )
                emit_figure_data(matrix, trajectory, cfg.out_dir,
                                 f"{label}_{kind}")
    return rows


# -- reporting ---------------------------------------------------------------

def significance_stars(p: float) -> str:
    """Stars from the raw p-value: 1% ***, 5% **, 10% *."""
    if p <= 0.01:
        return "***"
    if p <= 0.05:
        return "**"
    if p <= 0.10:
        return "*"
    return ""


def format_pvalue(p: float) -> str:
    """Two-decimal p with stars, e.g. 0.004 -> '0.00***', 0.12 -> '0.12'."""
    return f"{p:.2f}{significance_stars(p)}"


def _format_performance(row: ReportRow) -> str:
    if row.kind == "return":
        return f"{100.0 * row.performance:.2f}%"
    return f"{row.performance:.4f}"


def emit_report(rows: list[ReportRow], out_dir: str,
                formats: tuple = ("table", "csv")) -> list[str]:
    """Write the aligned text table and/or the machine CSV; returns paths."""
    if not rows:
        raise ExperimentError("no report rows to emit")
    os.makedirs(out_dir, exist_ok=True)
    q_grid = rows[0].q_grid
    written = []

    if "table" in formats:
        header = ["period", "kind", "best rule", "perf"] + [
            f"q={q:g}" for q in q_grid
        ]
        table = [header]
        for row in rows:
            table.append(
                [row.period_label, row.kind, row.rule_label,
                 _format_performance(row)]
                + [format_pvalue(p) for p in row.p_consistent]
            )
        widths = [max(len(line[i]) for line in table) for i in range(len(header))]
        path = os.path.join(out_dir, "report.txt")
        with open(path, "w", encoding="utf-8") as fh:
            for j, line in enumerate(table):
                fh.write("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() + "\n")
                if j == 0:
                    fh.write("  ".join("-" * w for w in widths) + "\n")
        written.append(path)

    if "csv" in formats:
        path = os.path.join(out_dir, "report.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["period", "kind", "rule_id", "rule", "performance"]
            for q in q_grid:
                tag = f"{q:g}"
                header += [f"p_q{tag}", f"p_lower_q{tag}", f"p_upper_q{tag}"]
            writer.writerow(header)
            for row in rows:
                record = [row.period_label, row.kind, str(row.rule_id),
                          row.rule_label, repr(float(row.performance))]
                for pc, pl, pu in zip(row.p_consistent, row.p_lower, row.p_upper):
                    record += [repr(float(pc)), repr(float(pl)), repr(float(pu))]
                writer.writerow(record)
        written.append(path)
    return written


def emit_figure_data(matrix: PerformanceMatrix,
                     trajectory: list[TrajectoryPoint],
                     out_dir: str, label: str) -> list[str]:
    """Scatter, running-max, and p-value trajectory CSVs for one matrix.

    The Sharpe scatter omits degenerate rules and statistics below -0.2
    (plotting convention: losing rules compress the interesting range).
    """
    os.makedirs(out_dir, exist_ok=True)
    means = matrix.values.mean(axis=0)
    if matrix.kind == "return":
        stats = means * 252.0
    else:
        stats = means
    written = []

    path = os.path.join(out_dir, f"scatter_{label}.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rule_id", "statistic"])
        for rid, flagged, value in zip(matrix.rule_ids, matrix.flags, stats):
            if matrix.kind == "sharpe" and (flagged or value < -0.2):
                continue
            writer.writerow([str(int(rid)), repr(float(value))])
    written.append(path)

    path = os.path.join(out_dir, f"running_max_{label}.csv")
    running = max_trajectory(matrix)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rules_considered", "best_statistic"])
        for i, value in enumerate(running, start=1):
            writer.writerow([str(i), repr(float(value))])
    written.append(path)

    path = os.path.join(out_dir, f"trajectory_{label}.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["checkpoint", "statistic", "p_lower", "p_consistent",
                         "p_upper"])
        for point in trajectory:
            writer.writerow([
                str(point.checkpoint), repr(float(point.statistic)),
                repr(float(point.p_lower)), repr(float(point.p_consistent)),
                repr(float(point.p_upper)),
            ])
    written.append(path)
    return written


# -- synthetic calibration ----------------------------------------------------

def run_calibration(trials: int = 200, n_rules: int = 50, n_days: int = 500,
                    q: float = 0.10, replicates: int = 500, seed: int = 0,
                    level: float = 0.10, plant: float = 3.0) -> dict:
    """Size and power of the test on iid Gaussian performance matrices.

    Each trial draws an (n_days, n_rules) standard normal matrix. The size
    run tests it as is (every true mean zero); the power run adds
    plant / sqrt(n_days) to the first column, i.e. a ``plant``-sigma shift
    of the studentized statistic, since the true long-run sigma of an iid
    N(0,1) column is 1. Rejection means p_consistent <= level.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    shift = plant / math.sqrt(n_days)
    rejections = {"size": 0, "power": 0}
    pvals = {"size": [], "power": []}
    for trial in range(trials):
        data_seed, spa_seed = np.random.SeedSequence((seed, trial)).generate_state(2)
        rng = np.random.Generator(np.random.PCG64(data_seed))
        base = rng.standard_normal((n_days, n_rules))
        for mode in ("size", "power"):
            values = base if mode == "size" else _planted(base, shift)
            matrix = PerformanceMatrix(
                values=values, kind="return", warmup=1,
                rule_ids=np.arange(n_rules, dtype=np.int64),
                flags=np.zeros(n_rules, dtype=bool),
            )
            params = BootstrapParams(q=q, replicates=replicates,
                                     seed=int(spa_seed))
            result = spa_pvalue(matrix, params)
            pvals[mode].append(result.p_consistent)
            if result.p_consistent <= level:
                rejections[mode] += 1
    return {
        "trials": trials,
        "n_rules": n_rules,
        "n_days": n_days,
        "q": q,
        "replicates": replicates,
        "seed": seed,
        "level": level,
        "plant": plant,
        "size_rate": rejections["size"] / trials,
        "power_rate": rejections["power"] / trials,
        "size_pvalues": pvals["size"],
        "power_pvalues": pvals["power"],
    }


def _planted(base: np.ndarray, shift: float) -> np.ndarray:
    values = base.copy()
    values[:, 0] += shift
    return values
