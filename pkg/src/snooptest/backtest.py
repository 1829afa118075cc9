"""Rule performance measurement over a warmup-trimmed evaluation window.

Two daily performance measures are supported for each rule k against a
benchmark (out-of-market by default, buy-and-hold optionally):

* return kind:  f[t] = ln(1 + r[t] * I_k[t]) - ln(1 + r[t] * I_0[t]),
  where r[t] is the simple return into day t+1 and I[t] the position held
  over that return;
* sharpe kind:  f[t] = (r_k[t] - rf[t]) / s_k - (r_0[t] - rf[t]) / s_0,
  with r_k = r * I_k and s_k the population standard deviation of r_k over
  the evaluation window, computed once per rule. The out-of-market
  benchmark contributes nothing (its term is identically zero).

With N price days and warmup R, the evaluation window contains the
returns into days R..N-1 (0-based), so each matrix has n = N - R rows.
Rules whose scored return series is constant cannot be standardized; their
Sharpe columns are stored as zeros and flagged so downstream tests can
skip them.
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .market_data import PriceSeries, simple_returns
from .rules.definitions import RuleSpec
from .rules.signals import SignalEngine

__all__ = [
    "Benchmark",
    "PerformanceMatrix",
    "RulePerformance",
    "TRADING_DAYS_PER_YEAR",
    "DEFAULT_WARMUP",
    "return_performance",
    "sharpe_performance",
    "build_performance_matrix",
    "mean_performance",
    "best_rule",
    "max_trajectory",
    "write_matrix",
    "read_matrix",
    "export_matrix_csv",
]

TRADING_DAYS_PER_YEAR = 252
DEFAULT_WARMUP = 250

_MAGIC = b"SNPMTX01"
_KIND_CODES = {"return": 0, "sharpe": 1}
_KIND_NAMES = {code: name for name, code in _KIND_CODES.items()}


class Benchmark(Enum):
    OUT_OF_MARKET = "out"
    BUY_AND_HOLD = "hold"


@dataclass(frozen=True)
class PerformanceMatrix:
    """Evaluation-window daily performance values, one column per rule."""

    values: np.ndarray  # (n, l) float64
    kind: str  # "return" or "sharpe"
    warmup: int
    rule_ids: np.ndarray  # (l,) int64
    flags: np.ndarray  # (l,) bool; True = degenerate column, not competing

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        rule_ids = np.asarray(self.rule_ids, dtype=np.int64)
        flags = np.asarray(self.flags, dtype=bool)
        for name, arr in (("values", values), ("rule_ids", rule_ids), ("flags", flags)):
            object.__setattr__(self, name, arr)
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown performance kind {self.kind!r}")
        if values.ndim != 2:
            raise ValueError("values must be a 2-d matrix")
        if not np.isfinite(values).all():
            raise ValueError("performance matrix must be finite")
        if len(rule_ids) != values.shape[1] or len(flags) != values.shape[1]:
            raise ValueError("rule_ids/flags must match the column count")
        if self.warmup < 1:
            raise ValueError("warmup must be >= 1")

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    @property
    def n_rules(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RulePerformance:
    """Mean daily performance of one rule; annualized only for returns."""

    rule_id: int
    daily_mean: float
    annualized: float


def _scored_slices(n_prices: int, warmup: int):
    if warmup < 1:
        raise ValueError("warmup must be >= 1")
    if n_prices <= warmup:
        raise ValueError(
            f"series of {n_prices} days cannot cover a {warmup}-day warmup"
        )
    return slice(warmup - 1, n_prices - 1)


def _as_rf(rf, n_returns: int) -> np.ndarray:
    if np.isscalar(rf):
        return np.full(n_returns, float(rf))
    rf = np.asarray(rf, dtype=np.float64)
    if rf.shape != (n_returns,):
        raise ValueError(
            f"risk-free series must match the {n_returns} return days, got {rf.shape}"
        )
    return rf


def return_performance(returns: np.ndarray, positions: np.ndarray,
                       benchmark: Benchmark = Benchmark.OUT_OF_MARKET,
                       warmup: int = DEFAULT_WARMUP) -> np.ndarray:
    """Daily log-relative performance of one rule over the scored window.

    ``returns`` holds the N-1 simple returns of an N-day series and
    ``positions`` the N daily positions; element j of either refers to the
    return into day j+1 respectively the position held over it.
    """
    returns = np.asarray(returns, dtype=np.float64)
    positions = np.asarray(positions)
    if len(positions) != len(returns) + 1:
        raise ValueError("positions must be one element longer than returns")
    sl = _scored_slices(len(positions), warmup)
    r = returns[sl]
    exposure = r * positions[sl].astype(np.float64)
    bad = exposure <= -1.0
    if bad.any():
        day = int(np.argmax(bad))
        raise ValueError(
            f"log argument non-positive at scored day {day}: "
            f"return {r[day]} with position {positions[sl][day]}"
        )
    out = np.log1p(exposure)
    if benchmark is Benchmark.BUY_AND_HOLD:
        out = out - np.log1p(r)
    return out


def sharpe_performance(returns: np.ndarray, positions: np.ndarray,
                       rf=0.0,
                       benchmark: Benchmark = Benchmark.OUT_OF_MARKET,
                       warmup: int = DEFAULT_WARMUP) -> tuple[np.ndarray, bool]:
    """Standardized excess-return performance; returns (column, degenerate).

    A rule whose scored return series is constant has no standard
    deviation to divide by; its column comes back as zeros with the
    degenerate flag set.
    """
    returns = np.asarray(returns, dtype=np.float64)
    positions = np.asarray(positions)
    if len(positions) != len(returns) + 1:
        raise ValueError("positions must be one element longer than returns")
    sl = _scored_slices(len(positions), warmup)
    r = returns[sl]
    rf_vec = _as_rf(rf, len(returns))[sl]
    rule_ret = r * positions[sl].astype(np.float64)
    sigma = float(rule_ret.std())  # population convention, computed once
    bench_term = 0.0
    if benchmark is Benchmark.BUY_AND_HOLD:
        sigma0 = float(r.std())
        if sigma0 == 0.0:
            raise ValueError("buy-and-hold benchmark has zero return variance")
        bench_term = (r - rf_vec) / sigma0
    if sigma == 0.0:
        return np.zeros(len(r)), True
    return (rule_ret - rf_vec) / sigma - bench_term, False


def _block_columns(prices: PriceSeries, rules: list[RuleSpec], kind: str,
                   benchmark: Benchmark, warmup: int, rf,
                   cb_extremes: str, short_selling: bool):
    """Performance columns for a chunk of rules; one SignalEngine per call."""
    engine = SignalEngine(prices, cb_extremes=cb_extremes, short_selling=short_selling)
    returns = simple_returns(prices).values
    n = len(prices) - warmup
    block = np.empty((n, len(rules)), dtype=np.float64)
    flags = np.zeros(len(rules), dtype=bool)
    for j, rule in enumerate(rules):
        positions = engine.positions(rule)
        if kind == "return":
            block[:, j] = return_performance(returns, positions, benchmark, warmup)
        else:
            block[:, j], flags[j] = sharpe_performance(
                returns, positions, rf, benchmark, warmup
            )
    return block, flags


def _block_task(args):
    return _block_columns(*args)


def build_performance_matrix(prices: PriceSeries, rules: list[RuleSpec],
                             kind: str = "return",
                             benchmark: Benchmark = Benchmark.OUT_OF_MARKET,
                             warmup: int = DEFAULT_WARMUP,
                             rf=0.0,
                             cb_extremes: str = "close",
                             short_selling: bool = True,
                             rule_ids: np.ndarray | None = None,
                             workers: int = 1) -> PerformanceMatrix:
    """Backtest many rules into one PerformanceMatrix.

    ``workers`` > 1 splits the rule list across processes; results are
    assembled in rule order, so the output is identical at any worker
    count.
    """
    if kind not in _KIND_CODES:
        raise ValueError(f"unknown performance kind {kind!r}")
    if len(prices) <= warmup + 1:
        raise ValueError(
            f"period of {len(prices)} days is too short for warmup {warmup} "
            "plus at least one scored day"
        )
    if rule_ids is None:
        rule_ids = np.arange(len(rules), dtype=np.int64)
    rule_ids = np.asarray(rule_ids, dtype=np.int64)
    if len(rule_ids) != len(rules):
        raise ValueError("rule_ids must match the rule list")

    workers = max(1, int(workers))
    if workers == 1 or len(rules) < 2 * workers:
        block, flags = _block_columns(
            prices, rules, kind, benchmark, warmup, rf, cb_extremes, short_selling
        )
    else:
        bounds = np.linspace(0, len(rules), workers + 1, dtype=int)
        chunks = [
            (prices, rules[a:b], kind, benchmark, warmup, rf, cb_extremes, short_selling)
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_task, chunks))
        block = np.concatenate([p[0] for p in parts], axis=1)
        flags = np.concatenate([p[1] for p in parts])
    return PerformanceMatrix(
        values=block, kind=kind, warmup=warmup, rule_ids=rule_ids, flags=flags
    )


def mean_performance(matrix: PerformanceMatrix) -> list[RulePerformance]:
    """Per-rule daily means; annualized as 252x the daily mean for returns."""
    means = matrix.values.mean(axis=0)
    scale = TRADING_DAYS_PER_YEAR if matrix.kind == "return" else 1
    return [
        RulePerformance(int(rid), float(m), float(m * scale))
        for rid, m in zip(matrix.rule_ids, means)
    ]


def best_rule(matrix: PerformanceMatrix) -> RulePerformance:
    """Highest mean daily performance; ties break toward the lowest rule id.

    Flagged (degenerate) columns do not compete; if every column is
    flagged the first rule is reported with zero performance.
    """
    means = matrix.values.mean(axis=0)
    competing = np.where(~matrix.flags)[0]
    if len(competing) == 0:
        return RulePerformance(int(matrix.rule_ids[0]), 0.0, 0.0)
    best_pos = competing[np.argmax(means[competing])]  # argmax takes first max
    scale = TRADING_DAYS_PER_YEAR if matrix.kind == "return" else 1
    m = float(means[best_pos])
    return RulePerformance(int(matrix.rule_ids[best_pos]), m, m * scale)


def max_trajectory(matrix: PerformanceMatrix) -> np.ndarray:
    """Running max of annualized mean performance in rule order."""
    means = matrix.values.mean(axis=0)
    if matrix.kind == "return":
        means = means * TRADING_DAYS_PER_YEAR
    means = np.where(matrix.flags, -np.inf, means)
    return np.maximum.accumulate(means)


# -- binary cache -----------------------------------------------------------

_HEADER = struct.Struct("<8sBIQQ")


def write_matrix(matrix: PerformanceMatrix, path) -> None:
    """Columnar binary cache: magic, version byte, warmup, n, l, ids, flags,
    row-major float64 values. Little-endian throughout."""
    n, l = matrix.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _KIND_CODES[matrix.kind], matrix.warmup, n, l))
        fh.write(matrix.rule_ids.astype("<i8").tobytes())
        fh.write(matrix.flags.astype("<u1").tobytes())
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def read_matrix(path) -> PerformanceMatrix:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated matrix cache header")
        magic, kind_code, warmup, n, l = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a performance matrix cache")
        if kind_code not in _KIND_NAMES:
            raise ValueError(f"{path}: unknown kind code {kind_code}")
        rule_ids = np.frombuffer(fh.read(8 * l), dtype="<i8")
        flags = np.frombuffer(fh.read(l), dtype="<u1").astype(bool)
        data = np.frombuffer(fh.read(8 * n * l), dtype="<f8")
        if data.size != n * l:
            raise ValueError(f"{path}: truncated matrix cache body")
    return PerformanceMatrix(
        values=data.reshape(n, l),
        kind=_KIND_NAMES[kind_code],
        warmup=warmup,
        rule_ids=rule_ids,
        flags=flags,
    )


def export_matrix_csv(matrix: PerformanceMatrix, path) -> None:
    """Plain-text export; header carries the rule ids."""
    header = ",".join(f"rule_{int(r)}" for r in matrix.rule_ids)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in matrix.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
