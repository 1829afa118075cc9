"""Position generation: from rule parameters to daily positions in {-1, 0, +1}.

A :class:`SignalEngine` wraps one price series and caches every rolling
statistic that rules share (moving averages, trailing extremes, qualified
extremum series, the OBV line), so sweeping the full universe touches each
precomputation once. Per-rule work is then a handful of vectorized
comparisons plus one pass through a kernel state machine.

Timing convention: the position at index t is a function of data up to and
including day t only (the backtester pairs it with the t -> t+1 return).
The no-lookahead property is enforced by tests that compare prefix runs
against full runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import _kernels
from ..market_data import PriceSeries
from .definitions import RuleFamily, RuleSpec

__all__ = [
    "MissingColumnError",
    "SeriesTooShortError",
    "PositionSeries",
    "SignalEngine",
    "generate_positions",
    "compute_obv",
    "subsequent_extremum",
]


class MissingColumnError(ValueError):
    """Raised when a rule needs a data column the series does not carry."""


class SeriesTooShortError(ValueError):
    """Raised when the series cannot cover the rule's longest lookback."""


@dataclass(frozen=True)
class PositionSeries:
    """Daily positions for one rule, aligned to the price dates."""

    dates: np.ndarray
    values: np.ndarray
    rule: RuleSpec

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int8)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if len(self.dates) != len(values):
            raise ValueError("dates and values length mismatch")
        if len(values) and (np.abs(values.astype(np.int16)) > 1).any():
            raise ValueError("positions must lie in {-1, 0, +1}")

    def __len__(self) -> int:
        return len(self.values)


def compute_obv(close, volume) -> np.ndarray:
    """On-balance volume: seeded with the first day's volume, then adds
    (subtracts) volume on up (down) closes; unchanged when the close ties."""
    close = np.asarray(close, dtype=np.float64)
    volume = np.asarray(volume, dtype=np.float64)
    if close.shape != volume.shape:
        raise ValueError("close and volume must have equal length")
    if len(close) == 0:
        return np.empty(0, dtype=np.float64)
    obv = np.empty(len(close), dtype=np.float64)
    obv[0] = volume[0]
    if len(close) > 1:
        steps = np.sign(np.diff(close)) * volume[1:]
        obv[1:] = volume[0] + np.cumsum(steps)
    return obv


def subsequent_extremum(close, e: int, direction: str) -> np.ndarray:
    """Most recent close that beats all of its own e predecessors.

    direction="high" tracks closes strictly greater than each of their e
    preceding closes, direction="low" strictly smaller ones. The output at
    index t is the level as of day t (today's close may qualify today); it
    is NaN until the first qualifying close exists, which requires at
    least e+1 observations.
    """
    if direction not in ("high", "low"):
        raise ValueError(f"direction must be 'high' or 'low', got {direction!r}")
    if e < 1:
        raise ValueError(f"extremum window must be >= 1, got {e}")
    close = np.asarray(close, dtype=np.float64)
    n = len(close)
    out = np.full(n, np.nan)
    if n <= e:
        return out
    preceding = sliding_window_view(close, e)[: n - e]
    if direction == "high":
        qualifies = close[e:] > preceding.max(axis=1)
    else:
        qualifies = close[e:] < preceding.min(axis=1)
    tick = np.arange(n, dtype=np.int64)
    marks = np.full(n, -1, dtype=np.int64)
    marks[e:][qualifies] = tick[e:][qualifies]
    last = np.maximum.accumulate(marks)
    seen = last >= 0
    out[seen] = close[last[seen]]
    return out


def _rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    if window == 1:
        return x.astype(np.float64, copy=True)
    n = len(x)
    out = np.full(n, np.nan)
    if n >= window:
        out[window - 1 :] = sliding_window_view(x, window).mean(axis=1)
    return out


def _trailing_extreme(x: np.ndarray, window: int, kind: str) -> np.ndarray:
    """Extreme over the window of days strictly before each index."""
    n = len(x)
    out = np.full(n, np.nan)
    if n > window:
        wins = sliding_window_view(x, window)
        agg = wins.max(axis=1) if kind == "max" else wins.min(axis=1)
        out[window:] = agg[: n - window]
    return out


def _consecutive_true(mask: np.ndarray, d: int) -> np.ndarray:
    """True where mask held on d consecutive days ending here."""
    if d <= 1:
        return mask
    n = len(mask)
    counts = np.cumsum(mask, dtype=np.int64)
    out = np.zeros(n, dtype=bool)
    if n >= d:
        out[d - 1 :] = (counts[d - 1 :] - np.concatenate(([0], counts[:-d]))) == d
    return out


def _cross_above(level, ref, band: float):
    # >= at the band threshold triggers; the strict conjunct keeps banded
    # signal days a subset of unbanded ones even for nonpositive refs.
    return (level >= ref + band * np.abs(ref)) & (level > ref)


def _cross_below(level, ref, band: float):
    return (level <= ref - band * np.abs(ref)) & (level < ref)


def _flags(mask: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(mask, dtype=np.uint8)


class SignalEngine:
    """Position generator for one price series with shared caches.

    Parameters
    ----------
    prices : PriceSeries
    cb_extremes : str
        "close" bases channel-breakout extremes on closing prices,
        "highlow" on the true high/low columns (which must then exist).
    short_selling : bool
        When False, short positions are clamped to neutral after
        generation, restricting rules to {0, +1}.
    """

    def __init__(self, prices: PriceSeries, cb_extremes: str = "close",
                 short_selling: bool = True):
        if cb_extremes not in ("close", "highlow"):
            raise ValueError(f"cb_extremes must be 'close' or 'highlow', got {cb_extremes!r}")
        self.prices = prices
        self.close = np.ascontiguousarray(prices.close, dtype=np.float64)
        self.n_days = len(self.close)
        self.cb_extremes = cb_extremes
        self.short_selling = short_selling
        self._obv: np.ndarray | None = None
        self._means: dict[tuple[str, int], np.ndarray] = {}
        self._extrema: dict[tuple[int, str, bool], np.ndarray] = {}
        self._trailing: dict[tuple[str, int, str], np.ndarray] = {}

    # -- cached series -----------------------------------------------------

    def _source(self, name: str) -> np.ndarray:
        if name == "close":
            return self.close
        if name == "obv":
            if self._obv is None:
                if self.prices.volume is None:
                    raise MissingColumnError("OBV rules need a volume column")
                self._obv = compute_obv(self.close, self.prices.volume)
            return self._obv
        col = getattr(self.prices, name)
        if col is None:
            raise MissingColumnError(
                f"channel breakout on true extremes needs a {name} column"
            )
        return np.ascontiguousarray(col, dtype=np.float64)

    def _mean(self, source: str, window: int) -> np.ndarray:
        key = (source, window)
        if key not in self._means:
            self._means[key] = _rolling_mean(self._source(source), window)
        return self._means[key]

    def _extremum(self, e: int, direction: str, lagged: bool) -> np.ndarray:
        key = (e, direction, lagged)
        if key not in self._extrema:
            if lagged:
                ext = self._extremum(e, direction, lagged=False)
                out = np.full(self.n_days, np.nan)
                out[1:] = ext[:-1]
                self._extrema[key] = out
            else:
                self._extrema[key] = subsequent_extremum(self.close, e, direction)
        return self._extrema[key]

    def _trail(self, source: str, window: int, kind: str) -> np.ndarray:
        key = (source, window, kind)
        if key not in self._trailing:
            self._trailing[key] = _trailing_extreme(self._source(source), window, kind)
        return self._trailing[key]

    # -- per-family generation ----------------------------------------------

    def positions(self, rule: RuleSpec) -> np.ndarray:
        """int8 positions aligned to the price dates."""
        need = rule.min_days()
        if self.n_days < need:
            raise SeriesTooShortError(
                f"rule {rule.label()} needs at least {need} days, series has {self.n_days}"
            )
        fam = rule.family
        if fam is RuleFamily.FILTER:
            out = self._filter_rule(rule)
        elif fam is RuleFamily.MOVING_AVERAGE:
            out = self._ma_rule(rule, "close")
        elif fam is RuleFamily.OBV_AVERAGE:
            out = self._ma_rule(rule, "obv")
        elif fam is RuleFamily.SUPPORT_RESISTANCE:
            out = self._sr_rule(rule)
        else:
            out = self._cb_rule(rule)
        if not self.short_selling:
            out = np.maximum(out, 0)
        return out

    def _filter_rule(self, rule: RuleSpec) -> np.ndarray:
        high_ref = low_ref = None
        if rule.e is not None:
            high_ref = self._extremum(rule.e, "high", lagged=False)
            low_ref = self._extremum(rule.e, "low", lagged=False)
        return _kernels.filter_positions(
            self.close, rule.x, rule.b or 0.0, rule.c or 0, high_ref, low_ref
        )

    def _ma_rule(self, rule: RuleSpec, source: str) -> np.ndarray:
        fast = self._mean(source, rule.fast)
        slow = self._mean(source, rule.slow)
        band = rule.b or 0.0
        buy = _cross_above(fast, slow, band)
        sell = _cross_below(fast, slow, band)
        if rule.d is not None:
            buy = _consecutive_true(buy, rule.d)
            sell = _consecutive_true(sell, rule.d)
        if rule.c is not None:
            # MA-style holding rules arm on crossings, not on regime days.
            return _kernels.positions_from_signals(
                _flags(buy), _flags(sell), _kernels.MODE_HOLD, rule.c, True
            )
        return _kernels.positions_from_signals(
            _flags(buy), _flags(sell), _kernels.MODE_LEVEL, 0, False
        )

    def _sr_rule(self, rule: RuleSpec) -> np.ndarray:
        if rule.n is not None:
            upper = self._trail("close", rule.n, "max")
            lower = self._trail("close", rule.n, "min")
        else:
            upper = self._extremum(rule.e, "high", lagged=True)
            lower = self._extremum(rule.e, "low", lagged=True)
        band = rule.b or 0.0
        buy = _cross_above(self.close, upper, band)
        sell = _cross_below(self.close, lower, band)
        if rule.d is not None:
            buy = _consecutive_true(buy, rule.d)
            sell = _consecutive_true(sell, rule.d)
        if rule.c is not None:
            return _kernels.positions_from_signals(
                _flags(buy), _flags(sell), _kernels.MODE_HOLD, rule.c, False
            )
        return _kernels.positions_from_signals(
            _flags(buy), _flags(sell), _kernels.MODE_REVERSAL, 0, False
        )

    def _cb_rule(self, rule: RuleSpec) -> np.ndarray:
        hi_src = "high" if self.cb_extremes == "highlow" else "close"
        lo_src = "low" if self.cb_extremes == "highlow" else "close"
        upper = self._trail(hi_src, rule.n, "max")
        lower = self._trail(lo_src, rule.n, "min")
        channel = (upper - lower) <= rule.x * lower
        up_level = np.where(channel, upper, np.nan)
        down_level = np.where(channel, lower, np.nan)
        band = rule.b or 0.0
        buy = _cross_above(self.close, up_level, band)
        sell = _cross_below(self.close, down_level, band)
        return _kernels.positions_from_signals(
            _flags(buy), _flags(sell), _kernels.MODE_HOLD, rule.c, False
        )

    def positions_matrix(self, rules: list[RuleSpec]) -> np.ndarray:
        """Positions for many rules as an (n_days, n_rules) int8 matrix."""
        out = np.empty((self.n_days, len(rules)), dtype=np.int8)
        for j, rule in enumerate(rules):
            out[:, j] = self.positions(rule)
        return out


def generate_positions(rule: RuleSpec, prices: PriceSeries, *,
                       cb_extremes: str = "close",
                       short_selling: bool = True) -> PositionSeries:
    """One-off position generation for a single rule."""
    engine = SignalEngine(prices, cb_extremes=cb_extremes, short_selling=short_selling)
    return PositionSeries(dates=prices.dates, values=engine.positions(rule), rule=rule)
