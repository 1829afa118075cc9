"""Daily OHLCV market data: loading, validation, returns, descriptive stats.

The data model is deliberately small. A :class:`PriceSeries` holds one
instrument's daily bars as parallel numpy arrays keyed by strictly
increasing dates; only ``date`` and ``close`` are mandatory, the open /
high / low / volume columns are optional and validated when present.
Derived :class:`ReturnSeries` objects attach each return to the later of
the two dates that produced it, so ``returns.values[t]`` is the return
earned going into ``returns.dates[t]``.

CSV input is parsed by hand (stdlib ``csv``) rather than through a
dataframe library so that every rejection can point at the offending file
row: missing columns, unparsable cells, duplicate dates and non-positive
prices all raise :class:`DataValidationError` with a row number.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

__all__ = [
    "DataValidationError",
    "DegenerateSampleError",
    "EmptySliceError",
    "PriceSeries",
    "ReturnSeries",
    "DescriptiveStats",
    "load_csv",
    "write_csv",
    "simple_returns",
    "log_returns",
    "descriptive_stats",
    "slice_period",
]

CANONICAL_COLUMNS = ("date", "open", "high", "low", "close", "volume")
REQUIRED_COLUMNS = ("date", "close")


class DataValidationError(ValueError):
    """Raised when input data violates the series contract."""


class EmptySliceError(ValueError):
    """Raised when a period slice selects no rows."""


class DegenerateSampleError(ValueError):
    """Raised when a statistic is undefined for the sample (e.g. zero variance)."""


def _frozen(values, dtype) -> np.ndarray:
    out = np.asarray(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PriceSeries:
    """Validated daily price history for a single instrument.

    Invariants (enforced at construction):

    * dates strictly increasing, one entry per trading day;
    * every present price column strictly positive;
    * ``low <= min(open, close) <= max(open, close) <= high`` per row when
      all four OHLC columns are present;
    * volume, when present, nonnegative.
    """

    dates: np.ndarray
    close: np.ndarray
    open: np.ndarray | None = None
    high: np.ndarray | None = None
    low: np.ndarray | None = None
    volume: np.ndarray | None = None

    def __post_init__(self):
        dates = _frozen(self.dates, "datetime64[D]")
        close = _frozen(self.close, np.float64)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "close", close)
        for name in ("open", "high", "low", "volume"):
            col = getattr(self, name)
            if col is not None:
                object.__setattr__(self, name, _frozen(col, np.float64))
        self._validate()

    def _validate(self):
        n = len(self.dates)
        if n == 0:
            raise DataValidationError("price series must contain at least one row")
        for name in ("open", "high", "low", "close", "volume"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise DataValidationError(
                    f"column {name!r} has {len(col)} rows, expected {n}"
                )
        if n > 1:
            steps = np.diff(self.dates.astype("datetime64[D]").astype(np.int64))
            if (steps <= 0).any():
                i = int(np.argmax(steps <= 0)) + 1
                word = "duplicate" if steps[i - 1] == 0 else "out-of-order"
                raise DataValidationError(
                    f"dates must be strictly increasing: {word} date "
                    f"{self.dates[i]} at index {i}"
                )
        for name in ("open", "high", "low", "close"):
            col = getattr(self, name)
            if col is None:
                continue
            if not np.isfinite(col).all():
                i = int(np.argmin(np.isfinite(col)))
                raise DataValidationError(f"non-finite {name} at index {i}")
            if (col <= 0).any():
                i = int(np.argmax(col <= 0))
                raise DataValidationError(
                    f"non-positive {name} {col[i]} at index {i}"
                )
        if self.volume is not None:
            if not np.isfinite(self.volume).all() or (self.volume < 0).any():
                bad = ~np.isfinite(self.volume) | (self.volume < 0)
                i = int(np.argmax(bad))
                raise DataValidationError(f"invalid volume at index {i}")
        if all(getattr(self, c) is not None for c in ("open", "high", "low")):
            body_hi = np.maximum(self.open, self.close)
            body_lo = np.minimum(self.open, self.close)
            bad = (self.low > body_lo) | (body_hi > self.high)
            if bad.any():
                i = int(np.argmax(bad))
                raise DataValidationError(
                    f"OHLC ordering violated at index {i}: "
                    f"low={self.low[i]} open={self.open[i]} "
                    f"close={self.close[i]} high={self.high[i]}"
                )

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def has_ohlc(self) -> bool:
        return all(getattr(self, c) is not None for c in ("open", "high", "low"))


@dataclass(frozen=True)
class ReturnSeries:
    """Daily returns; ``kind`` is ``"simple"`` or ``"log"``.

    One element shorter than the source prices; ``dates[t]`` is the later
    day of the pair that produced ``values[t]``.
    """

    dates: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ("simple", "log"):
            raise ValueError(f"unknown return kind {self.kind!r}")
        object.__setattr__(self, "dates", _frozen(self.dates, "datetime64[D]"))
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        if len(self.dates) != len(self.values):
            raise DataValidationError("dates and values length mismatch")
        if self.kind == "simple" and (self.values <= -1).any():
            raise DataValidationError("simple returns must exceed -1")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DescriptiveStats:
    """Summary statistics of a return sample.

    ``kurtosis`` is the non-excess fourth standardized moment, so a normal
    sample sits near 3 and ``kurtosis >= 1 + skewness**2`` always holds.
    """

    count: int
    max_return: float
    min_return: float
    skewness: float
    kurtosis: float


def _resolve_schema(header: list[str], schema: dict[str, str] | None) -> dict[str, int]:
    """Map canonical column names to positions in the file header."""
    schema = schema or {}
    for key in schema:
        if key not in CANONICAL_COLUMNS:
            raise DataValidationError(f"unknown canonical column {key!r} in schema")
    lookup = {name.strip().lower(): i for i, name in enumerate(header)}
    positions: dict[str, int] = {}
    for canon in CANONICAL_COLUMNS:
        name = schema.get(canon, canon)
        idx = lookup.get(name.strip().lower())
        if idx is not None:
            positions[canon] = idx
    missing = [c for c in REQUIRED_COLUMNS if c not in positions]
    if missing:
        raise DataValidationError(
            f"missing required column(s) {', '.join(missing)} in header {header!r}"
        )
    return positions


def load_csv(path, schema: dict[str, str] | None = None) -> PriceSeries:
    """Load a daily OHLCV file into a validated :class:`PriceSeries`.

    Parameters
    ----------
    path : str or Path
        CSV file with a header row. Expected columns ``date`` (ISO-8601),
        ``open``, ``high``, ``low``, ``close``, ``volume``; only ``date``
        and ``close`` are required.
    schema : dict, optional
        Maps canonical column names to the header names actually used by
        the vendor file, e.g. ``{"date": "TradeDate", "close": "px_last"}``.

    Rows are sorted by date after parsing. Errors carry the 1-based file
    row number (header = row 1) of the offending cell.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        positions = _resolve_schema(header, schema)
        rows = []
        for cells in reader:
            rowno = reader.line_num
            if not cells or all(not c.strip() for c in cells):
                continue
            parsed: dict[str, float | date] = {}
            raw = cells[positions["date"]].strip()
            try:
                parsed["date"] = date.fromisoformat(raw)
            except ValueError:
                raise DataValidationError(
                    f"row {rowno}: unparsable date {raw!r}"
                ) from None
            for canon, idx in positions.items():
                if canon == "date":
                    continue
                cell = cells[idx].strip() if idx < len(cells) else ""
                try:
                    value = float(cell)
                except ValueError:
                    raise DataValidationError(
                        f"row {rowno}: unparsable {canon} {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DataValidationError(f"row {rowno}: non-finite {canon}")
                if canon != "volume" and value <= 0:
                    raise DataValidationError(
                        f"row {rowno}: non-positive {canon} {value}"
                    )
                if canon == "volume" and value < 0:
                    raise DataValidationError(f"row {rowno}: negative volume {value}")
                parsed[canon] = value
            rows.append((rowno, parsed))

    if not rows:
        raise DataValidationError(f"{path}: no data rows")
    rows.sort(key=lambda item: item[1]["date"])
    for (_, a), (rowno, b) in zip(rows, rows[1:]):
        if a["date"] == b["date"]:
            raise DataValidationError(f"row {rowno}: duplicate date {b['date']}")

    def column(canon):
        if canon not in positions:
            return None
        return [parsed[canon] for _, parsed in rows]

    try:
        return PriceSeries(
            dates=[parsed["date"] for _, parsed in rows],
            close=column("close"),
            open=column("open"),
            high=column("high"),
            low=column("low"),
            volume=column("volume"),
        )
    except DataValidationError as exc:
        raise DataValidationError(f"{path}: {exc}") from None


def write_csv(series: PriceSeries, path) -> None:
    """Write a PriceSeries back to CSV; ``load_csv`` round-trips it exactly."""
    cols = [c for c in CANONICAL_COLUMNS if c == "date" or getattr(series, c) is not None]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(len(series)):
            row = []
            for c in cols:
                if c == "date":
                    row.append(str(series.dates[i].astype("datetime64[D]")))
                else:
                    row.append(repr(float(getattr(series, c)[i])))
            writer.writerow(row)


def _require_length(series: PriceSeries, op: str):
    if len(series) < 2:
        raise DataValidationError(f"{op} requires at least 2 rows, got {len(series)}")


def simple_returns(series: PriceSeries) -> ReturnSeries:
    """Arithmetic returns (p[t+1] - p[t]) / p[t], attached to the later date."""
    _require_length(series, "simple_returns")
    values = np.diff(series.close) / series.close[:-1]
    return ReturnSeries(dates=series.dates[1:], values=values, kind="simple")


def log_returns(series: PriceSeries) -> ReturnSeries:
    """Log returns ln(p[t+1] / p[t]), attached to the later date."""
    _require_length(series, "log_returns")
    values = np.diff(np.log(series.close))
    return ReturnSeries(dates=series.dates[1:], values=values, kind="log")


def descriptive_stats(returns: ReturnSeries) -> DescriptiveStats:
    """Sample count, extremes, skewness and (non-excess) kurtosis.

    Central moments are taken over the full series with the population
    (divide-by-n) convention. A constant sample has no defined shape
    statistics and raises :class:`DegenerateSampleError`.
    """
    x = returns.values
    if len(x) < 4:
        raise DegenerateSampleError(
            f"descriptive stats need at least 4 observations, got {len(x)}"
        )
    centered = x - x.mean()
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        raise DegenerateSampleError("zero-variance return sample")
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return DescriptiveStats(
        count=len(x),
        max_return=float(x.max()),
        min_return=float(x.min()),
        skewness=m3 / m2**1.5,
        kurtosis=m4 / m2**2,
    )


def slice_period(series: PriceSeries, start: date, end: date) -> PriceSeries:
    """Rows with start <= date <= end; raises EmptySliceError when none match."""
    if start > end:
        raise ValueError(f"start {start} after end {end}")
    lo = np.datetime64(start, "D")
    hi = np.datetime64(end, "D")
    mask = (series.dates >= lo) & (series.dates <= hi)
    if not mask.any():
        raise EmptySliceError(f"no rows between {start} and {end}")
    pick = lambda col: None if col is None else col[mask]
    return PriceSeries(
        dates=series.dates[mask],
        close=series.close[mask],
        open=pick(series.open),
        high=pick(series.high),
        low=pick(series.low),
        volume=pick(series.volume),
    )
