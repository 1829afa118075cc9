"""Shared fixtures: deterministic synthetic price series."""

import numpy as np
import pytest

from snooptest.market_data import PriceSeries

# 30 trading days with a run-up, a crash and a recovery, so every rule
# family has something to react to.
CLOSE_30 = np.array([
    100.0, 101.5, 99.8, 103.2, 104.0, 106.5, 105.2, 108.0, 110.4, 109.0,
    112.3, 111.0, 114.8, 113.5, 116.0, 118.2, 117.0, 112.0, 106.0, 101.0,
    97.5, 99.0, 102.5, 104.8, 103.0, 106.2, 109.5, 108.0, 111.7, 114.0,
])
VOLUME_30 = np.array([
    3200.0, 2100.0, 2600.0, 4100.0, 3000.0, 3800.0, 2200.0, 4500.0, 5100.0,
    2700.0, 4800.0, 2500.0, 5300.0, 2400.0, 4900.0, 5600.0, 2300.0, 6100.0,
    7200.0, 6800.0, 5900.0, 3100.0, 4300.0, 4600.0, 2800.0, 4000.0, 5200.0,
    2900.0, 5500.0, 6000.0,
])


def make_series(close, volume=None, with_ohlc=False, start="2001-01-02"):
    close = np.asarray(close, dtype=np.float64)
    n = len(close)
    dates = np.datetime64(start, "D") + np.arange(n).astype("timedelta64[D]")
    kwargs = {}
    if volume is not None:
        kwargs["volume"] = np.asarray(volume, dtype=np.float64)
    if with_ohlc:
        kwargs["open"] = close * 0.999  # kept inside the daily band
        kwargs["high"] = close * 1.012
        kwargs["low"] = close * 0.988
    return PriceSeries(dates=dates, close=close, **kwargs)


def random_walk(n, seed, drift=0.0003, vol=0.012, start_price=100.0,
                with_volume=True, with_ohlc=False):
    rng = np.random.Generator(np.random.PCG64(seed))
    rets = rng.normal(drift, vol, n - 1)
    close = start_price * np.exp(np.concatenate([[0.0], np.cumsum(np.log1p(rets))]))
    volume = rng.integers(1000, 9000, n).astype(float) if with_volume else None
    return make_series(close, volume=volume, with_ohlc=with_ohlc)


@pytest.fixture
def series_30():
    return make_series(CLOSE_30, volume=VOLUME_30, with_ohlc=True)


@pytest.fixture
def walk_600():
    return random_walk(600, seed=42)


@pytest.fixture
def walk_120():
    return random_walk(120, seed=7)
