"""Pure-Python reference implementations of the hot kernels.

These are the semantics of record: the compiled core in ``_core.pyx``
mirrors this module statement for statement and the test suite asserts
bit-identical outputs between the two. Keep both in sync when touching
either.

The kernels cover the three genuinely sequential pieces of the pipeline:

* ``positions_from_signals``: turns per-day buy/sell condition flags into
  held positions under level / reversal / fixed-holding lifecycles;
* ``filter_positions``: the percent-filter family's running-extremum
  state machine;
* ``bootstrap_chain``: the stationary bootstrap's geometric block index
  chain.

Everything around them (rolling statistics, band comparisons, delay
confirmation, FFT autocovariances, replicate means) is shared numpy code
and identical for both backends.
"""

from __future__ import annotations

import numpy as np

# Lifecycle modes for positions_from_signals.
MODE_LEVEL = 0  # position mirrors today's condition; neutral when neither holds
MODE_REVERSAL = 1  # hold last triggered side until the opposite side triggers
MODE_HOLD = 2  # a trigger opens the position for exactly `hold` days


def positions_from_signals(buy_ok, sell_ok, mode: int, hold: int, edge_trigger: bool):
    """Map per-day condition flags to positions in {-1, 0, +1}.

    Parameters
    ----------
    buy_ok, sell_ok : uint8 arrays
        1 on days where the (band- and delay-qualified) buy / sell
        condition holds. Simultaneous flags cancel to neutral.
    mode : int
        MODE_LEVEL, MODE_REVERSAL or MODE_HOLD.
    hold : int
        Holding period in days; used by MODE_HOLD only. A trigger at day t
        sets the position for days t..t+hold-1, then forces neutral;
        intervening signals are ignored and a new trigger is evaluated the
        day the holding expires.
    edge_trigger : bool
        MODE_HOLD only: when True a trigger requires the condition to be
        newly true that day (crossing semantics); when False any condition
        day while flat triggers.
    """
    n = len(buy_ok)
    out = np.zeros(n, dtype=np.int8)
    if mode == MODE_LEVEL:
        b = buy_ok.astype(bool)
        s = sell_ok.astype(bool)
        out[b & ~s] = 1
        out[s & ~b] = -1
        return out

    pos = 0
    if mode == MODE_REVERSAL:
        for t in range(n):
            b = buy_ok[t] != 0
            s = sell_ok[t] != 0
            if b and s:
                pos = 0
            elif b:
                pos = 1
            elif s:
                pos = -1
            out[t] = pos
        return out

    if mode != MODE_HOLD:
        raise ValueError(f"unknown mode {mode}")
    if hold <= 0:
        raise ValueError("MODE_HOLD requires hold >= 1")
    remaining = 0
    prev_b = False
    prev_s = False
    for t in range(n):
        b = buy_ok[t] != 0
        s = sell_ok[t] != 0
        if remaining > 0:
            out[t] = pos
            remaining -= 1
        else:
            pos = 0
            fire_b = b and not s and not (edge_trigger and prev_b)
            fire_s = s and not b and not (edge_trigger and prev_s)
            if fire_b:
                pos = 1
                remaining = hold - 1
            elif fire_s:
                pos = -1
                remaining = hold - 1
            out[t] = pos
        prev_b = b
        prev_s = s
    return out


def filter_positions(close, x: float, b: float, hold: int, high_ref=None, low_ref=None):
    """Percent-filter state machine over daily closes.

    From a flat state the rule buys when the close rises to at least
    (1+x) times the tracked low and sells short when it falls to at most
    (1-x) times the tracked high; simultaneous triggers cancel. The
    lifecycle depends on the variant:

    * plain (b=0, hold=0): reversal at x percent from the post-entry
      extremum, always in the market after the first trigger;
    * b > 0: the position is liquidated to neutral at b percent from the
      post-entry extremum and both trackers restart at the liquidation
      close;
    * hold > 0: a trigger holds the position exactly `hold` days, then
      flat; trackers reset to the entry close and keep updating so the
      post-expiry triggers measure moves from the position's own extremes.

    When ``high_ref``/``low_ref`` are given (the e-qualified extremum
    variant) they replace the running trackers as trigger references; NaN
    entries mean the level is not yet defined and never trigger.
    """
    n = len(close)
    out = np.zeros(n, dtype=np.int8)
    use_refs = high_ref is not None
    pos = 0
    remaining = 0
    lo = close[0]
    hi = close[0]
    for t in range(n):
        c = close[t]
        if not use_refs:
            if c < lo:
                lo = c
            if c > hi:
                hi = c
        else:
            # NaN-aware: comparisons with NaN are False, triggers stay off.
            lo = low_ref[t]
            hi = high_ref[t]

        if hold > 0:
            if remaining > 0:
                out[t] = pos
                remaining -= 1
                continue
            pos = 0  # holding expired (or never opened): re-arm from flat

        if pos == 0:
            buy = c >= lo * (1.0 + x)
            sell = c <= hi * (1.0 - x)
            if buy and sell:
                pass  # conflict: stay flat
            elif buy:
                pos = 1
                if hold > 0:
                    remaining = hold - 1
                if not use_refs:
                    lo = hi = c
            elif sell:
                pos = -1
                if hold > 0:
                    remaining = hold - 1
                if not use_refs:
                    lo = hi = c
        elif use_refs:
            # e-variant: same level triggers in every state, conflicts flatten.
            buy = c >= lo * (1.0 + x)
            sell = c <= hi * (1.0 - x)
            if buy and sell:
                pos = 0
            elif buy:
                pos = 1
            elif sell:
                pos = -1
        elif pos == 1:
            exit_frac = b if b > 0.0 else x
            if c <= hi * (1.0 - exit_frac):
                if b > 0.0:
                    pos = 0
                    lo = hi = c
                else:
                    pos = -1
                    lo = hi = c
        else:  # pos == -1
            exit_frac = b if b > 0.0 else x
            if c >= lo * (1.0 + exit_frac):
                if b > 0.0:
                    pos = 0
                    lo = hi = c
                else:
                    pos = 1
                    lo = hi = c
        out[t] = pos
    return out


def bootstrap_chain(u_decide, u_fresh, q: float):
    """Stationary bootstrap index chain over range(n).

    The first index is always a fresh uniform draw; each later step starts
    a fresh geometric block when its decision uniform falls below q and
    otherwise continues with the successor index, wrapping to 0 past the
    end. Consumes exactly len(u_decide) decision and len(u_fresh) fresh
    uniforms so RNG usage is identical across backends.
    """
    n = len(u_decide)
    tick = np.arange(n, dtype=np.int64)
    fresh = u_decide < q
    fresh[0] = True
    starts = (u_fresh * n).astype(np.int64)
    last_fresh = np.maximum.accumulate(np.where(fresh, tick, 0))
    return (starts[last_fresh] + (tick - last_fresh)) % n
