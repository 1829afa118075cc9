"""Trading rule families, parameter grids and the RuleSpec value type.

Five classic rule families are supported: percent filters, moving-average
crossovers, support/resistance breakouts, channel breakouts and
moving-average crossovers on the on-balance-volume series. Parameter
grids follow the large-scale rule catalog of Sullivan, Timmermann and
White (1999); docs/rule_universe.md spells out the per-family combination
schemes and the resulting counts (497 / 2049 / 1220 / 2040 / 2040,
totalling 7846).

A :class:`RuleSpec` is immutable and validates itself on construction:
every parameter must come from its family's grid and only the documented
variant combinations are accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from enum import Enum

__all__ = [
    "RuleFamily",
    "RuleSpec",
    "FILTER_X",
    "FILTER_B",
    "FILTER_E",
    "HOLDING_C",
    "MA_WINDOWS",
    "MA_FAST_WINDOWS",
    "BAND_B",
    "DELAY_D",
    "SR_N",
    "SR_E",
    "CB_N",
    "CB_X",
    "BROCK_FAST",
    "BROCK_SLOW",
    "BROCK_BAND",
    "BROCK_HOLD",
]


class RuleFamily(Enum):
    FILTER = "filter"
    MOVING_AVERAGE = "ma"
    SUPPORT_RESISTANCE = "sr"
    CHANNEL_BREAKOUT = "cb"
    OBV_AVERAGE = "obv"


# Percent filter grids: entry threshold x, liquidation threshold b (< x),
# extremum qualification window e, holding period c.
FILTER_X = (
    0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05,
    0.06, 0.07, 0.08, 0.09, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20,
    0.25, 0.30, 0.40, 0.50,
)
FILTER_B = (0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.04, 0.05, 0.075, 0.10, 0.15, 0.20)
FILTER_E = (1, 2, 3, 4, 5, 10, 15, 20)

# Holding periods shared by every family that uses one.
HOLDING_C = (5, 10, 25, 50)

# Moving-average windows; the fast side may also be the price itself
# (window 1), which the Brock-style combinations below require.
MA_WINDOWS = (2, 5, 10, 15, 20, 25, 30, 40, 50, 75, 100, 125, 150, 200, 250)
MA_FAST_WINDOWS = (1,) + MA_WINDOWS

# Band and delay filters shared by the MA, S&R, CB and OBV families.
BAND_B = (0.001, 0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.05)
DELAY_D = (2, 3, 4, 5)

# Support & resistance: lookback window n or extremum qualification e.
SR_N = (5, 10, 15, 20, 25, 50, 100, 150, 200, 250)
SR_E = (2, 3, 4, 5, 10, 20, 25, 50, 100, 200)

# Channel breakout: lookback n and channel width x (band b must stay < x).
CB_N = SR_N
CB_X = (0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.10, 0.15)

# The nine fixed band-plus-holding MA combinations of Brock et al.
BROCK_FAST = (1, 2, 5)
BROCK_SLOW = (50, 150, 200)
BROCK_BAND = 0.01
BROCK_HOLD = 10

_NONE_KEY = -1.0


@dataclass(frozen=True)
class RuleSpec:
    """One fully parameterized trading rule.

    Only the fields meaningful for ``family`` may be set; everything else
    stays None. See docs/rule_universe.md for the admissible variant
    combinations per family.
    """

    family: RuleFamily
    x: float | None = None  # filter threshold / channel width
    b: float | None = None  # band (liquidation threshold for filters)
    e: int | None = None  # extremum qualification window
    c: int | None = None  # holding period, days
    d: int | None = None  # delay confirmation, days
    fast: int | None = None  # fast MA window
    slow: int | None = None  # slow MA window
    n: int | None = None  # lookback window (S&R, CB)

    def __post_init__(self):
        validator = _VALIDATORS[self.family]
        validator(self)

    # -- helpers ---------------------------------------------------------

    def _set_fields(self) -> tuple[str, ...]:
        return tuple(
            f.name for f in fields(self) if f.name != "family" and getattr(self, f.name) is not None
        )

    def _forbid(self, allowed: tuple[str, ...]):
        extra = [name for name in self._set_fields() if name not in allowed]
        if extra:
            raise ValueError(
                f"{self.family.value} rule does not take parameter(s) {', '.join(extra)}"
            )

    def key(self) -> tuple:
        """Canonical sort key within the family (absent parameters sort first)."""
        none = _NONE_KEY
        if self.family is RuleFamily.FILTER:
            return (
                self.x,
                self.b if self.b is not None else none,
                self.e if self.e is not None else none,
                self.c if self.c is not None else none,
            )
        if self.family in (RuleFamily.MOVING_AVERAGE, RuleFamily.OBV_AVERAGE):
            return (
                self.fast,
                self.slow,
                self.b if self.b is not None else none,
                self.d if self.d is not None else none,
                self.c if self.c is not None else none,
            )
        if self.family is RuleFamily.SUPPORT_RESISTANCE:
            return (
                0 if self.n is not None else 1,
                self.n if self.n is not None else self.e,
                self.b if self.b is not None else none,
                self.d if self.d is not None else none,
                self.c if self.c is not None else none,
            )
        return (
            self.n,
            self.x,
            self.b if self.b is not None else none,
            self.c,
        )

    def label(self) -> str:
        """Compact human-readable name, e.g. ``ma(2/20, b=0.01)``."""
        fam = self.family
        parts: list[str] = []
        if fam in (RuleFamily.MOVING_AVERAGE, RuleFamily.OBV_AVERAGE):
            parts.append(f"{self.fast}/{self.slow}")
        elif fam is RuleFamily.SUPPORT_RESISTANCE:
            parts.append(f"n={self.n}" if self.n is not None else f"e={self.e}")
        elif fam is RuleFamily.CHANNEL_BREAKOUT:
            parts.append(f"n={self.n}")
            parts.append(f"x={_fmt(self.x)}")
        else:
            parts.append(f"x={_fmt(self.x)}")
        for name in ("b", "e", "d", "c"):
            value = getattr(self, name)
            if value is not None:
                parts.append(f"{name}={_fmt(value)}")
        return f"{fam.value}({', '.join(parts)})"

    def params_dict(self) -> dict[str, float | int]:
        return {name: getattr(self, name) for name in self._set_fields()}

    def min_days(self) -> int:
        """Smallest series length on which this rule can possibly act."""
        d_extra = (self.d - 1) if self.d else 0
        if self.family is RuleFamily.FILTER:
            return 2 if self.e is None else self.e + 2
        if self.family in (RuleFamily.MOVING_AVERAGE, RuleFamily.OBV_AVERAGE):
            return self.slow + d_extra
        if self.family is RuleFamily.SUPPORT_RESISTANCE:
            base = self.n + 1 if self.n is not None else self.e + 2
            return base + d_extra
        return self.n + 1


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, "g")
    return str(value)


# -- per-family validation ------------------------------------------------


def _validate_filter(rule: RuleSpec):
    rule._forbid(("x", "b", "e", "c"))
    if rule.x not in FILTER_X:
        raise ValueError(f"filter threshold x={rule.x} not in grid")
    variants = [name for name in ("b", "e", "c") if getattr(rule, name) is not None]
    if len(variants) > 1:
        raise ValueError(f"filter rule takes at most one of b/e/c, got {variants}")
    if rule.b is not None:
        if rule.b not in FILTER_B:
            raise ValueError(f"filter liquidation b={rule.b} not in grid")
        if not rule.b < rule.x:
            raise ValueError(f"filter requires b < x, got b={rule.b}, x={rule.x}")
    if rule.e is not None and rule.e not in FILTER_E:
        raise ValueError(f"filter extremum window e={rule.e} not in grid")
    if rule.c is not None and rule.c not in HOLDING_C:
        raise ValueError(f"holding period c={rule.c} not in grid")


def _validate_ma_like(rule: RuleSpec, allow_brock: bool):
    rule._forbid(("fast", "slow", "b", "d", "c"))
    if rule.fast not in MA_FAST_WINDOWS:
        raise ValueError(f"fast window {rule.fast} not in grid")
    if rule.slow not in MA_WINDOWS:
        raise ValueError(f"slow window {rule.slow} not in grid")
    if not rule.fast < rule.slow:
        raise ValueError(f"fast window must be shorter than slow, got {rule.fast}/{rule.slow}")
    if rule.b is not None and rule.b not in BAND_B:
        raise ValueError(f"band b={rule.b} not in grid")
    if rule.d is not None and rule.d not in DELAY_D:
        raise ValueError(f"delay d={rule.d} not in grid")
    if rule.c is not None and rule.c not in HOLDING_C:
        raise ValueError(f"holding period c={rule.c} not in grid")
    variants = [name for name in ("b", "d", "c") if getattr(rule, name) is not None]
    if len(variants) <= 1:
        return
    is_brock = (
        allow_brock
        and variants == ["b", "c"]
        and rule.b == BROCK_BAND
        and rule.c == BROCK_HOLD
        and rule.fast in BROCK_FAST
        and rule.slow in BROCK_SLOW
    )
    if not is_brock:
        raise ValueError(
            f"{rule.family.value} rule takes at most one of b/d/c "
            f"(plus the fixed Brock band-and-holding combinations), got {variants}"
        )


def _validate_ma(rule: RuleSpec):
    _validate_ma_like(rule, allow_brock=True)


def _validate_obv(rule: RuleSpec):
    _validate_ma_like(rule, allow_brock=False)


def _validate_sr(rule: RuleSpec):
    rule._forbid(("n", "e", "b", "d", "c"))
    if (rule.n is None) == (rule.e is None):
        raise ValueError("support/resistance takes exactly one of n or e")
    if rule.n is not None and rule.n not in SR_N:
        raise ValueError(f"lookback n={rule.n} not in grid")
    if rule.e is not None and rule.e not in SR_E:
        raise ValueError(f"extremum window e={rule.e} not in grid")
    if rule.b is not None and rule.b not in BAND_B:
        raise ValueError(f"band b={rule.b} not in grid")
    if rule.d is not None and rule.d not in DELAY_D:
        raise ValueError(f"delay d={rule.d} not in grid")
    if rule.c is None:
        if rule.d is not None:
            raise ValueError("support/resistance delay variants require a holding period")
    else:
        if rule.c not in HOLDING_C:
            raise ValueError(f"holding period c={rule.c} not in grid")
        if rule.b is not None and rule.d is not None:
            raise ValueError("support/resistance with holding takes at most one of b/d")


def _validate_cb(rule: RuleSpec):
    rule._forbid(("n", "x", "b", "c"))
    if rule.n not in CB_N:
        raise ValueError(f"lookback n={rule.n} not in grid")
    if rule.x not in CB_X:
        raise ValueError(f"channel width x={rule.x} not in grid")
    if rule.c not in HOLDING_C:
        raise ValueError("channel breakout requires a holding period from the grid")
    if rule.b is not None:
        if rule.b not in BAND_B:
            raise ValueError(f"band b={rule.b} not in grid")
        if not rule.b < rule.x:
            raise ValueError(f"channel breakout requires b < x, got b={rule.b}, x={rule.x}")


_VALIDATORS = {
    RuleFamily.FILTER: _validate_filter,
    RuleFamily.MOVING_AVERAGE: _validate_ma,
    RuleFamily.OBV_AVERAGE: _validate_obv,
    RuleFamily.SUPPORT_RESISTANCE: _validate_sr,
    RuleFamily.CHANNEL_BREAKOUT: _validate_cb,
}
