"""Enumeration of the full 7846-rule universe.

The construction is deterministic: families come in the fixed order
filter, moving average, support/resistance, channel breakout, OBV, and
rules are sorted by their canonical parameter key within each family.
Rule ids are the 0-based positions in that ordering and are stable across
runs, so the CSV dump doubles as a cross-run id map.

Expected family sizes (docs/rule_universe.md derives them):
filter 497, moving average 2049 (incl. the 9 Brock-style combinations),
support/resistance 1220, channel breakout 2040, OBV 2040; 7846 in total.
"""

from __future__ import annotations

import csv

from .definitions import (
    BAND_B,
    BROCK_BAND,
    BROCK_FAST,
    BROCK_HOLD,
    BROCK_SLOW,
    CB_N,
    CB_X,
    DELAY_D,
    FILTER_B,
    FILTER_E,
    FILTER_X,
    HOLDING_C,
    MA_FAST_WINDOWS,
    MA_WINDOWS,
    SR_E,
    SR_N,
    RuleFamily,
    RuleSpec,
)

__all__ = [
    "FAMILY_ORDER",
    "EXPECTED_FAMILY_COUNTS",
    "TOTAL_RULES",
    "enumerate_universe",
    "family_counts",
    "dump_universe_csv",
]

FAMILY_ORDER = (
    RuleFamily.FILTER,
    RuleFamily.MOVING_AVERAGE,
    RuleFamily.SUPPORT_RESISTANCE,
    RuleFamily.CHANNEL_BREAKOUT,
    RuleFamily.OBV_AVERAGE,
)

EXPECTED_FAMILY_COUNTS = {
    RuleFamily.FILTER: 497,
    RuleFamily.MOVING_AVERAGE: 2049,
    RuleFamily.SUPPORT_RESISTANCE: 1220,
    RuleFamily.CHANNEL_BREAKOUT: 2040,
    RuleFamily.OBV_AVERAGE: 2040,
}
TOTAL_RULES = sum(EXPECTED_FAMILY_COUNTS.values())

_CSV_FIELDS = ("rule_id", "family", "x", "b", "e", "c", "d", "fast", "slow", "n")


def _filter_rules() -> list[RuleSpec]:
    fam = RuleFamily.FILTER
    rules = [RuleSpec(fam, x=x) for x in FILTER_X]
    rules += [RuleSpec(fam, x=x, b=b) for x in FILTER_X for b in FILTER_B if b < x]
    rules += [RuleSpec(fam, x=x, e=e) for x in FILTER_X for e in FILTER_E]
    rules += [RuleSpec(fam, x=x, c=c) for x in FILTER_X for c in HOLDING_C]
    return rules


def _ma_like_rules(fam: RuleFamily) -> list[RuleSpec]:
    pairs = [
        (fast, slow)
        for fast in MA_FAST_WINDOWS
        for slow in MA_WINDOWS
        if fast < slow
    ]
    rules = []
    for fast, slow in pairs:
        rules.append(RuleSpec(fam, fast=fast, slow=slow))
        rules += [RuleSpec(fam, fast=fast, slow=slow, b=b) for b in BAND_B]
        rules += [RuleSpec(fam, fast=fast, slow=slow, d=d) for d in DELAY_D]
        rules += [RuleSpec(fam, fast=fast, slow=slow, c=c) for c in HOLDING_C]
    if fam is RuleFamily.MOVING_AVERAGE:
        rules += [
            RuleSpec(fam, fast=fast, slow=slow, b=BROCK_BAND, c=BROCK_HOLD)
            for fast in BROCK_FAST
            for slow in BROCK_SLOW
        ]
    return rules


def _sr_rules() -> list[RuleSpec]:
    fam = RuleFamily.SUPPORT_RESISTANCE
    bases = [{"n": n} for n in SR_N] + [{"e": e} for e in SR_E]
    rules = []
    for base in bases:
        rules.append(RuleSpec(fam, **base))
        rules += [RuleSpec(fam, **base, b=b) for b in BAND_B]
        for c in HOLDING_C:
            rules.append(RuleSpec(fam, **base, c=c))
            rules += [RuleSpec(fam, **base, c=c, b=b) for b in BAND_B]
            rules += [RuleSpec(fam, **base, c=c, d=d) for d in DELAY_D]
    return rules


def _cb_rules() -> list[RuleSpec]:
    fam = RuleFamily.CHANNEL_BREAKOUT
    rules = []
    for n in CB_N:
        for x in CB_X:
            for c in HOLDING_C:
                rules.append(RuleSpec(fam, n=n, x=x, c=c))
                rules += [
                    RuleSpec(fam, n=n, x=x, c=c, b=b) for b in BAND_B if b < x
                ]
    return rules


_BUILDERS = {
    RuleFamily.FILTER: _filter_rules,
    RuleFamily.MOVING_AVERAGE: lambda: _ma_like_rules(RuleFamily.MOVING_AVERAGE),
    RuleFamily.SUPPORT_RESISTANCE: _sr_rules,
    RuleFamily.CHANNEL_BREAKOUT: _cb_rules,
    RuleFamily.OBV_AVERAGE: lambda: _ma_like_rules(RuleFamily.OBV_AVERAGE),
}


def enumerate_universe() -> list[RuleSpec]:
    """All rules in canonical order; index in the list is the rule id."""
    universe: list[RuleSpec] = []
    for fam in FAMILY_ORDER:
        block = _BUILDERS[fam]()
        block.sort(key=RuleSpec.key)
        if len(block) != EXPECTED_FAMILY_COUNTS[fam]:
            raise AssertionError(
                f"{fam.value} family produced {len(block)} rules, "
                f"expected {EXPECTED_FAMILY_COUNTS[fam]}"
            )
        universe.extend(block)
    return universe


def family_counts(rules: list[RuleSpec]) -> dict[RuleFamily, int]:
    counts = {fam: 0 for fam in FAMILY_ORDER}
    for rule in rules:
        counts[rule.family] += 1
    return counts


def dump_universe_csv(rules: list[RuleSpec], path) -> None:
    """Write the id -> rule map; absent parameters stay blank.

    ``path`` may also be an open text stream (the CLI passes stdout).
    """
    if hasattr(path, "write"):
        _write_universe_rows(rules, path)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_universe_rows(rules, fh)


def _write_universe_rows(rules: list[RuleSpec], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(_CSV_FIELDS)
    for rule_id, rule in enumerate(rules):
        row = [rule_id, rule.family.value]
        for name in _CSV_FIELDS[2:]:
            value = getattr(rule, name)
            row.append("" if value is None else repr(value) if isinstance(value, float) else value)
        writer.writerow(row)
