"""Trading rule universe: definitions, enumeration and signal generation."""

from .definitions import RuleFamily, RuleSpec
from .signals import (
    MissingColumnError,
    PositionSeries,
    SeriesTooShortError,
    SignalEngine,
    compute_obv,
    generate_positions,
    subsequent_extremum,
)
from .universe import (
    EXPECTED_FAMILY_COUNTS,
    FAMILY_ORDER,
    TOTAL_RULES,
    dump_universe_csv,
    enumerate_universe,
    family_counts,
)

__all__ = [
    "RuleFamily",
    "RuleSpec",
    "PositionSeries",
    "SignalEngine",
    "MissingColumnError",
    "SeriesTooShortError",
    "compute_obv",
    "generate_positions",
    "subsequent_extremum",
    "EXPECTED_FAMILY_COUNTS",
    "FAMILY_ORDER",
    "TOTAL_RULES",
    "dump_universe_csv",
    "enumerate_universe",
    "family_counts",
]
