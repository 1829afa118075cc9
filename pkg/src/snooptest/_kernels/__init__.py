"""Kernel backend selection.

Imports the compiled Cython core when it is available and falls back to
the pure-Python reference implementation otherwise. Setting
``SNOOPTEST_PURE_PYTHON=1`` forces the fallback regardless of what is
installed. Both backends produce bit-identical outputs; the compiled one
is just faster, see benchmarks/bench_kernels.py.
"""

from __future__ import annotations

import os

from .pure import MODE_HOLD, MODE_LEVEL, MODE_REVERSAL

_FORCED_PURE = os.environ.get("SNOOPTEST_PURE_PYTHON") == "1"

if _FORCED_PURE:
    from . import pure as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import pure as _impl

positions_from_signals = _impl.positions_from_signals
filter_positions = _impl.filter_positions
bootstrap_chain = _impl.bootstrap_chain

BACKEND = "pure" if _impl.__name__.endswith("pure") else "compiled"


def backend_name() -> str:
    """Active kernel backend: "compiled" or "pure"."""
    return BACKEND


__all__ = [
    "MODE_LEVEL",
    "MODE_REVERSAL",
    "MODE_HOLD",
    "positions_from_signals",
    "filter_positions",
    "bootstrap_chain",
    "BACKEND",
    "backend_name",
]
