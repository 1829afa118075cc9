"""Backtests for a large technical trading-rule universe, with bootstrap
tests of superior predictive ability that correct for data snooping.

The package enumerates 7846 classic daily rules (filter, moving average,
support/resistance, channel breakout, on-balance volume), measures each
against an out-of-market or buy-and-hold benchmark, and asks whether the
best performer survives a test over the whole pool (Hansen's test with a
Politis-Romano stationary bootstrap).

Hot loops run in a compiled extension when it is available; set
SNOOPTEST_PURE_PYTHON=1 to force the pure-Python kernels. Both produce
bit-identical results.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND, backend_name
from .backtest import (
    DEFAULT_WARMUP,
    TRADING_DAYS_PER_YEAR,
    Benchmark,
    PerformanceMatrix,
    RulePerformance,
    best_rule,
    build_performance_matrix,
    export_matrix_csv,
    max_trajectory,
    mean_performance,
    read_matrix,
    return_performance,
    sharpe_performance,
    write_matrix,
)
from .experiment import (
    ExperimentConfig,
    ExperimentError,
    ReportRow,
    emit_figure_data,
    emit_report,
    resolve_periods,
    rolling_windows,
    run_calibration,
    run_experiment,
)
from .market_data import (
    DataValidationError,
    DegenerateSampleError,
    DescriptiveStats,
    EmptySliceError,
    PriceSeries,
    ReturnSeries,
    descriptive_stats,
    load_csv,
    log_returns,
    simple_returns,
    slice_period,
    write_csv,
)
from .rules import (
    RuleFamily,
    RuleSpec,
    SignalEngine,
    PositionSeries,
    enumerate_universe,
    family_counts,
    generate_positions,
    TOTAL_RULES,
)
from .spa import (
    DEFAULT_Q_GRID,
    BootstrapParams,
    SpaResult,
    TrajectoryPoint,
    bootstrap_statistic,
    kernel_weight,
    long_run_variance,
    pvalue_trajectory,
    recenter,
    spa_pvalue,
    spa_statistic,
    spa_sweep,
    stationary_bootstrap_indices,
)

__all__ = [
    "__version__",
    "BACKEND",
    "backend_name",
    # market data
    "DataValidationError",
    "DegenerateSampleError",
    "DescriptiveStats",
    "EmptySliceError",
    "PriceSeries",
    "ReturnSeries",
    "descriptive_stats",
    "load_csv",
    "log_returns",
    "simple_returns",
    "slice_period",
    "write_csv",
    # rules
    "RuleFamily",
    "RuleSpec",
    "SignalEngine",
    "PositionSeries",
    "enumerate_universe",
    "family_counts",
    "generate_positions",
    "TOTAL_RULES",
    # backtest
    "DEFAULT_WARMUP",
    "TRADING_DAYS_PER_YEAR",
    "Benchmark",
    "PerformanceMatrix",
    "RulePerformance",
    "best_rule",
    "build_performance_matrix",
    "export_matrix_csv",
    "max_trajectory",
    "mean_performance",
    "read_matrix",
    "return_performance",
    "sharpe_performance",
    "write_matrix",
    # spa
    "DEFAULT_Q_GRID",
    "BootstrapParams",
    "SpaResult",
    "TrajectoryPoint",
    "bootstrap_statistic",
    "kernel_weight",
    "long_run_variance",
    "pvalue_trajectory",
    "recenter",
    "spa_pvalue",
    "spa_statistic",
    "spa_sweep",
    "stationary_bootstrap_indices",
    # experiment
    "ExperimentConfig",
    "ExperimentError",
    "ReportRow",
    "emit_figure_data",
    "emit_report",
    "resolve_periods",
    "rolling_windows",
    "run_calibration",
    "run_experiment",
]
