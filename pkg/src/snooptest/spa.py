"""Test for superior predictive ability over a set of competing rules.

Given a matrix of daily relative performance values f (n days by l rules),
the null hypothesis is that no rule beats the benchmark in expectation:
max_k E[f_k] <= 0. The studentized test statistic is

    T = max( max_k  sqrt(n) * mean(f_k) / omega_k,  0 )

where omega_k**2 is a kernel-weighted long-run variance estimate of column
k. Its null distribution is approximated with a stationary bootstrap
(Politis and Romano): resampled means are recentered so that columns are
re-anchored at a null-compatible mean, and a p-value is the fraction of
bootstrap statistics strictly above T. Following Hansen, three
recenterings are computed from the same bootstrap draws:

* consistent: subtract mean(f_k) only where sqrt(n)*mean(f_k) >=
  -omega_k*sqrt(2*ln ln n), so deeply losing rules stop dragging the
  null distribution down;
* upper: always subtract mean(f_k) (includes every rule; largest p);
* lower: subtract max(mean(f_k), 0) (only non-losing rules; smallest p).

The three p-values therefore satisfy p_lower <= p_consistent <= p_upper
replicate by replicate. Columns with zero sample variance carry no
information and are excluded from both the statistic and the bootstrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .backtest import PerformanceMatrix

__all__ = [
    "BootstrapParams",
    "SpaResult",
    "TrajectoryPoint",
    "DEFAULT_Q_GRID",
    "stationary_bootstrap_indices",
    "kernel_weight",
    "long_run_variance",
    "recenter",
    "spa_statistic",
    "bootstrap_statistic",
    "spa_pvalue",
    "spa_sweep",
    "pvalue_trajectory",
]

DEFAULT_Q_GRID = (0.01, 0.02, 0.05, 0.10, 0.20, 0.50, 1.00)

# Relative floor applied to long-run variances: a kernel-weighted sum can
# come out non-positive in pathological samples even when gamma_0 > 0.
_VARIANCE_FLOOR_RATIO = 1e-12

_VARIANTS = ("lower", "consistent", "upper")


@dataclass(frozen=True)
class BootstrapParams:
    """Stationary-bootstrap configuration for one test run."""

    q: float
    replicates: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise ValueError(f"switch probability q must be in (0, 1], got {self.q}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class SpaResult:
    """Outcome of one test run at a single switch probability q."""

    q: float
    statistic: float
    p_lower: float
    p_consistent: float
    p_upper: float
    replicates: int
    seed: int
    n_days: int
    n_rules: int
    omegas: np.ndarray = field(repr=False)  # per-rule long-run std dev
    excluded: np.ndarray = field(repr=False)  # column indices left out
    degenerate: bool = False  # True when no column competed

    def to_record(self) -> dict:
        return {
            "q": self.q,
            "statistic": self.statistic,
            "p_lower": self.p_lower,
            "p_consistent": self.p_consistent,
            "p_upper": self.p_upper,
            "replicates": self.replicates,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TrajectoryPoint:
    """P-values of the test restricted to the first ``checkpoint`` rules."""

    checkpoint: int
    statistic: float
    p_lower: float
    p_consistent: float
    p_upper: float


def _replicate_rng(seed: int, q: float, replicate: int) -> np.random.Generator:
    # Keyed per replicate so any replicate can be regenerated in isolation
    # and results do not depend on evaluation order or worker count.
    q_key = int(round(q * 1_000_000_000))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, q_key, replicate))))


def stationary_bootstrap_indices(n: int, q: float,
                                 rng: np.random.Generator) -> np.ndarray:
    """One resample of ``n`` indices with expected block length 1/q.

    The first index is uniform on [0, n); each later index starts a fresh
    block with probability q and otherwise follows its predecessor,
    wrapping at the end of the sample. Exactly 2n uniforms are consumed
    (decision draws first, then fresh-start draws), which keeps the
    compiled and pure implementations interchangeable.
    """
    if n < 1:
        raise ValueError("need at least one observation to resample")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"switch probability q must be in (0, 1], got {q}")
    u_decide = rng.random(n)
    u_fresh = rng.random(n)
    return _kernels.bootstrap_chain(u_decide, u_fresh, q)


def kernel_weight(n: int, lag: int, q: float) -> float:
    """Weight of autocovariance lag t in the long-run variance estimate.

    Matches the stationary bootstrap: kappa(n, t) =
    ((n - t)/n) (1-q)**t + (t/n) (1-q)**(n-t).
    """
    if not 0 <= lag < n:
        raise ValueError(f"lag must be in [0, {n - 1}], got {lag}")
    if lag == 0:
        return 1.0
    one_minus_q = 1.0 - q
    return ((n - lag) / n) * one_minus_q**lag + (lag / n) * one_minus_q ** (n - lag)


def _autocovariances(block: np.ndarray) -> np.ndarray:
    """All-lag sample autocovariances of each column, divide-by-n convention.

    Computed with FFTs: zero-padded linear autocorrelation of the demeaned
    columns gives sum_j d_j d_{j+t} for every lag at once.
    """
    n = block.shape[0]
    demeaned = block - block.mean(axis=0)
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(demeaned, size, axis=0)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), size, axis=0)[:n]
    return acf / n


def _long_run_variances(values: np.ndarray, q_grid) -> tuple[np.ndarray, dict]:
    """gamma_0 per column and, for each q, the floored omega**2 vector."""
    n, l = values.shape
    lags = np.arange(1, n)
    weights = {}
    for q in q_grid:
        one_minus_q = 1.0 - q
        weights[q] = ((n - lags) / n) * one_minus_q**lags \
            + (lags / n) * one_minus_q ** (n - lags)
    gamma0 = np.empty(l)
    omega2 = {q: np.empty(l) for q in q_grid}
    chunk = 256  # bounds the FFT workspace for wide matrices
    for start in range(0, l, chunk):
        acv = _autocovariances(values[:, start:start + chunk])
        sl = slice(start, start + acv.shape[1])
        gamma0[sl] = acv[0]
        for q in q_grid:
            raw = acv[0] + 2.0 * (weights[q] @ acv[1:])
            omega2[q][sl] = np.maximum(raw, _VARIANCE_FLOOR_RATIO * acv[0])
    return gamma0, omega2


def long_run_variance(column: np.ndarray, q: float) -> float:
    """Kernel-weighted long-run variance of a single performance series.

    Returns gamma_0 + 2 * sum_t kappa(n, t) * gamma_t, floored at a small
    multiple of gamma_0 so it never comes out negative. A constant column
    yields 0.0.
    """
    column = np.asarray(column, dtype=np.float64)
    if column.ndim != 1 or len(column) < 2:
        raise ValueError("need a 1-d series of at least 2 observations")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"switch probability q must be in (0, 1], got {q}")
    _, omega2 = _long_run_variances(column[:, None], (q,))
    return float(omega2[q][0])


def recenter(mean: float, omega: float, n: int, variant: str) -> float:
    """Null-anchoring value g(mean) subtracted from bootstrap means.

    variant "upper" keeps every rule in play, "lower" drops losing rules
    entirely, and "consistent" drops only rules losing by more than
    omega * sqrt(2 ln ln n / n).
    """
    if n < 3:
        raise ValueError("recentering needs n >= 3 (ln ln n must be defined)")
    if variant == "upper":
        return mean
    if variant == "lower":
        return max(mean, 0.0)
    if variant == "consistent":
        threshold = -omega * math.sqrt(2.0 * math.log(math.log(n)))
        return mean if math.sqrt(n) * mean >= threshold else 0.0
    raise ValueError(f"unknown recentering variant {variant!r}")


def spa_statistic(means: np.ndarray, omegas: np.ndarray, n: int,
                  valid: np.ndarray | None = None) -> float:
    """max over competing rules of sqrt(n) * mean / omega, floored at zero."""
    means = np.asarray(means, dtype=np.float64)
    omegas = np.asarray(omegas, dtype=np.float64)
    if valid is None:
        valid = omegas > 0
    if not valid.any():
        return 0.0
    scores = math.sqrt(n) * means[valid] / omegas[valid]
    return max(float(scores.max()), 0.0)


def bootstrap_statistic(values: np.ndarray, indices: np.ndarray,
                        means: np.ndarray, omegas: np.ndarray,
                        variant: str = "consistent",
                        valid: np.ndarray | None = None) -> float:
    """Statistic of one bootstrap replicate, spelled out literally.

    Resamples the rows named by ``indices``, recenters each column mean by
    g(mean_k), and studentizes with the original omegas. The batched
    engine in spa_pvalue reproduces this computation replicate by
    replicate (up to summation order).
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    means = np.asarray(means, dtype=np.float64)
    omegas = np.asarray(omegas, dtype=np.float64)
    if valid is None:
        valid = omegas > 0
    if not valid.any():
        return 0.0
    resampled = values[np.asarray(indices)].mean(axis=0)
    best = -math.inf
    for k in np.where(valid)[0]:
        g = recenter(float(means[k]), float(omegas[k]), n, variant)
        z = float(resampled[k]) - g
        best = max(best, math.sqrt(n) * z / float(omegas[k]))
    return max(best, 0.0)


def _replicate_mean_matrix(values: np.ndarray, q: float, replicates: int,
                           seed: int) -> np.ndarray:
    """(replicates, l) matrix of resampled column means.

    Index draws are reduced to row counts and applied with one matrix
    product, which is what makes 500 replicates over thousands of rules
    affordable.
    """
    n = values.shape[0]
    counts = np.empty((replicates, n))
    for i in range(replicates):
        idx = stationary_bootstrap_indices(n, q, _replicate_rng(seed, q, i))
        counts[i] = np.bincount(idx, minlength=n)
    return (counts @ values) / n


def _recenter_vectors(means: np.ndarray, omegas: np.ndarray, n: int,
                      valid: np.ndarray) -> dict:
    """g(mean) per column for each variant; zero where the column is out."""
    g_upper = np.where(valid, means, 0.0)
    g_lower = np.where(valid, np.maximum(means, 0.0), 0.0)
    keep = math.sqrt(n) * means >= -omegas * math.sqrt(2.0 * math.log(math.log(n)))
    g_consistent = np.where(valid & keep, means, 0.0)
    return {"upper": g_upper, "lower": g_lower, "consistent": g_consistent}


def _run_engine(values: np.ndarray, flags: np.ndarray,
                params: BootstrapParams,
                checkpoints: list[int],
                gamma0: np.ndarray,
                omega2: np.ndarray):
    """Shared batched engine behind spa_pvalue and pvalue_trajectory.

    Returns per-checkpoint tuples (statistic, p_lower, p_consistent,
    p_upper) plus the per-column diagnostics. A single checkpoint equal to
    the full rule count is exactly the plain test: the cumulative maxima
    evaluated at the last column coincide with the plain maxima.
    """
    n, l = values.shape
    if n < 3:
        raise ValueError("the test needs at least 3 scored days")
    valid = (gamma0 > 0.0) & ~flags
    omegas = np.sqrt(omega2)
    scale = np.zeros(l)
    np.divide(math.sqrt(n), omegas, out=scale, where=valid)

    scores = np.where(valid, scale * values.mean(axis=0), -np.inf)
    means = values.mean(axis=0)
    g = _recenter_vectors(means, omegas, n, valid)

    boot_means = _replicate_mean_matrix(values, params.q, params.replicates,
                                        params.seed)
    variant_scores = {}
    for variant in _VARIANTS:
        s = (boot_means - g[variant]) * scale
        variant_scores[variant] = np.where(valid, s, -np.inf)

    full = checkpoints == [l]
    rows = []
    if full:
        t_obs = max(float(scores.max()), 0.0) if valid.any() else 0.0
        stats = {v: np.maximum(variant_scores[v].max(axis=1), 0.0)
                 for v in _VARIANTS}
        pvals = {v: float(np.mean(stats[v] > t_obs)) for v in _VARIANTS}
        rows.append((l, t_obs, pvals["lower"], pvals["consistent"], pvals["upper"]))
    else:
        cum_obs = np.maximum.accumulate(scores)
        cum = {v: np.maximum.accumulate(variant_scores[v], axis=1)
               for v in _VARIANTS}
        for c in checkpoints:
            t_obs = max(float(cum_obs[c - 1]), 0.0)
            if not np.isfinite(t_obs):
                t_obs = 0.0
            pv = {}
            for v in _VARIANTS:
                t_boot = np.maximum(cum[v][:, c - 1], 0.0)
                pv[v] = float(np.mean(t_boot > t_obs))
            rows.append((c, t_obs, pv["lower"], pv["consistent"], pv["upper"]))
    return rows, valid, omegas


def spa_pvalue(matrix: PerformanceMatrix, params: BootstrapParams) -> SpaResult:
    """Run the full test on a performance matrix at one switch probability."""
    values = matrix.values
    gamma0, omega2 = _long_run_variances(values, (params.q,))
    rows, valid, omegas = _run_engine(
        values, matrix.flags, params, [values.shape[1]], gamma0, omega2[params.q]
    )
    _, statistic, p_lower, p_consistent, p_upper = rows[0]
    return SpaResult(
        q=params.q,
        statistic=statistic,
        p_lower=p_lower,
        p_consistent=p_consistent,
        p_upper=p_upper,
        replicates=params.replicates,
        seed=params.seed,
        n_days=values.shape[0],
        n_rules=values.shape[1],
        omegas=omegas,
        excluded=np.where(~valid)[0],
        degenerate=not bool(valid.any()),
    )


def spa_sweep(matrix: PerformanceMatrix, q_grid=DEFAULT_Q_GRID,
              replicates: int = 500, seed: int = 0) -> list[SpaResult]:
    """Run the test at every q in the grid, sharing the autocovariance pass.

    Each q draws its own bootstrap streams, so a sweep over a single-point
    grid reproduces spa_pvalue exactly.
    """
    q_grid = tuple(q_grid)
    if not q_grid:
        raise ValueError("q grid must not be empty")
    for q in q_grid:
        BootstrapParams(q=q, replicates=replicates, seed=seed)
    values = matrix.values
    gamma0, omega2 = _long_run_variances(values, q_grid)
    results = []
    for q in q_grid:
        params = BootstrapParams(q=q, replicates=replicates, seed=seed)
        rows, valid, omegas = _run_engine(
            values, matrix.flags, params, [values.shape[1]], gamma0, omega2[q]
        )
        _, statistic, p_lower, p_consistent, p_upper = rows[0]
        results.append(SpaResult(
            q=q,
            statistic=statistic,
            p_lower=p_lower,
            p_consistent=p_consistent,
            p_upper=p_upper,
            replicates=replicates,
            seed=seed,
            n_days=values.shape[0],
            n_rules=values.shape[1],
            omegas=omegas,
            excluded=np.where(~valid)[0],
            degenerate=not bool(valid.any()),
        ))
    return results


def pvalue_trajectory(matrix: PerformanceMatrix, params: BootstrapParams,
                      checkpoints) -> list[TrajectoryPoint]:
    """P-values of the test restricted to growing rule prefixes.

    Checkpoint c tests only the first c columns, reusing one set of
    bootstrap draws, so the curve shows how snooping over a growing
    universe inflates the apparent significance of the best rule. The
    final checkpoint (c = l) agrees exactly with spa_pvalue.
    """
    l = matrix.n_rules
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    if checkpoints[0] < 1 or checkpoints[-1] > l:
        raise ValueError(f"checkpoints must lie in [1, {l}]")
    values = matrix.values
    gamma0, omega2 = _long_run_variances(values, (params.q,))
    rows, _, _ = _run_engine(
        values, matrix.flags, params, checkpoints, gamma0, omega2[params.q]
    )
    return [TrajectoryPoint(*row) for row in rows]
