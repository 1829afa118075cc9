"""Bootstrap test internals against brute-force references.

The long-run variance estimator is checked against a direct O(n^2)
autocovariance sum, the batched bootstrap engine against a literal
replicate-by-replicate loop built from the public pieces, and the three
recentering variants against their defining order p_lower <= p_consistent
<= p_upper.
"""

import math

import numpy as np
import pytest

from snooptest.backtest import PerformanceMatrix
from snooptest.spa import (
    DEFAULT_Q_GRID,
    BootstrapParams,
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
from snooptest.spa import _replicate_rng


def brute_force_lrv(column, q):
    """Direct kernel-weighted sum with divide-by-n autocovariances."""
    n = len(column)
    d = column - column.mean()
    gamma = np.array([(d[: n - t] * d[t:]).sum() / n for t in range(n)])
    total = gamma[0] + 2.0 * sum(
        kernel_weight(n, t, q) * gamma[t] for t in range(1, n)
    )
    return max(total, 1e-12 * gamma[0])


def ar1_matrix(n, l, seed, drift=None, rho=0.3):
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, 1.0, (n, l))
    values = np.empty((n, l))
    values[0] = eps[0]
    for t in range(1, n):
        values[t] = rho * values[t - 1] + eps[t]
    if drift is not None:
        values = values + np.asarray(drift)
    return PerformanceMatrix(
        values=values,
        kind="return",
        warmup=1,
        rule_ids=np.arange(l),
        flags=np.zeros(l, dtype=bool),
    )


class TestKernelWeight:
    def test_hand_value(self):
        # ((4-2)/4) * 0.5**2 + (2/4) * 0.5**2 = 0.25
        assert kernel_weight(4, 2, 0.5) == pytest.approx(0.25)

    def test_lag_zero_is_one(self):
        for n in (2, 10, 500):
            for q in (0.01, 0.5, 1.0):
                assert kernel_weight(n, 0, q) == 1.0

    def test_q_one_kills_every_positive_lag(self):
        for t in range(1, 20):
            assert kernel_weight(20, t, 1.0) == 0.0

    def test_lag_bounds(self):
        with pytest.raises(ValueError):
            kernel_weight(10, 10, 0.5)
        with pytest.raises(ValueError):
            kernel_weight(10, -1, 0.5)


class TestLongRunVariance:
    @pytest.mark.parametrize("q", [0.05, 0.2, 0.8, 1.0])
    def test_matches_brute_force(self, q):
        rng = np.random.default_rng(11)
        for trial in range(20):
            n = int(rng.integers(10, 120))
            col = rng.normal(0.0, 1.0, n)
            col[1:] += 0.4 * col[:-1]  # induce autocorrelation
            assert long_run_variance(col, q) == pytest.approx(
                brute_force_lrv(col, q), rel=1e-9
            )

    def test_q_one_reduces_to_variance(self):
        rng = np.random.default_rng(12)
        for trial in range(10):
            col = rng.normal(0.0, 2.0, 80)
            gamma0 = float(((col - col.mean()) ** 2).mean())
            assert abs(long_run_variance(col, 1.0) - gamma0) <= 1e-12 * gamma0

    def test_constant_column_is_zero(self):
        assert long_run_variance(np.full(50, 3.25), 0.1) == 0.0

    def test_never_negative_on_adversarial_series(self):
        # alternating series drive the weighted sum as negative as it gets
        alternating = np.tile([1.0, -1.0], 40)
        for q in (0.01, 0.1, 0.5):
            assert long_run_variance(alternating, q) >= 0.0

    def test_input_validation(self):
        with pytest.raises(ValueError):
            long_run_variance(np.array([1.0]), 0.5)
        with pytest.raises(ValueError):
            long_run_variance(np.ones(10), 0.0)
        with pytest.raises(ValueError):
            long_run_variance(np.ones(10), 1.5)


class TestBootstrapIndices:
    def test_range_and_shape(self):
        rng = np.random.default_rng(1)
        idx = stationary_bootstrap_indices(37, 0.2, rng)
        assert idx.shape == (37,)
        assert idx.min() >= 0 and idx.max() < 37

    def test_validation(self):
        rng = np.random.default_rng(1)
        with pytest.raises(ValueError):
            stationary_bootstrap_indices(0, 0.5, rng)
        with pytest.raises(ValueError):
            stationary_bootstrap_indices(10, 0.0, rng)

    def test_same_state_same_draws(self):
        a = stationary_bootstrap_indices(100, 0.1, np.random.default_rng(9))
        b = stationary_bootstrap_indices(100, 0.1, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_mean_block_length_near_inverse_q(self):
        # a break is any step that does not continue its predecessor;
        # fresh draws landing on the successor are miscounted with
        # probability q/n, far below the tolerance
        q = 0.5
        n = 5000
        transitions = 0
        breaks = 0
        for i in range(10):
            rng = np.random.default_rng(100 + i)
            idx = stationary_bootstrap_indices(n, q, rng)
            steps = idx[1:] != (idx[:-1] + 1) % n
            transitions += len(steps)
            breaks += int(steps.sum())
        assert transitions / breaks == pytest.approx(1.0 / q, rel=0.1)


class TestRecenter:
    def test_upper_keeps_mean(self):
        assert recenter(-0.7, 1.0, 100, "upper") == -0.7
        assert recenter(0.3, 1.0, 100, "upper") == 0.3

    def test_lower_clips_losers(self):
        assert recenter(-0.7, 1.0, 100, "lower") == 0.0
        assert recenter(0.3, 1.0, 100, "lower") == 0.3

    def test_consistent_threshold(self):
        # with omega=1, n=100: keep iff 10 * mean >= -sqrt(2 ln ln 100)
        cutoff = -math.sqrt(2.0 * math.log(math.log(100.0))) / 10.0
        eps = 1e-9
        assert recenter(cutoff + eps, 1.0, 100, "consistent") == cutoff + eps
        assert recenter(cutoff - eps, 1.0, 100, "consistent") == 0.0

    def test_needs_three_observations(self):
        with pytest.raises(ValueError, match="n >= 3"):
            recenter(0.0, 1.0, 2, "upper")

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="variant"):
            recenter(0.0, 1.0, 100, "middle")


class TestStatistic:
    def test_hand_value(self):
        means = np.array([0.5, -2.0])
        omegas = np.array([2.0, 1.0])
        # sqrt(16) * 0.5 / 2 = 1.0 dominates the losing column
        assert spa_statistic(means, omegas, 16) == pytest.approx(1.0)

    def test_floored_at_zero(self):
        assert spa_statistic(np.array([-1.0]), np.array([1.0]), 25) == 0.0

    def test_no_valid_columns(self):
        assert spa_statistic(np.array([5.0]), np.array([0.0]), 25) == 0.0

    def test_bootstrap_statistic_hand_replicate(self):
        values = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 4.0], [0.0, 0.0]])
        means = values.mean(axis=0)  # [1.5, 1.0]
        omegas = np.array([1.0, 2.0])
        indices = np.array([0, 0, 1, 2])
        # resampled means: [(1+1+2+3)/4, (0+0+0+4)/4] = [1.75, 1.0]
        # upper recentering: max(2*(1.75-1.5)/1, 2*(1.0-1.0)/2) = 0.5
        got = bootstrap_statistic(values, indices, means, omegas, "upper")
        assert got == pytest.approx(0.5)

    def test_bootstrap_statistic_lower_drops_losing_anchor(self):
        values = np.array([[-1.0], [-2.0], [-3.0], [-2.0]])
        means = values.mean(axis=0)  # -2.0, clipped to 0 under "lower"
        omegas = np.array([1.0])
        indices = np.array([0, 0, 0, 0])  # resampled mean -1.0
        got = bootstrap_statistic(values, indices, means, omegas, "lower")
        assert got == 0.0  # 2*(-1.0 - 0)/1 floored at zero
        up = bootstrap_statistic(values, indices, means, omegas, "upper")
        assert up == pytest.approx(2.0)  # 2*(-1.0 - (-2.0))/1


class TestEngineAgainstLiteralLoop:
    def test_pvalues_match_replicate_by_replicate(self):
        matrix = ar1_matrix(60, 8, seed=21,
                            drift=np.linspace(-0.5, 0.4, 8))
        params = BootstrapParams(q=0.25, replicates=40, seed=3)
        result = spa_pvalue(matrix, params)

        values = matrix.values
        n, l = values.shape
        means = values.mean(axis=0)
        omegas = np.array([
            math.sqrt(long_run_variance(values[:, k], params.q))
            for k in range(l)
        ])
        valid = omegas > 0
        t_obs = spa_statistic(means, omegas, n, valid)
        assert result.statistic == pytest.approx(t_obs, rel=1e-12)

        counts = {"lower": 0, "consistent": 0, "upper": 0}
        for i in range(params.replicates):
            rng = _replicate_rng(params.seed, params.q, i)
            idx = stationary_bootstrap_indices(n, params.q, rng)
            for variant in counts:
                t_boot = bootstrap_statistic(values, idx, means, omegas,
                                             variant, valid)
                counts[variant] += t_boot > t_obs
        b = params.replicates
        assert result.p_lower == counts["lower"] / b
        assert result.p_consistent == counts["consistent"] / b
        assert result.p_upper == counts["upper"] / b

    def test_determinism(self):
        matrix = ar1_matrix(80, 12, seed=5, drift=0.05)
        params = BootstrapParams(q=0.1, replicates=100, seed=11)
        a = spa_pvalue(matrix, params)
        b = spa_pvalue(matrix, params)
        assert a.to_record() == b.to_record()
        np.testing.assert_array_equal(a.omegas, b.omegas)


class TestVariantOrdering:
    def test_order_holds_on_random_matrices(self):
        rng = np.random.default_rng(2024)
        for trial in range(25):
            n = int(rng.integers(30, 120))
            l = int(rng.integers(2, 30))
            drift = rng.normal(0.0, 0.3, l)
            drift[rng.random(l) < 0.3] -= 3.0  # deeply losing columns
            matrix = ar1_matrix(n, l, seed=3000 + trial, drift=drift)
            params = BootstrapParams(q=float(rng.uniform(0.05, 1.0)),
                                     replicates=60, seed=trial)
            res = spa_pvalue(matrix, params)
            assert res.p_lower <= res.p_consistent <= res.p_upper


class TestDegenerateInputs:
    def test_all_constant_columns(self):
        matrix = PerformanceMatrix(
            values=np.zeros((50, 4)),
            kind="return",
            warmup=1,
            rule_ids=np.arange(4),
            flags=np.zeros(4, dtype=bool),
        )
        res = spa_pvalue(matrix, BootstrapParams(q=0.1, replicates=20, seed=0))
        assert res.degenerate
        assert res.statistic == 0.0
        assert res.p_lower == res.p_consistent == res.p_upper == 0.0
        np.testing.assert_array_equal(res.excluded, np.arange(4))

    def test_flagged_columns_do_not_compete(self):
        matrix = ar1_matrix(60, 3, seed=8, drift=[5.0, 0.0, 0.0])
        flagged = PerformanceMatrix(
            values=matrix.values,
            kind=matrix.kind,
            warmup=matrix.warmup,
            rule_ids=matrix.rule_ids,
            flags=np.array([True, False, False]),
        )
        params = BootstrapParams(q=0.2, replicates=50, seed=1)
        res = spa_pvalue(flagged, params)
        assert 0 in res.excluded
        # the huge drift sits in the flagged column, so the statistic must
        # come from the remaining ones
        rest = spa_pvalue(
            PerformanceMatrix(values=matrix.values[:, 1:], kind="return",
                              warmup=1, rule_ids=np.arange(2),
                              flags=np.zeros(2, dtype=bool)),
            params,
        )
        assert res.statistic == pytest.approx(rest.statistic, rel=1e-12)

    def test_too_few_days(self):
        matrix = PerformanceMatrix(
            values=np.ones((2, 2)), kind="return", warmup=1,
            rule_ids=np.arange(2), flags=np.zeros(2, dtype=bool),
        )
        with pytest.raises(ValueError, match="3 scored days"):
            spa_pvalue(matrix, BootstrapParams(q=0.5, replicates=5, seed=0))


class TestSweep:
    def test_single_point_grid_reproduces_pvalue(self):
        matrix = ar1_matrix(70, 10, seed=31, drift=0.02)
        params = BootstrapParams(q=0.1, replicates=80, seed=4)
        direct = spa_pvalue(matrix, params)
        swept = spa_sweep(matrix, q_grid=(0.1,), replicates=80, seed=4)
        assert len(swept) == 1
        assert swept[0].to_record() == direct.to_record()
        np.testing.assert_array_equal(swept[0].omegas, direct.omegas)

    def test_default_grid_shape_and_ordering(self):
        matrix = ar1_matrix(50, 6, seed=32)
        results = spa_sweep(matrix, replicates=30, seed=0)
        assert [r.q for r in results] == list(DEFAULT_Q_GRID)
        for r in results:
            assert r.p_lower <= r.p_consistent <= r.p_upper
            assert r.replicates == 30

    def test_each_q_matches_its_own_direct_run(self):
        matrix = ar1_matrix(60, 5, seed=33, drift=0.1)
        for r in spa_sweep(matrix, q_grid=(0.05, 0.5), replicates=40, seed=7):
            direct = spa_pvalue(matrix,
                                BootstrapParams(q=r.q, replicates=40, seed=7))
            assert r.to_record() == direct.to_record()

    def test_grid_validation(self):
        matrix = ar1_matrix(50, 3, seed=34)
        with pytest.raises(ValueError, match="grid"):
            spa_sweep(matrix, q_grid=())
        with pytest.raises(ValueError, match="switch probability"):
            spa_sweep(matrix, q_grid=(0.1, 1.5), replicates=10)


class TestTrajectory:
    def test_final_checkpoint_equals_plain_test(self):
        matrix = ar1_matrix(60, 12, seed=41, drift=0.05)
        params = BootstrapParams(q=0.1, replicates=60, seed=9)
        direct = spa_pvalue(matrix, params)
        points = pvalue_trajectory(matrix, params, [1, 4, 12])
        last = points[-1]
        assert last.checkpoint == 12
        assert last.statistic == direct.statistic
        assert last.p_lower == direct.p_lower
        assert last.p_consistent == direct.p_consistent
        assert last.p_upper == direct.p_upper

    def test_first_checkpoint_equals_single_column_test(self):
        matrix = ar1_matrix(60, 12, seed=42, drift=0.05)
        params = BootstrapParams(q=0.1, replicates=60, seed=9)
        first = pvalue_trajectory(matrix, params, [1])[0]
        solo = spa_pvalue(
            PerformanceMatrix(values=matrix.values[:, :1], kind="return",
                              warmup=1, rule_ids=np.arange(1),
                              flags=np.zeros(1, dtype=bool)),
            params,
        )
        assert first.statistic == solo.statistic
        assert first.p_consistent == solo.p_consistent

    def test_statistic_is_monotone_in_checkpoints(self):
        matrix = ar1_matrix(80, 20, seed=43)
        params = BootstrapParams(q=0.2, replicates=30, seed=2)
        points = pvalue_trajectory(matrix, params, range(1, 21))
        stats = [p.statistic for p in points]
        assert stats == sorted(stats)

    def test_checkpoint_validation(self):
        matrix = ar1_matrix(50, 5, seed=44)
        params = BootstrapParams(q=0.1, replicates=5, seed=0)
        with pytest.raises(ValueError, match="checkpoint"):
            pvalue_trajectory(matrix, params, [])
        with pytest.raises(ValueError, match=r"\[1, 5\]"):
            pvalue_trajectory(matrix, params, [0, 3])
        with pytest.raises(ValueError, match=r"\[1, 5\]"):
            pvalue_trajectory(matrix, params, [6])


class TestParams:
    def test_q_bounds(self):
        with pytest.raises(ValueError):
            BootstrapParams(q=0.0)
        with pytest.raises(ValueError):
            BootstrapParams(q=1.0001)
        BootstrapParams(q=1.0)  # inclusive upper end is legal

    def test_replicates_and_seed(self):
        with pytest.raises(ValueError):
            BootstrapParams(q=0.5, replicates=0)
        with pytest.raises(ValueError):
            BootstrapParams(q=0.5, seed=-1)
