"""Experiment driver tests: windows, config parsing, runs and reports."""

import json

import numpy as np
import pytest

from snooptest.backtest import Benchmark, PerformanceMatrix, max_trajectory
from snooptest.experiment import (
    ExperimentConfig,
    ExperimentError,
    ReportRow,
    emit_figure_data,
    emit_report,
    format_pvalue,
    parse_rolling_spec,
    resolve_periods,
    rolling_windows,
    run_calibration,
    run_experiment,
    significance_stars,
)
from snooptest.rules.definitions import RuleFamily, RuleSpec
from snooptest.spa import BootstrapParams, pvalue_trajectory

from conftest import make_series, random_walk


def day(text):
    return np.datetime64(text, "D")


SMALL_RULES = [
    RuleSpec(family=RuleFamily.FILTER, x=0.05),
    RuleSpec(family=RuleFamily.MOVING_AVERAGE, fast=2, slow=10),
    RuleSpec(family=RuleFamily.MOVING_AVERAGE, fast=5, slow=20, b=0.01),
    RuleSpec(family=RuleFamily.SUPPORT_RESISTANCE, n=5, c=5),
    RuleSpec(family=RuleFamily.OBV_AVERAGE, fast=2, slow=10),
]


class TestRollingWindows:
    def test_mid_year_start_walks_calendar_years(self):
        windows = rolling_windows(day("1992-05-21"), day("2013-06-30"), 5, 1)
        assert len(windows) == 18
        assert windows[0] == (day("1992-05-21"), day("1996-12-31"))
        assert windows[1] == (day("1993-01-01"), day("1997-12-31"))
        assert windows[-1] == (day("2009-01-01"), day("2013-06-30"))
        for start, end in windows[1:-1]:
            # interior windows span exactly five calendar years
            assert str(start)[4:] == "-01-01"
            assert str(end)[4:] == "-12-31"

    def test_window_covering_whole_span_collapses_to_one(self):
        windows = rolling_windows(day("2000-01-05"), day("2003-06-30"), 5, 1)
        assert windows == [(day("2000-01-05"), day("2003-06-30"))]

    def test_exact_year_end_is_not_truncated(self):
        windows = rolling_windows(day("2000-01-01"), day("2005-12-31"), 5, 1)
        assert windows[0] == (day("2000-01-01"), day("2004-12-31"))
        assert windows[-1] == (day("2001-01-01"), day("2005-12-31"))
        assert len(windows) == 2

    def test_step_size_two(self):
        windows = rolling_windows(day("2000-06-01"), day("2008-12-31"), 5, 2)
        starts = [str(w[0]) for w in windows]
        assert starts == ["2000-06-01", "2002-01-01", "2004-01-01"]

    def test_validation(self):
        with pytest.raises(ExperimentError, match="after"):
            rolling_windows(day("2010-01-01"), day("2000-01-01"), 5, 1)
        with pytest.raises(ExperimentError, match="window > step"):
            rolling_windows(day("2000-01-01"), day("2010-01-01"), 1, 1)


class TestRollingSpec:
    def test_parse(self):
        assert parse_rolling_spec("5y:1y") == (5, 1)
        assert parse_rolling_spec("10Y:2Y") == (10, 2)
        assert parse_rolling_spec("5:1") == (5, 1)

    def test_bad_specs(self):
        for text in ("5y", "a:b", "0y:1y", "5y:1y:2y"):
            with pytest.raises(ExperimentError):
                parse_rolling_spec(text)

    def test_config_rejects_window_not_exceeding_step(self):
        assert parse_rolling_spec("1y:1y") == (1, 1)  # parses, but:
        with pytest.raises(ExperimentError, match="window > step"):
            ExperimentConfig(rolling=(1, 1))


class TestStars:
    def test_thresholds_inclusive(self):
        assert significance_stars(0.01) == "***"
        assert significance_stars(0.010001) == "**"
        assert significance_stars(0.05) == "**"
        assert significance_stars(0.0500001) == "*"
        assert significance_stars(0.10) == "*"
        assert significance_stars(0.100001) == ""

    def test_format(self):
        assert format_pvalue(0.004) == "0.00***"
        assert format_pvalue(0.07) == "0.07*"
        assert format_pvalue(0.12) == "0.12"


class TestConfig:
    def test_from_dict_conversions(self):
        cfg = ExperimentConfig.from_dict({
            "data": "x.csv",
            "periods": [["19920521", "1996-12-31"]],
            "kind": "both",
            "benchmark": "hold",
            "q_grid": [0.1, 0.5],
            "replicates": 100,
        })
        assert cfg.periods == ((day("1992-05-21"), day("1996-12-31")),)
        assert cfg.benchmark is Benchmark.BUY_AND_HOLD
        assert cfg.kinds == ("return", "sharpe")
        assert cfg.q_grid == (0.1, 0.5)

    def test_rolling_string_spec(self):
        cfg = ExperimentConfig.from_dict({"rolling": "5y:1y"})
        assert cfg.rolling == (5, 1)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ExperimentError, match="unknown config keys: colour"):
            ExperimentConfig.from_dict({"colour": "red"})

    def test_periods_and_rolling_conflict(self):
        with pytest.raises(ExperimentError, match="not both"):
            ExperimentConfig.from_dict({
                "periods": [["2000-01-01", "2001-01-01"]],
                "rolling": "5y:1y",
            })

    def test_field_validation(self):
        with pytest.raises(ExperimentError, match="kind"):
            ExperimentConfig(kind="alpha")
        with pytest.raises(ExperimentError, match="warmup"):
            ExperimentConfig(warmup=0)
        with pytest.raises(ExperimentError, match="q grid"):
            ExperimentConfig(q_grid=())
        with pytest.raises(ExperimentError, match="benchmark"):
            ExperimentConfig.from_dict({"benchmark": "spy"})
        with pytest.raises(ExperimentError, match="after"):
            ExperimentConfig.from_dict(
                {"periods": [["2005-01-01", "2000-01-01"]]}
            )
        with pytest.raises(ExperimentError, match="unparsable date"):
            ExperimentConfig.from_dict({"periods": [["someday", "2000-01-01"]]})

    def test_from_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"kind": "sharpe", "replicates": 33}))
        cfg = ExperimentConfig.from_json(path)
        assert cfg.kind == "sharpe"
        assert cfg.replicates == 33

        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ExperimentError, match="invalid JSON"):
            ExperimentConfig.from_json(bad)
        arr = tmp_path / "arr.json"
        arr.write_text("[1, 2]")
        with pytest.raises(ExperimentError, match="JSON object"):
            ExperimentConfig.from_json(arr)


class TestResolvePeriods:
    def test_defaults_to_full_span(self, walk_600):
        cfg = ExperimentConfig()
        assert resolve_periods(cfg, walk_600) == [
            (walk_600.dates[0], walk_600.dates[-1])
        ]

    def test_explicit_periods_pass_through(self, walk_600):
        periods = ((day("2001-02-01"), day("2001-06-01")),)
        cfg = ExperimentConfig(periods=periods)
        assert resolve_periods(cfg, walk_600) == list(periods)


class TestRunExperiment:
    def run(self, prices, tmp_path, **overrides):
        kw = dict(kind="return", q_grid=(0.1, 0.5), replicates=25,
                  warmup=60, out_dir=str(tmp_path))
        kw.update(overrides)
        cfg = ExperimentConfig(**kw)
        return cfg, run_experiment(cfg, prices=prices, rules=SMALL_RULES)

    def test_row_structure(self, tmp_path):
        prices = random_walk(240, seed=13)
        cfg, rows = self.run(prices, tmp_path, kind="both")
        assert [r.kind for r in rows] == ["return", "sharpe"]
        for row in rows:
            tag_s = str(prices.dates[0]).replace("-", "")
            tag_e = str(prices.dates[-1]).replace("-", "")
            assert row.period_label == f"{tag_s}-{tag_e}"
            assert 0 <= row.rule_id < len(SMALL_RULES)
            assert row.rule_label == SMALL_RULES[row.rule_id].label()
            assert len(row.p_consistent) == len(row.p_lower) == 2
            for pl, pc, pu in zip(row.p_lower, row.p_consistent, row.p_upper):
                assert pl <= pc <= pu
            assert len(row.stars) == 2

    def test_deterministic_across_calls(self, tmp_path):
        prices = random_walk(240, seed=14)
        _, first = self.run(prices, tmp_path)
        _, second = self.run(prices, tmp_path)
        assert first == second

    def test_cache_round_trip_preserves_results(self, tmp_path):
        prices = random_walk(240, seed=15)
        cache = tmp_path / "cache"
        _, fresh = self.run(prices, tmp_path, cache_dir=str(cache))
        cached_files = sorted(cache.glob("*.mtx"))
        assert len(cached_files) == 1
        _, reused = self.run(prices, tmp_path, cache_dir=str(cache))
        assert fresh == reused

    def test_multiple_periods(self, tmp_path):
        prices = random_walk(400, seed=16)
        half = prices.dates[200]
        periods = ((prices.dates[0], half), (prices.dates[100], prices.dates[-1]))
        _, rows = self.run(prices, tmp_path, periods=periods)
        assert len(rows) == 2
        assert rows[0].end == half

    def test_period_outside_data_fails_with_label(self, tmp_path):
        prices = random_walk(240, seed=17)
        with pytest.raises(ExperimentError, match="period 20300101-20301231"):
            self.run(prices, tmp_path,
                     periods=((day("2030-01-01"), day("2030-12-31")),))

    def test_figures_written(self, tmp_path):
        prices = random_walk(240, seed=18)
        cfg, rows = self.run(prices, tmp_path, figures=True)
        label = rows[0].period_label
        for stem in ("scatter", "running_max", "trajectory"):
            path = tmp_path / f"{stem}_{label}_return.csv"
            assert path.exists(), stem
        trajectory = (tmp_path / f"trajectory_{label}_return.csv").read_text()
        assert len(trajectory.splitlines()) == len(SMALL_RULES) + 1

    def test_constant_market_degenerates_gracefully(self, tmp_path):
        prices = make_series([100.0] * 120, volume=[1000.0] * 120)
        _, rows = self.run(prices, tmp_path, kind="sharpe", warmup=30)
        row = rows[0]
        assert row.performance == 0.0
        assert all(p == 0.0 for p in row.p_consistent)


def sample_rows():
    return [
        ReportRow(
            period_label="20000101-20041231", start=day("2000-01-01"),
            end=day("2004-12-31"), kind="return", rule_id=7,
            rule_label="ma(2,20)", performance=0.2613,
            q_grid=(0.1, 0.5), p_consistent=(0.004, 0.07),
            p_lower=(0.002, 0.05), p_upper=(0.01, 0.12),
        ),
        ReportRow(
            period_label="20050101-20091231", start=day("2005-01-01"),
            end=day("2009-12-31"), kind="sharpe", rule_id=9,
            rule_label="filter(x=0.05)", performance=0.0415,
            q_grid=(0.1, 0.5), p_consistent=(0.5, 0.61),
            p_lower=(0.44, 0.55), p_upper=(0.52, 0.66),
        ),
    ]


class TestEmitReport:
    def test_text_table(self, tmp_path):
        emit_report(sample_rows(), str(tmp_path))
        lines = (tmp_path / "report.txt").read_text().splitlines()
        assert lines[0].split() == [
            "period", "kind", "best", "rule", "perf", "q=0.1", "q=0.5"
        ]
        assert set(lines[1]) <= {"-", " "}
        assert "26.13%" in lines[2] and "0.00***" in lines[2]
        assert "0.0415" in lines[3] and "0.50" in lines[3]

    def test_csv_contents(self, tmp_path):
        import csv

        emit_report(sample_rows(), str(tmp_path), formats=("csv",))
        assert not (tmp_path / "report.txt").exists()
        with open(tmp_path / "report.csv", newline="") as fh:
            header, first, second = list(csv.reader(fh))
        assert header == ["period", "kind", "rule_id", "rule", "performance",
                          "p_q0.1", "p_lower_q0.1", "p_upper_q0.1",
                          "p_q0.5", "p_lower_q0.5", "p_upper_q0.5"]
        assert first[2] == "7"
        assert first[3] == "ma(2,20)"  # comma in the label survives quoting
        assert float(first[4]) == 0.2613
        assert float(first[5]) == 0.004
        assert second[1] == "sharpe"

    def test_stars_property(self):
        row = sample_rows()[0]
        assert row.stars == ("***", "*")

    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(ExperimentError, match="no report rows"):
            emit_report([], str(tmp_path))


class TestEmitFigureData:
    def test_sharpe_scatter_filters(self, tmp_path):
        values = np.column_stack([
            np.full(40, 0.5), np.full(40, -0.5), np.zeros(40),
        ])
        matrix = PerformanceMatrix(
            values=values, kind="sharpe", warmup=1,
            rule_ids=np.array([0, 1, 2]),
            flags=np.array([False, False, True]),
        )
        params = BootstrapParams(q=0.5, replicates=10, seed=0)
        trajectory = pvalue_trajectory(matrix, params, [1, 3])
        paths = emit_figure_data(matrix, trajectory, str(tmp_path), "demo")
        assert len(paths) == 3

        scatter = (tmp_path / "scatter_demo.csv").read_text().splitlines()
        # flagged column 2 and below-threshold column 1 drop out
        assert scatter == ["rule_id,statistic", "0,0.5"]

        running = (tmp_path / "running_max_demo.csv").read_text().splitlines()
        expected = max_trajectory(matrix)
        assert len(running) == 4
        assert [float(line.split(",")[1]) for line in running[1:]] == \
            list(expected)

        traj = (tmp_path / "trajectory_demo.csv").read_text().splitlines()
        assert traj[0] == "checkpoint,statistic,p_lower,p_consistent,p_upper"
        assert [int(line.split(",")[0]) for line in traj[1:]] == [1, 3]


class TestCalibration:
    def test_smoke_run_shape(self):
        result = run_calibration(trials=3, n_rules=5, n_days=60,
                                 replicates=20, seed=1)
        assert result["trials"] == 3
        assert 0.0 <= result["size_rate"] <= 1.0
        assert 0.0 <= result["power_rate"] <= 1.0
        assert len(result["size_pvalues"]) == 3
        assert len(result["power_pvalues"]) == 3
        assert all(0.0 <= p <= 1.0 for p in result["size_pvalues"])

    def test_deterministic(self):
        a = run_calibration(trials=2, n_rules=4, n_days=50, replicates=15)
        b = run_calibration(trials=2, n_rules=4, n_days=50, replicates=15)
        assert a == b

    def test_trials_validated(self):
        with pytest.raises(ValueError):
            run_calibration(trials=0)
