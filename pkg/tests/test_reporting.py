"""CSV/JSON artifact round-trips and figure rendering."""

import json
import xml.etree.ElementTree as ElementTree
from dataclasses import replace

import numpy as np
import pytest

from vestibular_rc import reporting
from vestibular_rc.dynamics import TimeSeries
from vestibular_rc.errors import ConfigurationError, InvalidInputError
from vestibular_rc.harness import (
    run_experiment_artifacts,
    trial_seed,
    tuned_config,
    memory_curve_for,
)
from vestibular_rc.readout import ReadoutMatrix


def fast_config(n=20, seed=1):
    return replace(
        tuned_config("lorenz", "coupled", "accuracy", n=n, seed=seed),
        l_transient=1000, l_train=4000, l_validation=800, l_test=600,
    )


@pytest.fixture(scope="module")
def report_and_artifacts():
    return run_experiment_artifacts(fast_config(), with_memory=True)


@pytest.fixture
def small_series():
    rng = np.random.default_rng(0)
    return TimeSeries(values=rng.normal(size=(40, 3)), dt=0.25)


class TestTimeseriesCsv:
    def test_round_trip(self, tmp_path, small_series):
        path = tmp_path / "ts.csv"
        reporting.write_timeseries_csv(path, small_series)
        back = reporting.read_timeseries_csv(path)
        np.testing.assert_array_equal(back.values, small_series.values)
        assert back.dt == small_series.dt
        assert back.n_channels == 3

    def test_header_names_channels(self, tmp_path, small_series):
        path = tmp_path / "ts.csv"
        reporting.write_timeseries_csv(path, small_series)
        assert path.read_text().splitlines()[0] == "t,ch1,ch2,ch3"

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,ch1\n0.0,1.0\n0.1,2.0\n")
        with pytest.raises(InvalidInputError):
            reporting.read_timeseries_csv(path)

    def test_too_short_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,ch1\n0.0,1.0\n")
        with pytest.raises(InvalidInputError):
            reporting.read_timeseries_csv(path)

    def test_nonuniform_sampling_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,ch1\n0.0,1.0\n0.1,2.0\n0.35,3.0\n")
        with pytest.raises(InvalidInputError):
            reporting.read_timeseries_csv(path)


class TestConfigFile:
    def test_round_trip_all_tuned(self, tmp_path):
        for system in ("lorenz", "food_chain"):
            for topology in ("coupled", "uncoupled_matched"):
                for objective in ("accuracy", "climate"):
                    config = tuned_config(system, topology, objective,
                                          n=13, seed=9)
                    path = tmp_path / "cfg.txt"
                    reporting.write_config_file(path, config)
                    assert reporting.read_config_file(path) == config

    def test_ridge_written_as_lambda_key(self, tmp_path, small_series):
        path = tmp_path / "cfg.txt"
        reporting.write_config_file(path, fast_config())
        text = path.read_text()
        assert "lambda=" in text
        assert "ridge_lambda" not in text

    def test_clip_margin_none_spelled_out(self):
        text = reporting.format_config(fast_config())
        assert "clip_margin=none" in text
        parsed = reporting.parse_config(text)
        assert parsed.clip_margin is None

    def test_comments_and_blanks_ignored(self):
        config = reporting.parse_config(
            "# experiment\n\nsystem=lorenz\ntopology=uncoupled\n n = 12 \n"
        )
        assert config.system == "lorenz"
        assert config.n == 12

    def test_omitted_keys_use_defaults(self):
        config = reporting.parse_config("system=lorenz\ntopology=coupled\n")
        assert config.n == 30
        assert config.dt == 0.1

    def test_unknown_key_rejected(self):
        with pytest.raises(InvalidInputError):
            reporting.parse_config("system=lorenz\ntopology=coupled\nfoo=1\n")

    def test_missing_required_rejected(self):
        with pytest.raises(ConfigurationError):
            reporting.parse_config("system=lorenz\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(InvalidInputError):
            reporting.parse_config("system=lorenz\ntopology coupled\n")

    def test_unparseable_value_rejected(self):
        with pytest.raises(InvalidInputError):
            reporting.parse_config("system=lorenz\ntopology=coupled\nn=abc\n")

    def test_invalid_field_value_surfaces_config_error(self):
        with pytest.raises(ConfigurationError):
            reporting.parse_config("system=lorenz\ntopology=coupled\nn=0\n")


class TestReportOutputs:
    def test_csv_lists_all_metrics(self, tmp_path, report_and_artifacts):
        report, _ = report_and_artifacts
        path = tmp_path / "report.csv"
        reporting.write_report_csv(path, report)
        lines = path.read_text().splitlines()
        assert lines[0] == "metric,value"
        names = {line.split(",")[0] for line in lines[1:]}
        assert set(reporting.REPORT_METRICS) <= names
        assert {"diverged", "mc", "wall_time"} <= names

    def test_csv_values_parse_back(self, tmp_path, report_and_artifacts):
        report, _ = report_and_artifacts
        path = tmp_path / "report.csv"
        reporting.write_report_csv(path, report)
        values = dict(
            line.split(",") for line in path.read_text().splitlines()[1:]
        )
        assert float(values["val_nrmse"]) == report.stats.val_nrmse
        assert values["diverged"] == "0"

    def test_json_structure(self, tmp_path, report_and_artifacts):
        report, _ = report_and_artifacts
        path = tmp_path / "report.json"
        reporting.write_report_json(path, report)
        payload = json.loads(path.read_text())
        assert payload["config"]["system"] == "lorenz"
        assert payload["config"]["lambda"] == report.config.ridge_lambda
        assert payload["stats"]["val_nrmse"] == report.stats.val_nrmse
        assert payload["stats"]["diverged"] is False
        assert payload["memory"]["mc"] == pytest.approx(report.memory.mc)
        assert len(payload["memory"]["mf"]) == report.memory.mf.size


class TestSweepCsv:
    def test_rows_per_size_and_metric(self, tmp_path):
        from vestibular_rc.harness import ensemble_sweep

        aggregates = ensemble_sweep(fast_config(n=6, seed=0), [6], 1)
        path = tmp_path / "sweep.csv"
        reporting.write_sweep_csv(path, aggregates)
        lines = path.read_text().splitlines()
        assert lines[0] == "n,metric,mean,std,n_divergent"
        assert len(lines) == 1 + len(aggregates[0].means)
        assert all(line.startswith("6,") for line in lines[1:])


@pytest.fixture(scope="module")
def curves():
    config = fast_config(n=6)
    return [memory_curve_for(replace(config, seed=trial_seed(0, 6, t)))
            for t in range(2)]


class TestMemoryCsv:
    def test_summary_schema(self, tmp_path, curves):
        path = tmp_path / "summary.csv"
        reporting.write_memory_summary_csv(path, curves)
        lines = path.read_text().splitlines()
        assert lines[0] == "tau,mf_mean,mf_std"
        assert len(lines) == 1 + curves[0].mf.size

    def test_summary_mean_matches(self, tmp_path, curves):
        path = tmp_path / "summary.csv"
        reporting.write_memory_summary_csv(path, curves)
        first = path.read_text().splitlines()[1].split(",")
        expected = np.mean([c.mf[0] for c in curves])
        assert float(first[1]) == pytest.approx(expected)

    def test_per_trial_schema(self, tmp_path, curves):
        path = tmp_path / "curves.csv"
        reporting.write_memory_curves_csv(path, curves)
        lines = path.read_text().splitlines()
        assert lines[0] == "tau,mf,method,trial"
        assert len(lines) == 1 + sum(c.mf.size for c in curves)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(InvalidInputError):
            reporting.write_memory_summary_csv(tmp_path / "x.csv", [])

    def test_mismatched_lengths_rejected(self, tmp_path, curves):
        short = replace(curves[0], mf=curves[0].mf[:5],
                        mc=float(curves[0].mf[:5].sum()))
        with pytest.raises(InvalidInputError):
            reporting.write_memory_summary_csv(tmp_path / "x.csv",
                                               [curves[0], short])


class TestReadoutArchive:
    def test_round_trip(self, tmp_path, report_and_artifacts):
        _, artifacts = report_and_artifacts
        path = tmp_path / "readout.npz"
        reporting.save_readout(path, artifacts.readout)
        loaded = reporting.load_readout(path)
        np.testing.assert_array_equal(loaded.w_out, artifacts.readout.w_out)
        assert loaded.ridge_lambda == artifacts.readout.ridge_lambda

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "bad.npz"
        np.savez(path, weights=np.eye(3))
        with pytest.raises(InvalidInputError):
            reporting.load_readout(path)


class TestPlots:
    def test_timeseries_svg(self, tmp_path, small_series):
        csv_path = tmp_path / "ts.csv"
        svg_path = tmp_path / "ts.svg"
        reporting.write_timeseries_csv(csv_path, small_series)
        reporting.plot_timeseries_csv(csv_path, svg_path)
        root = ElementTree.parse(svg_path).getroot()
        assert root.tag.endswith("svg")

    def test_timeseries_truncates_long_input(self, tmp_path):
        series = TimeSeries(values=np.random.default_rng(1).normal(
            size=(6000, 2)), dt=0.1)
        csv_path = tmp_path / "long.csv"
        reporting.write_timeseries_csv(csv_path, series)
        reporting.plot_timeseries_csv(csv_path, tmp_path / "long.svg",
                                      max_samples=500)
        assert (tmp_path / "long.svg").exists()

    def test_memory_svg_both_schemas(self, tmp_path):
        curves = [memory_curve_for(replace(fast_config(n=6),
                                           seed=trial_seed(0, 6, t)))
                  for t in range(2)]
        summary = tmp_path / "summary.csv"
        per_trial = tmp_path / "curves.csv"
        reporting.write_memory_summary_csv(summary, curves)
        reporting.write_memory_curves_csv(per_trial, curves)
        reporting.plot_memory_csv(summary, tmp_path / "summary.svg")
        reporting.plot_memory_csv(per_trial, tmp_path / "curves.svg")
        for name in ("summary.svg", "curves.svg"):
            root = ElementTree.parse(tmp_path / name).getroot()
            assert root.tag.endswith("svg")

    def test_non_memory_csv_rejected(self, tmp_path, small_series):
        csv_path = tmp_path / "ts.csv"
        reporting.write_timeseries_csv(csv_path, small_series)
        with pytest.raises(InvalidInputError):
            reporting.plot_memory_csv(csv_path, tmp_path / "x.svg")
