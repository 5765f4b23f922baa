from dataclasses import replace

import numpy as np
import pytest

from smotecls.core.errors import ConfigError
from smotecls.core.rng import RngStream
from smotecls.services.experiment import (
    STRATEGY_CODES,
    MetricsReport,
    aligned_table,
    fit_eval_classifier,
    ranks,
    report_frame,
    run_experiment,
)
from smotecls.services.metrics import METRIC_NAMES


def test_base_is_always_first(fast_settings, blobs):
    reports = run_experiment(blobs, ["smote"], replace(fast_settings, repeats=1), "blobs")
    assert [r.strategy for r in reports] == ["base", "smote"]
    for r in reports:
        assert r.ok and len(r.per_repeat) == 1
        assert set(r.per_repeat[0]) == set(METRIC_NAMES)
        assert r.stderr("auc") == 0.0


def test_runs_are_reproducible(fast_settings, blobs):
    a = report_frame(run_experiment(blobs, ["base", "smote", "bsmote"], fast_settings, "blobs"))
    b = report_frame(run_experiment(blobs, ["base", "smote", "bsmote"], fast_settings, "blobs"))
    assert a.equals(b)
    assert list(a["strategy"]) == ["base", "smote", "bsmote"]


def test_strategy_streams_do_not_depend_on_the_requested_set(fast_settings, blobs):
    alone = run_experiment(blobs, ["smote"], fast_settings)
    mixed = run_experiment(blobs, ["bsmote", "smote"], fast_settings)
    np.testing.assert_array_equal(alone[1].values("auprc"), mixed[2].values("auprc"))
    np.testing.assert_array_equal(alone[0].values("auc"), mixed[0].values("auc"))


def test_thread_pool_matches_serial(fast_settings, blobs):
    serial = report_frame(run_experiment(blobs, ["smote"], fast_settings))
    pooled = report_frame(run_experiment(blobs, ["smote"], replace(fast_settings, workers=2)))
    assert serial.equals(pooled)


def test_failed_cells_are_recorded(fast_settings, blobs):
    settings = replace(fast_settings, km_threshold=1.0)
    reports = run_experiment(blobs, ["kmsmote"], settings, "blobs")
    km = reports[1]
    assert km.per_repeat == [] and len(km.failures) == settings.repeats
    assert "no eligible cluster" in km.failures[0][1]
    frame = report_frame(reports)
    row = frame.set_index("strategy").loc["kmsmote"]
    assert row["repeats_failed"] == settings.repeats and row["repeats_ok"] == 0
    assert "FAILED" in aligned_table(frame)


def test_unknown_strategy_is_rejected(fast_settings, blobs):
    with pytest.raises(ConfigError):
        run_experiment(blobs, ["adasyn"], fast_settings)


def test_ranks_exclude_base():
    reps = [
        MetricsReport("d", "base", per_repeat=[{"auc": 0.99}]),
        MetricsReport("d", "a", per_repeat=[{"auc": 0.7}]),
        MetricsReport("d", "b", per_repeat=[{"auc": 0.9}]),
        MetricsReport("d", "c", per_repeat=[{"auc": 0.7}]),
        MetricsReport("d", "dead", failures=[(0, "boom")]),
    ]
    assert ranks(reps, "auc") == {"a": 2.0, "b": 1.0, "c": 2.0}


def test_stderr_uses_sample_deviation():
    rep = MetricsReport("d", "s", per_repeat=[{"auc": 0.5}, {"auc": 0.7}, {"auc": 0.9}])
    assert rep.mean("auc") == pytest.approx(0.7)
    assert rep.stderr("auc") == pytest.approx(0.2 / np.sqrt(3))


def test_aligned_table_cells():
    reps = [
        MetricsReport("d", "base", per_repeat=[{m: 0.5 for m in METRIC_NAMES}]),
        MetricsReport("d", "smote", per_repeat=[{m: 0.6 for m in METRIC_NAMES}]),
    ]
    text = aligned_table(report_frame(reps))
    assert "0.600±0.000 (1)" in text
    assert "0.500±0.000" in text


def test_single_tree_classifier_option(fast_settings, blobs):
    model = fit_eval_classifier(blobs, replace(fast_settings, classifier="tree"), RngStream(0))
    assert len(model.trees) == 1
    forest = fit_eval_classifier(blobs, fast_settings, RngStream(0))
    assert len(forest.trees) == fast_settings.eval_trees


def test_filter_stats_on_simulated_data(fast_settings, small_sim):
    data, prov = small_sim
    reports = run_experiment(data, ["smote_cls"], replace(fast_settings, repeats=1), "sim", provenance=prov)
    cls = reports[1]
    assert cls.ok
    stats = cls.filter_stats[0]
    assert set(stats) == {"noise_total", "noise_exclusion", "G1_retention", "G2_retention"}
    assert 0.0 <= stats["G1_retention"] <= 1.0
    frame = report_frame(reports)
    assert "noise_exclusion" in frame.columns


def test_strategy_codes_are_unique():
    assert len(set(STRATEGY_CODES.values())) == len(STRATEGY_CODES)
    assert "wo_dis" in STRATEGY_CODES and "smote_cls" in STRATEGY_CODES
