import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from procflow.dataset import LabeledDataset, LabelSpace
from procflow.errors import EmptyDatasetError, SuiteConfigError, ValidationError
from procflow.evaluate import (
    ConfusionMatrix,
    ExperimentConfig,
    confusion_matrix,
    evaluate_predictions,
    render_summary,
    report_from_confusion,
    run_experiment,
    summary_csv,
    summary_json,
    summary_rows,
)
from procflow.forest import ForestParams
from procflow.mlp import TrainConfig
from procflow.synth import BROWSERS, ScenarioConfig, builtin_profiles, generate_scenario
from procflow.aggregate import aggregate_log


def test_confusion_rows_are_true_labels():
    cm = confusion_matrix([0, 1, 1], [0, 1, 0], 2)
    assert cm.counts.tolist() == [[1, 1], [0, 1]]


def test_confusion_rejects_bad_input():
    with pytest.raises(ValidationError):
        confusion_matrix([0, 1], [0], 2)
    with pytest.raises(ValidationError):
        confusion_matrix([0, 2], [0, 1], 2)


def test_metrics_worked_example():
    cm = ConfusionMatrix(np.array([[5, 5], [0, 10]]), LabelSpace(("a", "b")))
    r = report_from_confusion(cm)
    assert r.accuracy == 0.75
    assert r.macro_precision == pytest.approx((1 + 10 / 15) / 2, abs=1e-15)
    assert r.macro_recall == 0.75
    assert [c.support for c in r.per_class] == [10, 10]


def test_unpredicted_class_has_zero_precision():
    r = evaluate_predictions([0, 0, 0], [0, 1, 1], LabelSpace(("a", "b")))
    assert r.per_class[1].precision == 0.0
    assert r.per_class[1].recall == 0.0


def test_empty_test_set():
    with pytest.raises(EmptyDatasetError):
        evaluate_predictions([], [], LabelSpace(("a", "b")))


@given(st.integers(2, 6), st.integers(1, 20), st.data())
def test_balanced_support_recall_equals_accuracy(k, per_class, data):
    labels = np.repeat(np.arange(k), per_class)
    preds = np.array(data.draw(st.lists(st.integers(0, k - 1), min_size=len(labels), max_size=len(labels))))
    r = evaluate_predictions(preds, labels, LabelSpace(tuple(f"c{i}" for i in range(k))))
    assert abs(r.macro_recall - r.accuracy) <= 1e-12
    assert sum(c.support for c in r.per_class) == len(labels)
    assert 0 <= r.macro_precision <= 1


def test_normalized_rows_sum_to_one():
    cm = ConfusionMatrix(np.array([[3, 1], [0, 0]]), LabelSpace(("a", "b")))
    n = cm.normalized()
    assert n[0].tolist() == [0.75, 0.25]
    assert n[1].tolist() == [0.0, 0.0]
    assert cm.to_csv().splitlines()[0].endswith("a,b")


@pytest.fixture(scope="module")
def small_data():
    profiles = builtin_profiles("high", 5)
    log = generate_scenario(ScenarioConfig(profiles, 120, hosts=3, seed=1))
    return aggregate_log(log)


def _quick(models=("rf",), **kw):
    return ExperimentConfig(models=models, seed=0, min_samples=10,
                            forest=ForestParams(n_trees=5, max_depth=6),
                            mlp=TrainConfig(epochs=2), **kw)


def test_browser_binary_has_two_classes(small_data):
    (r,) = run_experiment("browser_binary", small_data, _quick())
    assert r.confusion.class_names.classes == ("browser", "non-browser")
    assert r.n_labels == 2


def test_browser_fingerprint_only_browsers(small_data):
    (r,) = run_experiment("browser_fingerprint", small_data, _quick())
    assert "non-browser" not in r.confusion.class_names.classes


def test_top_n_without_other_when_n_covers_all(small_data):
    reports = run_experiment("top_n_sweep", small_data, _quick(models=("rf", "mlp"), n_values=(3, 5)))
    assert [(r.model, r.n_top) for r in reports] == [("rf", 3), ("mlp", 3), ("rf", 5), ("mlp", 5)]
    assert reports[0].n_labels == 4 and reports[0].confusion.class_names.has_other
    assert reports[2].n_labels == 5 and not reports[2].confusion.class_names.has_other


def test_suite_errors(small_data):
    with pytest.raises(SuiteConfigError):
        run_experiment("nope", small_data, _quick())
    with pytest.raises(SuiteConfigError):
        run_experiment("top_n_sweep", small_data, _quick(models=("svm",)))
    with pytest.raises(SuiteConfigError):
        run_experiment("top_n_sweep", small_data.subset(np.arange(0)), _quick())
    only_noise = small_data.subset(np.flatnonzero(~np.isin(small_data.labels, BROWSERS)))
    with pytest.raises(SuiteConfigError):
        run_experiment("browser_fingerprint", only_noise, _quick())


def test_summary_outputs(small_data):
    reports = run_experiment("top_n_sweep", small_data, _quick(n_values=(2,)))
    rows = summary_rows(reports)
    assert rows[0]["task"] == "top_n_sweep/top2"
    text = render_summary(rows)
    assert "Avg Precision" in text and "%" in text
    assert summary_csv(rows).splitlines()[0].startswith("task,model")
    assert json.loads(summary_json(rows)) == rows
