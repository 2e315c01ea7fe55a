"""Metrics, confusion matrices and the experiment suites.

Average precision and recall are macro averages over every class in the label
space; a class that is never predicted has precision 0 and a class with no
test support has recall 0.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._seeds import child_seed
from .dataset import (
    DEFAULT_BROWSERS,
    LabeledDataset,
    LabelSpace,
    browser_labeling,
    cap_per_class,
    fit_binning,
    min_count_filter,
    split,
    top_n_relabel,
)
from .errors import EmptyDatasetError, SuiteConfigError, ValidationError
from .forest import Forest, ForestParams, train_forest
from .mlp import MLPModel, TrainConfig, make_architecture, train_mlp

logger = logging.getLogger(__name__)

SUITES = ("browser_binary", "browser_fingerprint", "browser_combined", "top_n_sweep")
MODELS = ("rf", "mlp")
DEFAULT_N_VALUES = (5, 10, 50, 100, 300, 500, 1000)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray
    class_names: LabelSpace

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *self.class_names.classes])
        for name, row in zip(self.class_names.classes, self.counts.tolist()):
            w.writerow([name, *row])
        return buf.getvalue()

    def heatmap(self, width: int = 12) -> str:
        """Row-normalised shading for terminal display."""
        shades = " .:-=+*#%@"
        names = [n[:width] for n in self.class_names.classes]
        pad = max(len(n) for n in names)
        lines = [" " * pad + " |" + "".join(str(j % 10) for j in range(len(names)))]
        for i, row in enumerate(self.normalized()):
            cells = "".join(shades[min(int(v * (len(shades) - 1) + 0.5), len(shades) - 1)] for v in row)
            lines.append(f"{names[i]:>{pad}} |{cells}")
        return "\n".join(lines)


def confusion_matrix(predictions, labels, k: int, class_names: LabelSpace | None = None) -> ConfusionMatrix:
    """``counts[i, j]`` = number of samples with true class i predicted as j."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ValidationError("predictions and labels differ in length")
    for arr in (predictions, labels):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise ValidationError(f"class index out of range for k={k}")
    counts = np.bincount(labels * k + predictions, minlength=k * k).reshape(k, k)
    if class_names is None:
        class_names = LabelSpace(tuple(str(i) for i in range(k)))
    return ConfusionMatrix(counts.astype(np.int64), class_names)


@dataclass
class ClassMetrics:
    name: str
    precision: float
    recall: float
    support: int


@dataclass
class EvalReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    per_class: list[ClassMetrics]
    confusion: ConfusionMatrix
    task: str = ""
    model: str = ""
    n_top: int | None = None
    n_samples: int = 0

    @property
    def n_labels(self):
        return len(self.confusion.class_names)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "model": self.model,
            "n_top": self.n_top,
            "n_samples": self.n_samples,
            "n_labels": self.n_labels,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "per_class": [vars(c) for c in self.per_class],
            "label_space": self.confusion.class_names.to_dict(),
            "confusion": self.confusion.counts.tolist(),
        }


def report_from_confusion(cm: ConfusionMatrix, **meta) -> EvalReport:
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise EmptyDatasetError("cannot evaluate on an empty test set")
    tp = np.diag(counts).astype(np.float64)
    predicted = counts.sum(axis=0)
    support = counts.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    per_class = [
        ClassMetrics(name, float(p), float(r), int(s))
        for name, p, r, s in zip(cm.class_names.classes, precision, recall, support)
    ]
    return EvalReport(
        accuracy=float(tp.sum() / total),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        per_class=per_class,
        confusion=cm,
        **meta,
    )


def evaluate_predictions(predictions, labels, class_names: LabelSpace, **meta) -> EvalReport:
    cm = confusion_matrix(predictions, labels, len(class_names), class_names)
    return report_from_confusion(cm, **meta)


def evaluate(model: Forest | MLPModel, test: LabeledDataset, /, **meta) -> EvalReport:
    """Score ``model`` on raw test features (the MLP wrapper bins them itself)."""
    if len(test) == 0:
        raise EmptyDatasetError("cannot evaluate on an empty test set")
    y = model.class_names.encode(test.labels)
    return evaluate_predictions(model.predict(test.features), y, model.class_names, **meta)


# -- experiment suites ---------------------------------------------------------

@dataclass
class ExperimentConfig:
    models: Sequence[str] = MODELS
    seed: int = 0
    n_values: Sequence[int] = DEFAULT_N_VALUES
    min_samples: int = 300
    cap: int = 50_000
    train_fraction: float = 0.8
    bins: int = 64
    rf_binned: bool = False
    browsers: Sequence[str] = DEFAULT_BROWSERS
    forest: ForestParams = field(default_factory=ForestParams)
    mlp: TrainConfig = field(default_factory=TrainConfig)

    def validate(self):
        bad = [m for m in self.models if m not in MODELS]
        if bad or not self.models:
            raise SuiteConfigError(f"models must be drawn from {MODELS}, got {list(self.models)}")
        if not self.n_values or min(self.n_values) < 1:
            raise SuiteConfigError("n_values must be positive")


def train_model(kind: str, train: LabeledDataset, space: LabelSpace, config: ExperimentConfig,
                tag: str = "") -> Forest | MLPModel:
    """Train one model the way the experiment suites do."""
    y = space.encode(train.labels)
    binning = fit_binning(train, config.bins)
    if kind == "rf":
        params = ForestParams(**{**vars(config.forest), "seed": child_seed(config.seed, tag, "rf")})
        if config.rf_binned:
            return BinnedForest(train_forest(binning.transform(train.features), y, space, params), binning)
        return train_forest(train.features, y, space, params)
    if kind == "mlp":
        tc = TrainConfig(**{**vars(config.mlp), "seed": child_seed(config.seed, tag, "mlp")})
        arch = make_architecture(train.features.shape[1], max(len(space), 2))
        params = train_mlp(binning.scaled(train.features), y, arch, tc)
        return MLPModel(params, space, binning, tc)
    raise SuiteConfigError(f"unknown model {kind!r}")


@dataclass
class BinnedForest:
    """A forest trained on bin indices instead of raw values."""

    forest: Forest
    binning: object

    @property
    def class_names(self):
        return self.forest.class_names

    def predict(self, X):
        return self.forest.predict(self.binning.transform(X))


def _run_cell(task, data, space, config, n_top=None):
    tag = f"{task}/{n_top}"
    if min(data.class_counts().values(), default=0) < 2:
        raise SuiteConfigError(f"{task}: every class needs at least 2 rows to split")
    train, test = split(data, config.train_fraction, child_seed(config.seed, tag, "split"))
    reports = []
    for kind in config.models:
        logger.info("%s: training %s on %d rows, %d labels", tag, kind, len(train), len(space))
        model = train_model(kind, train, space, config, tag)
        report = evaluate(model, test, task=task, model=kind, n_top=n_top, n_samples=len(data))
        logger.info("%s %s: accuracy %.4f", tag, kind, report.accuracy)
        reports.append(report)
    return reports


def run_experiment(suite: str, data: LabeledDataset, config: ExperimentConfig | None = None) -> list[EvalReport]:
    """Run one suite and return a report per (model, N) cell."""
    config = config or ExperimentConfig()
    config.validate()
    if suite not in SUITES:
        raise SuiteConfigError(f"unknown suite {suite!r}; choose from {SUITES}")
    if len(data) == 0:
        raise SuiteConfigError("no input rows")

    if suite.startswith("browser_"):
        mode = suite.removeprefix("browser_")
        capped = cap_per_class(data, config.cap, child_seed(config.seed, suite, "cap"))
        try:
            labeled, space = browser_labeling(capped, mode, config.browsers)
        except EmptyDatasetError as exc:
            raise SuiteConfigError(f"{suite}: {exc}") from None
        if len(space) < 2:
            raise SuiteConfigError(f"{suite}: need at least two labels, found {list(space.classes)}")
        return _run_cell(suite, labeled, space, config)

    try:
        filtered = min_count_filter(data, config.min_samples)
    except EmptyDatasetError as exc:
        raise SuiteConfigError(f"{suite}: {exc}") from None
    capped = cap_per_class(filtered, config.cap, child_seed(config.seed, suite, "cap"))
    reports = []
    for n in config.n_values:
        labeled, space = top_n_relabel(capped, n)
        if len(space) < 2:
            raise SuiteConfigError(f"{suite}: N={n} leaves a single label")
        reports.extend(_run_cell(suite, labeled, space, config, n_top=n))
    return reports


# -- summaries -----------------------------------------------------------------

SUMMARY_COLUMNS = ("task", "model", "n_samples", "n_labels", "accuracy", "macro_precision", "macro_recall")


def summary_rows(reports: Sequence[EvalReport]) -> list[dict]:
    rows = []
    for r in reports:
        task = r.task if r.n_top is None else f"{r.task}/top{r.n_top}"
        rows.append({
            "task": task,
            "model": r.model,
            "n_samples": r.n_samples,
            "n_labels": r.n_labels,
            "accuracy": r.accuracy,
            "macro_precision": r.macro_precision,
            "macro_recall": r.macro_recall,
        })
    return rows


def render_summary(rows: Sequence[dict]) -> str:
    """Plain-text results table with percentages."""
    head = ["Task", "Model", "Samples", "Labels", "Accuracy", "Avg Precision", "Avg Recall"]
    body = [
        [r["task"], r["model"].upper(), f"{r['n_samples']:,}", str(r["n_labels"]),
         f"{100 * r['accuracy']:.2f}%", f"{100 * r['macro_precision']:.2f}%",
         f"{100 * r['macro_recall']:.2f}%"]
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    fmt = lambda cells: "  ".join(c.ljust(w) if i < 2 else c.rjust(w)  # noqa: E731
                                  for i, (c, w) in enumerate(zip(cells, widths)))
    lines = [fmt(head), "  ".join("-" * w for w in widths)]
    lines += [fmt(b) for b in body]
    return "\n".join(lines) + "\n"


def summary_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def summary_json(rows: Sequence[dict]) -> str:
    return json.dumps(rows, indent=2)
