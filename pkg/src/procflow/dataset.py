"""Labeled feature matrices and the preprocessing steps of each experiment:
per-class capping, minimum-count filtering, top-N relabeling, browser task
labels, stratified splitting and quantile binning.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyDatasetError,
    ParseError,
    ProcflowIOError,
    ShapeError,
    StratificationError,
    ValidationError,
)
from .features import FEATURE_NAMES, N_FEATURES, REAL_FEATURES

OTHER = "Other"
BROWSER = "browser"
NON_BROWSER = "non-browser"
DEFAULT_BROWSERS = ("firefox.exe", "chrome.exe", "iexplore.exe", "msedge.exe")
BINNING_VERSION = 1


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features)
        if self.features.ndim != 2:
            self.features = self.features.reshape(-1, N_FEATURES)
        self.labels = np.asarray(self.labels, dtype=str)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.features.size and not np.isfinite(self.features).all():
            raise ValidationError("feature matrix contains non-finite values")

    def __len__(self):
        return int(self.labels.shape[0])

    def class_counts(self) -> dict[str, int]:
        names, counts = np.unique(self.labels, return_counts=True)
        return {str(n): int(c) for n, c in zip(names, counts)}

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx])

    def relabel(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.features, labels)

    @staticmethod
    def concat(parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        return LabeledDataset(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
        )


@dataclass(frozen=True)
class LabelSpace:
    classes: tuple[str, ...]
    has_other: bool = False

    def __post_init__(self):
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("class names must be unique")
        if self.has_other and (not self.classes or self.classes[-1] != OTHER):
            raise ValidationError(f"{OTHER!r} must be the last class")

    def __len__(self):
        return len(self.classes)

    @classmethod
    def from_labels(cls, labels) -> "LabelSpace":
        return cls(tuple(sorted(set(map(str, labels)))))

    def encode(self, labels) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.classes)}
        try:
            return np.array([lookup[str(lab)] for lab in labels], dtype=np.int64)
        except KeyError as exc:
            raise ValidationError(f"label {exc.args[0]!r} is not in the label space") from None

    def to_dict(self):
        return {"classes": list(self.classes), "has_other": self.has_other}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["classes"]), bool(d.get("has_other", False)))


# -- CSV ---------------------------------------------------------------------

CSV_HEADER = (*FEATURE_NAMES, "label")
_REAL_COLS = [i for i, n in enumerate(FEATURE_NAMES) if n in REAL_FEATURES]


def write_csv(data: LabeledDataset, path):
    path = Path(path)
    real = set(_REAL_COLS)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row, label in zip(data.features.tolist(), data.labels.tolist()):
                w.writerow([repr(v) if j in real else int(v) for j, v in enumerate(row)] + [label])
    except OSError as exc:
        raise ProcflowIOError(f"cannot write {path}: {exc.strerror}") from None


def read_csv(path) -> LabeledDataset:
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ProcflowIOError(f"cannot read {path}: {exc.strerror}") from None
    rows, labels = [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ParseError(f"{path}:1: unexpected CSV header", path, 1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(CSV_HEADER):
                raise ParseError(f"{path}:{lineno}: expected {len(CSV_HEADER)} columns", path, lineno)
            try:
                rows.append([float(v) for v in rec[:-1]])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric feature value", path, lineno) from None
            labels.append(rec[-1])
    feats = np.array(rows, dtype=np.float64).reshape(-1, N_FEATURES)
    return LabeledDataset(feats, np.array(labels, dtype=str))


# -- sampling and relabeling --------------------------------------------------

def cap_per_class(data: LabeledDataset, cap: int = 50_000, rng=None) -> LabeledDataset:
    """Keep at most ``cap`` rows per class, sampled uniformly without replacement."""
    if cap < 1:
        raise ValidationError("cap must be >= 1")
    rng = as_rng(rng)
    keep = []
    for name in sorted(data.class_counts()):
        idx = np.flatnonzero(data.labels == name)
        if idx.shape[0] > cap:
            idx = rng.choice(idx, size=cap, replace=False)
        keep.append(idx)
    if not keep:
        return data.subset(slice(0, 0))
    return data.subset(np.sort(np.concatenate(keep)))


def min_count_filter(data: LabeledDataset, min_samples: int = 300) -> LabeledDataset:
    """Drop every class with fewer than ``min_samples`` rows."""
    if min_samples < 1:
        raise ValidationError("min_samples must be >= 1")
    kept = [name for name, c in data.class_counts().items() if c >= min_samples]
    if not kept:
        raise EmptyDatasetError(f"no class has at least {min_samples} samples")
    return data.subset(np.isin(data.labels, kept))


def top_n_relabel(data: LabeledDataset, n: int) -> tuple[LabeledDataset, LabelSpace]:
    """Keep the ``n`` most frequent classes and relabel the rest ``"Other"``.

    Frequency ties break lexicographically.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    ranked = sorted(data.class_counts().items(), key=lambda kv: (-kv[1], kv[0]))
    top = [name for name, _ in ranked[:n]]
    if len(ranked) <= n:
        return data, LabelSpace(tuple(top))
    if OTHER in top:
        raise ValidationError(f"a real class is already named {OTHER!r}")
    labels = np.where(np.isin(data.labels, top), data.labels, OTHER)
    return data.relabel(labels), LabelSpace((*top, OTHER), has_other=True)


def browser_labeling(
    data: LabeledDataset, mode: str, browsers: Sequence[str] = DEFAULT_BROWSERS
) -> tuple[LabeledDataset, LabelSpace]:
    """Labels for the browser tasks.

    ``binary`` maps rows to browser/non-browser, ``fingerprint`` keeps browser
    rows only under their own names, ``combined`` keeps browser names and
    collapses everything else to non-browser.
    """
    is_browser = np.isin(data.labels, list(browsers))
    present = [b for b in browsers if b in set(data.labels[is_browser].tolist())]
    if mode == "binary":
        labels = np.where(is_browser, BROWSER, NON_BROWSER)
        classes = tuple(c for c in (BROWSER, NON_BROWSER) if c in set(labels.tolist()))
        return data.relabel(labels), LabelSpace(classes)
    if mode == "fingerprint":
        if not is_browser.any():
            raise EmptyDatasetError("fingerprint task has no browser rows")
        return data.subset(is_browser), LabelSpace(tuple(present))
    if mode == "combined":
        labels = np.where(is_browser, data.labels, NON_BROWSER)
        classes = tuple(present) + ((NON_BROWSER,) if (~is_browser).any() else ())
        return data.relabel(labels), LabelSpace(classes)
    raise ValidationError(f"unknown browser labeling mode {mode!r}")


def split(
    data: LabeledDataset, train_fraction: float = 0.8, rng=None
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified train/test split.

    Each class sends ``round(count * train_fraction)`` rows to train (half
    rounds up), clamped so both sides get at least one row.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction must lie strictly between 0 and 1")
    rng = as_rng(rng)
    train_idx, test_idx = [], []
    for name, count in sorted(data.class_counts().items()):
        if count < 2:
            raise StratificationError(f"class {name!r} has a single row; cannot stratify")
        idx = rng.permutation(np.flatnonzero(data.labels == name))
        n_train = min(max(math.floor(count * train_fraction + 0.5), 1), count - 1)
        train_idx.append(idx[:n_train])
        test_idx.append(idx[n_train:])
    if not train_idx:
        raise EmptyDatasetError("cannot split an empty dataset")
    return (
        data.subset(np.sort(np.concatenate(train_idx))),
        data.subset(np.sort(np.concatenate(test_idx))),
    )


# -- quantile binning ---------------------------------------------------------

@dataclass
class BinningModel:
    """Per-feature quantile edges; a value's bin is the number of edges strictly below it."""

    bin_count: int
    edges: np.ndarray  # (n_features, bin_count - 1)
    fitted_on: int

    @property
    def n_features(self):
        return self.edges.shape[0]

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(
                f"binning model expects {self.n_features} features, got shape {X.shape}"
            )
        out = np.empty(X.shape, dtype=np.int64)
        for j in range(self.n_features):
            out[:, j] = np.searchsorted(self.edges[j], X[:, j], side="left")
        return out

    def scaled(self, X) -> np.ndarray:
        """Bin indices mapped onto [0, 1]."""
        return self.transform(X) / (self.bin_count - 1)

    def representatives(self, bins) -> np.ndarray:
        """A value inside each bin: interval midpoints, the lowest edge for bin 0,
        and just above the highest edge for the top bin."""
        bins = np.asarray(bins, dtype=np.int64)
        out = np.empty(bins.shape, dtype=np.float64)
        top = self.bin_count - 1
        for j in range(self.n_features):
            e = self.edges[j]
            b = bins[:, j]
            lo = e[np.clip(b - 1, 0, top - 1)]
            hi = e[np.clip(b, 0, top - 1)]
            col = (lo + hi) / 2
            col = np.where(b == 0, e[0], col)
            col = np.where(b == top, np.nextafter(e[-1], np.inf), col)
            out[:, j] = col
        return out

    def to_dict(self):
        return {
            "version": BINNING_VERSION,
            "bin_count": self.bin_count,
            "fitted_on": self.fitted_on,
            "edges": self.edges.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != BINNING_VERSION:
            raise ValidationError(f"unsupported binning model version {d.get('version')!r}")
        edges = np.array(d["edges"], dtype=np.float64).reshape(-1, int(d["bin_count"]) - 1)
        return cls(int(d["bin_count"]), edges, int(d["fitted_on"]))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_binning(train, bin_count: int = 64) -> BinningModel:
    """Nearest-rank quantile edges: the k-th edge is the ceil(k n / B)-th smallest value."""
    X = train.features if isinstance(train, LabeledDataset) else np.asarray(train)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("cannot fit binning on an empty training set")
    if bin_count < 2:
        raise ValidationError("bin_count must be >= 2")
    n = X.shape[0]
    k = np.arange(1, bin_count, dtype=np.int64)
    ranks = (k * n + bin_count - 1) // bin_count
    edges = np.sort(X, axis=0)[ranks - 1].T.copy()
    return BinningModel(bin_count, edges, n)


def transform(model: BinningModel, data: LabeledDataset) -> LabeledDataset:
    return LabeledDataset(model.transform(data.features), data.labels)
