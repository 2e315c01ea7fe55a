"""Random forest classifier grown from scratch.

Trees are fit on bootstrap resamples by greedy Gini minimisation.  At every
node the features are visited in a node-specific random order and the first
``feature_subsample`` non-constant ones are searched exhaustively; ties go to
the lowest feature index, then the lowest threshold.  A split sends
``x <= threshold`` left, where ``threshold`` is the largest training value on
the left side.

The per-tree growth and the batch inference are the hot kernels in
:mod:`procflow.kernels`.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from ._seeds import worker_count
from .dataset import LabelSpace
from .errors import EmptyDatasetError, ShapeError, ValidationError

FOREST_FORMAT = "procflow.forest"
FOREST_VERSION = 1


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: int = 15
    min_split: int = 2
    feature_subsample: int | None = None  # None -> floor(sqrt(n_features))
    seed: int = 0


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return int(self.feature.shape[0])

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        # children always carry larger ids than their parent
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": self.value[node].tolist()}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, root: dict, n_classes: int) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def alloc():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append([0.0] * n_classes)
            return len(feature) - 1

        # allocate in the same order the growers do: children as a pair, left first
        stack = [(root, alloc())]
        while stack:
            obj, node = stack.pop()
            if "leaf" in obj:
                value[node] = list(obj["leaf"])
                continue
            lid, rid = alloc(), alloc()
            feature[node] = int(obj["feature"])
            threshold[node] = float(obj["threshold"])
            left[node], right[node] = lid, rid
            stack.append((obj["right"], rid))
            stack.append((obj["left"], lid))
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64).reshape(-1, n_classes),
        )


@dataclass
class Forest:
    trees: list[Tree]
    class_names: LabelSpace
    n_features: int
    max_depth: int
    feature_subsample: int
    seed: int
    min_split: int = 2
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n_trees(self):
        return len(self.trees)

    def _pack(self):
        if self._packed is None:
            offsets = np.cumsum([0] + [t.n_nodes for t in self.trees[:-1]]).astype(np.int64)
            cat = lambda a: np.concatenate(a)  # noqa: E731
            left = cat([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offsets)])
            right = cat([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offsets)])
            self._packed = (
                cat([t.feature for t in self.trees]),
                cat([t.threshold for t in self.trees]),
                left,
                right,
                np.concatenate([t.value for t in self.trees], axis=0),
                offsets,
            )
        return self._packed

    def predict_proba(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"forest expects {self.n_features} features, got shape {X.shape}")
        return kernels.forest_proba(X, *self._pack())

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def max_path_depth(self) -> int:
        return max(t.depth() for t in self.trees)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_split": self.min_split,
            "feature_subsample": self.feature_subsample,
            "n_features": self.n_features,
            "seed": self.seed,
            "label_space": self.class_names.to_dict(),
            "trees": [t.to_nested() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        if d.get("format") != FOREST_FORMAT or d.get("version") != FOREST_VERSION:
            raise ValidationError("not a version-1 procflow forest")
        space = LabelSpace.from_dict(d["label_space"])
        return cls(
            trees=[Tree.from_nested(t, len(space)) for t in d["trees"]],
            class_names=space,
            n_features=int(d["n_features"]),
            max_depth=int(d["max_depth"]),
            feature_subsample=int(d["feature_subsample"]),
            seed=int(d["seed"]),
            min_split=int(d["min_split"]),
        )

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Forest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def gini(labels) -> float:
    """Gini impurity ``1 - sum_c p_c^2`` of a label sequence."""
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    if counts.sum() == 0:
        return 0.0
    p = counts / counts.sum()
    return float(1.0 - np.sum(p * p))


def _node_budget(n_samples, max_depth):
    # every leaf holds >= 1 sample, so a tree has at most 2n - 1 nodes
    return int(min(2 ** (max_depth + 1) - 1, 2 * n_samples - 1))


def _grow_one(X, y, n_classes, params, k, tree_seed):
    rng = np.random.default_rng(tree_seed)
    n, n_features = X.shape
    sample_idx = rng.integers(0, n, size=n)
    feat_keys = rng.random((_node_budget(n, params.max_depth), n_features))
    return Tree(*kernels.grow_tree(
        X, y, sample_idx, n_classes, params.max_depth, params.min_split, k, feat_keys
    ))


def train_forest(X, y, class_names: LabelSpace, params: ForestParams | None = None) -> Forest:
    """Fit a forest on features ``X`` and class indices ``y`` (into ``class_names``)."""
    params = params or ForestParams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("cannot train a forest on an empty training set")
    if y.shape[0] != X.shape[0]:
        raise ShapeError("X and y have different row counts")
    if params.n_trees < 1 or params.max_depth < 0 or params.min_split < 2:
        raise ValidationError("need n_trees >= 1, max_depth >= 0 and min_split >= 2")
    n_classes = len(class_names)
    if y.min() < 0 or y.max() >= n_classes:
        raise ValidationError("class index out of range")
    if np.unique(y).shape[0] < 2:
        warnings.warn("training data holds a single class; every tree is one leaf", stacklevel=2)

    n_features = X.shape[1]
    k = params.feature_subsample or max(1, math.isqrt(n_features))
    k = min(k, n_features)
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)

    def grow(s):
        return _grow_one(X, y, n_classes, params, k, s)

    workers = min(worker_count(), params.n_trees)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(grow, seeds))
    else:
        trees = [grow(s) for s in seeds]
    return Forest(
        trees=trees,
        class_names=class_names,
        n_features=n_features,
        max_depth=params.max_depth,
        feature_subsample=k,
        seed=params.seed,
        min_split=params.min_split,
    )


def predict_forest(forest: Forest, x) -> tuple[str, np.ndarray]:
    """Class name and probability vector for a single feature row."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("predict_forest takes a single row")
    proba = forest.predict_proba(x)[0]
    return forest.class_names.classes[int(np.argmax(proba))], proba
