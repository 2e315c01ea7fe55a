import json
import warnings

import numpy as np
import pytest

from oracles import forest_predict
from procflow.dataset import LabelSpace
from procflow.errors import ShapeError
from procflow.forest import (
    Forest,
    ForestParams,
    Tree,
    gini,
    predict_forest,
    train_forest,
)

SPACE3 = LabelSpace(("a", "b", "c"))


def blobs(rng, n=200, k=3, f=4, spread=1.0):
    y = rng.integers(0, k, size=n)
    X = rng.normal(size=(n, f)) * spread + y[:, None] * 2.0
    return X, y


def leaf_forest(values, names):
    trees = [
        Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([v], dtype=float))
        for v in values
    ]
    return Forest(trees, LabelSpace(tuple(names)), n_features=1, max_depth=15, feature_subsample=1, seed=0)


def test_gini_of_balanced_pair():
    assert gini(["a", "a", "b", "b"]) == 0.5
    assert gini(["a"]) == 0.0


def test_single_leaf_forest():
    name, proba = predict_forest(leaf_forest([[1.0, 0.0]], "ab"), [0.0])
    assert name == "a" and proba.tolist() == [1.0, 0.0]


def test_vote_tie_goes_to_lowest_index():
    name, proba = predict_forest(leaf_forest([[1.0, 0.0], [0.0, 1.0]], "ab"), [0.0])
    assert name == "a" and proba.tolist() == [0.5, 0.5]


def test_single_class_training_warns_and_predicts_it():
    X = np.arange(10, dtype=float)[:, None]
    with pytest.warns(UserWarning, match="single class"):
        forest = train_forest(X, np.zeros(10, dtype=int), LabelSpace(("only", "unused")),
                              ForestParams(n_trees=5))
    proba = forest.predict_proba(X)
    assert np.all(proba[:, 0] == 1.0)


def test_separable_1d_fits_training_set():
    X = np.arange(20, dtype=float)[:, None]
    y = (X[:, 0] >= 10).astype(int)
    forest = train_forest(X, y, LabelSpace(("lo", "hi")), ForestParams(n_trees=25, seed=3))
    # a single threshold in [9, 10) separates the classes; bootstrap misses at
    # most a few points, so the averaged vote must still be exact
    assert np.array_equal(forest.predict(X), y)


def test_predict_matches_independent_traversal(rng):
    X, y = blobs(rng, spread=2.5)
    forest = train_forest(X, y, SPACE3, ForestParams(n_trees=15, seed=11))
    doc = json.loads(forest.to_json())
    probes = rng.normal(size=(100, 4)) * 3 + 2
    proba = forest.predict_proba(probes)
    for i, x in enumerate(probes):
        best, probs = forest_predict(doc, x)
        assert forest.predict(x[None, :])[0] == best
        assert proba[i] == pytest.approx(probs, abs=1e-12)


def test_probabilities_are_distributions(rng):
    X, y = blobs(rng)
    forest = train_forest(X, y, SPACE3, ForestParams(n_trees=10, seed=1))
    proba = forest.predict_proba(rng.normal(size=(50, 4)))
    assert np.all(proba >= 0)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)
    for t in forest.trees:
        leaves = t.feature < 0
        assert np.allclose(t.value[leaves].sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("depth", [0, 1, 3, 15])
def test_depth_bound(rng, depth):
    X, y = blobs(rng, n=300, spread=4.0)
    forest = train_forest(X, y, SPACE3, ForestParams(n_trees=5, max_depth=depth, seed=2))
    assert forest.max_path_depth() <= depth


def test_default_params(rng):
    X, y = blobs(rng, n=120)
    forest = train_forest(X, y, SPACE3)
    assert forest.n_trees == 100 and forest.max_depth == 15
    assert forest.feature_subsample == 2  # floor(sqrt(4))


def test_determinism(rng):
    X, y = blobs(rng, spread=3.0)
    a = train_forest(X, y, SPACE3, ForestParams(n_trees=8, seed=42)).to_json()
    b = train_forest(X, y, SPACE3, ForestParams(n_trees=8, seed=42)).to_json()
    c = train_forest(X, y, SPACE3, ForestParams(n_trees=8, seed=43)).to_json()
    assert a == b and a != c


def test_monotone_transform_invariance(rng):
    X, y = blobs(rng, n=300, spread=2.0)
    X = np.abs(X) + 0.1
    test = np.abs(rng.normal(size=(200, 4)) * 3 + 2) + 0.1
    params = ForestParams(n_trees=20, seed=5)
    base = train_forest(X, y, SPACE3, params).predict(test)
    for fn in (np.log, np.sqrt, lambda v: v**3 + 7, lambda v: -1.0 / v):
        moved = train_forest(fn(X), y, SPACE3, params).predict(fn(test))
        assert np.array_equal(base, moved)


def test_serialization_roundtrip(tmp_path, rng):
    X, y = blobs(rng, spread=2.0)
    forest = train_forest(X, y, SPACE3, ForestParams(n_trees=6, seed=9))
    path = tmp_path / "f.json"
    forest.save(path)
    loaded = Forest.load(path)
    assert loaded.to_json() == forest.to_json()
    for a, b in zip(loaded.trees, forest.trees):
        assert np.array_equal(a.feature, b.feature) and np.array_equal(a.left, b.left)
    probes = rng.normal(size=(40, 4))
    assert np.array_equal(loaded.predict_proba(probes), forest.predict_proba(probes))


def test_shape_errors(rng):
    X, y = blobs(rng)
    forest = train_forest(X, y, SPACE3, ForestParams(n_trees=3))
    with pytest.raises(ShapeError):
        forest.predict(np.zeros((2, 5)))
    with pytest.raises(ShapeError):
        predict_forest(forest, np.zeros((2, 4)))


def test_thread_pool_matches_serial(rng, monkeypatch):
    X, y = blobs(rng, spread=3.0)
    params = ForestParams(n_trees=12, seed=4)
    monkeypatch.setenv("PROCFLOW_THREADS", "1")
    serial = train_forest(X, y, SPACE3, params).to_json()
    monkeypatch.setenv("PROCFLOW_THREADS", "4")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        parallel = train_forest(X, y, SPACE3, params).to_json()
    assert serial == parallel
