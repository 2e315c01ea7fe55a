"""Both kernel backends must agree bit for bit."""

import numpy as np
import pytest

from procflow import kernels
from procflow.kernels import _codes

pytestmark = pytest.mark.skipif(not kernels.numba_available(), reason="numba not installed")

NB = kernels.get_backend("numba")
NP = kernels.get_backend("numpy")


def test_env_flag_resolution(monkeypatch):
    assert kernels._resolve("numpy") == "numpy"
    assert kernels._resolve("") in kernels.BACKENDS
    with pytest.raises(ValueError):
        kernels._resolve("cuda")


def random_events(rng, n, n_buckets):
    kind = rng.integers(0, 8, size=n)
    lifecycle = ~np.isin(kind, [_codes.SEND, _codes.RECEIVE])
    proto = np.where(lifecycle, _codes.TCP, rng.integers(0, 2, size=n))
    packets = rng.integers(0, 30, size=n)
    nbytes = packets * rng.integers(1, 1500, size=n)
    return rng.integers(0, n_buckets, size=n), proto, kind, nbytes, packets


def test_window_sums_agree(rng):
    ids, proto, kind, nb, pk = random_events(rng, 20_000, 300)
    a = NB.window_sums(ids, 300, proto, kind, nb, pk)
    b = NP.window_sums(ids, 300, proto, kind, nb, pk)
    assert np.array_equal(a, b)
    assert a[:, _codes.S_TOTAL_EVENTS].sum() == 20_000


@pytest.mark.parametrize("n_classes,noise", [(2, 0.5), (5, 3.0), (40, 5.0)])
def test_grow_tree_agrees(rng, n_classes, noise):
    n, f = 1500, 9
    y = rng.integers(0, n_classes, size=n)
    X = np.round(rng.normal(size=(n, f)) * noise + y[:, None], 1)
    X[:, 4] = 3.0  # constant column is skipped by both
    sample = rng.integers(0, n, size=n)
    keys = rng.random((2 * n - 1, f))
    a = NB.grow_tree(X, y, sample, n_classes, 12, 2, 3, keys)
    b = NP.grow_tree(X, y, sample, n_classes, 12, 2, 3, keys)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)
    roots = np.array([0], dtype=np.int64)
    probe = rng.normal(size=(500, f)) * noise
    assert np.array_equal(NB.forest_proba(probe, *a, roots), NP.forest_proba(probe, *b, roots))
