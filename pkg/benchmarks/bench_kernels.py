"""Time the numba and numpy kernel backends on synthetic inputs.

Usage: python benchmarks/bench_kernels.py [--rows N] [--repeat R]

The numba timings exclude the first call, which pays for compilation (or
for loading the on-disk cache).
"""
import argparse
import time

import numpy as np

from procflow.kernels import get_backend, numba_available


def make_inputs(rows, n_features, n_classes, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, n_classes, rows).astype(np.int64)
    X = rng.normal(size=(rows, n_features)) + 0.5 * y[:, None]
    X = np.round(X, 2)  # plenty of tied values, like count features
    n_events = rows * 20
    events = dict(
        bucket_ids=np.sort(rng.integers(0, rows, n_events)).astype(np.int64),
        n_buckets=rows,
        proto=rng.integers(0, 2, n_events).astype(np.int64),
        kind=rng.integers(0, 8, n_events).astype(np.int64),
        nbytes=rng.integers(0, 1500, n_events).astype(np.int64),
        npackets=rng.integers(0, 4, n_events).astype(np.int64),
    )
    return X, y, events


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(backend, X, y, events, repeat, max_depth=15):
    k = get_backend(backend)
    rows, n_features = X.shape
    n_classes = int(y.max()) + 1
    rng = np.random.default_rng(0)
    sample_idx = rng.integers(0, rows, rows).astype(np.int64)
    max_nodes = min(2 ** (max_depth + 1) - 1, 2 * rows - 1)
    keys = rng.random((max_nodes, n_features))
    kf = int(np.sqrt(n_features))

    grow = lambda: k.grow_tree(X, y, sample_idx, n_classes, max_depth, 2, kf, keys)  # noqa: E731
    tree = grow()
    roots = np.zeros(1, dtype=np.int64)
    proba = lambda: k.forest_proba(X, *tree, roots)  # noqa: E731
    sums = lambda: k.window_sums(**events)  # noqa: E731
    proba(), sums()  # warm up (compile for numba)
    return {
        "grow_tree": best_of(grow, repeat),
        "forest_proba": best_of(proba, repeat),
        "window_sums": best_of(sums, repeat),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--features", type=int, default=26)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    X, y, events = make_inputs(args.rows, args.features, args.classes, args.seed)
    backends = ["numpy"] + (["numba"] if numba_available() else [])
    results = {b: bench(b, X, y, events, args.repeat) for b in backends}
    if "numba" not in results:
        print("numba not installed; numpy timings only")

    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name in results["numpy"]:
        cells = "".join(f"{results[b][name] * 1e3:>10.2f}ms" for b in backends)
        extra = f"{results['numpy'][name] / results['numba'][name]:>11.1f}x" if len(backends) == 2 else ""
        print(f"{name:<14}{cells}{extra}")


if __name__ == "__main__":
    main()
