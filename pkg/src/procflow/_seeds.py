import zlib

import numpy as np


def child_seed(seed: int, *tags) -> int:
    """Deterministic 63-bit sub-seed of ``seed`` for a named purpose."""
    key = tuple(zlib.crc32(str(t).encode()) for t in tags)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def worker_count() -> int:
    """Thread cap from ``PROCFLOW_THREADS`` (0 or unset means one per CPU)."""
    import os

    raw = os.environ.get("PROCFLOW_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)
