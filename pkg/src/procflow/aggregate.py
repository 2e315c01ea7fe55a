"""Per-process, per-window aggregation of network events into feature vectors."""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable

import numpy as np

from . import kernels
from .dataset import LabeledDataset
from .errors import DataIntegrityError, ValidationError
from .events import EventLog, NetworkEvent
from .features import FEATURE_INDEX as FI
from .features import N_FEATURES, PROTOCOL_TCP, PROTOCOL_UDP, FeatureVector
from .kernels import _codes as C

WINDOW_MS = 10_000


def windowize(events: Iterable[NetworkEvent], window_ms: int = WINDOW_MS):
    """Group events by ``(host, pid, ts_ms // window_ms)``.

    Returns a dict from bucket key to the list of its events, in first-seen
    order.  Raises :class:`DataIntegrityError` when one bucket mixes process
    names.
    """
    if window_ms <= 0:
        raise ValidationError("window_ms must be positive")
    buckets: dict[tuple[str, int, int], list[NetworkEvent]] = defaultdict(list)
    for ev in events:
        key = (ev.host, ev.pid, ev.ts_ms // window_ms)
        bucket = buckets[key]
        if bucket and bucket[0].proc != ev.proc:
            raise DataIntegrityError(
                f"bucket host={key[0]} pid={key[1]} window={key[2]} mixes process "
                f"names {bucket[0].proc!r} and {ev.proc!r}"
            )
        bucket.append(ev)
    return dict(buckets)


def features_from_sums(sums: np.ndarray) -> np.ndarray:
    """Turn ``window_sums`` rows into the 26-column feature matrix."""
    s = sums.astype(np.int64)
    out = np.zeros((s.shape[0], N_FEATURES), dtype=np.float64)

    def put(name, col):
        out[:, FI[name]] = s[:, col]

    for name, col in (
        ("tcp_bytes_sent", C.S_TCP_BYTES_SENT),
        ("tcp_bytes_recv", C.S_TCP_BYTES_RECV),
        ("tcp_pkts_sent", C.S_TCP_PKTS_SENT),
        ("tcp_pkts_recv", C.S_TCP_PKTS_RECV),
        ("tcp_bytes_copied", C.S_TCP_BYTES_COPIED),
        ("tcp_pkts_copied", C.S_TCP_PKTS_COPIED),
        ("udp_bytes_sent", C.S_UDP_BYTES_SENT),
        ("udp_bytes_recv", C.S_UDP_BYTES_RECV),
        ("udp_pkts_sent", C.S_UDP_PKTS_SENT),
        ("udp_pkts_recv", C.S_UDP_PKTS_RECV),
        ("total_events", C.S_TOTAL_EVENTS),
        ("n_accept", C.S_N_ACCEPT),
        ("n_connect", C.S_N_CONNECT),
        ("n_reconnect", C.S_N_RECONNECT),
        ("n_disconnect", C.S_N_DISCONNECT),
        ("n_receive", C.S_N_RECEIVE),
        ("n_retransmit", C.S_N_RETRANSMIT),
    ):
        put(name, col)

    tcp_b = s[:, C.S_TCP_BYTES_SENT] + s[:, C.S_TCP_BYTES_RECV]
    tcp_p = s[:, C.S_TCP_PKTS_SENT] + s[:, C.S_TCP_PKTS_RECV]
    udp_b = s[:, C.S_UDP_BYTES_SENT] + s[:, C.S_UDP_BYTES_RECV]
    udp_p = s[:, C.S_UDP_PKTS_SENT] + s[:, C.S_UDP_PKTS_RECV]

    def avg(num, den):
        return np.divide(num, den, out=np.zeros(num.shape[0]), where=den > 0)

    out[:, FI["total_bytes_sent"]] = s[:, C.S_TCP_BYTES_SENT] + s[:, C.S_UDP_BYTES_SENT]
    out[:, FI["avg_packet_size"]] = avg(tcp_b + udp_b, tcp_p + udp_p)
    out[:, FI["avg_tcp_packet_size"]] = avg(tcp_b, tcp_p)
    out[:, FI["avg_udp_packet_size"]] = avg(udp_b, udp_p)

    for name, tcp_col, udp_col in (
        ("ratio_bytes_sent", C.S_TCP_BYTES_SENT, C.S_UDP_BYTES_SENT),
        ("ratio_bytes_recv", C.S_TCP_BYTES_RECV, C.S_UDP_BYTES_RECV),
        ("ratio_pkts_sent", C.S_TCP_PKTS_SENT, C.S_UDP_PKTS_SENT),
        ("ratio_pkts_recv", C.S_TCP_PKTS_RECV, C.S_UDP_PKTS_RECV),
    ):
        out[:, FI[name]] = (s[:, tcp_col] + 1) / (s[:, udp_col] + 1)

    no_packets = (tcp_p + udp_p) == 0
    tcp_major = np.where(
        no_packets,
        s[:, C.S_TCP_EVENTS] >= s[:, C.S_UDP_EVENTS],
        tcp_p >= udp_p,
    )
    out[:, FI["protocol"]] = np.where(tcp_major, PROTOCOL_TCP, PROTOCOL_UDP)
    return out


def aggregate_window(bucket: list[NetworkEvent]) -> FeatureVector:
    """Feature vector of one non-empty bucket of events."""
    if not bucket:
        raise ValidationError("cannot aggregate an empty bucket")
    procs = {ev.proc for ev in bucket}
    if len(procs) > 1:
        raise DataIntegrityError(f"bucket mixes process names: {sorted(procs)}")
    log = EventLog.from_events(bucket)
    sums = kernels.window_sums(
        np.zeros(len(log), dtype=np.int64), 1, log.proto, log.kind, log.bytes, log.packets
    )
    return FeatureVector.from_array(features_from_sums(sums)[0], label=bucket[0].proc)


def bucketize(log: EventLog, window_ms: int = WINDOW_MS):
    """Assign every event of ``log`` to its (host, pid, window) bucket.

    Returns ``(bucket_ids, keys, labels)``: ``keys`` is an ``(n_buckets, 3)``
    array of (host code, pid, window) in lexicographic order and ``labels`` the
    process-name code of each bucket.
    """
    if window_ms <= 0:
        raise ValidationError("window_ms must be positive")
    if len(log) == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, np.zeros((0, 3), dtype=np.int64), z
    window = log.ts_ms // window_ms
    order = np.lexsort((window, log.pid, log.host))
    h, p, w = log.host[order], log.pid[order], window[order]
    new = np.ones(order.shape[0], dtype=bool)
    new[1:] = (h[1:] != h[:-1]) | (p[1:] != p[:-1]) | (w[1:] != w[:-1])
    sorted_ids = np.cumsum(new) - 1
    bucket_ids = np.empty_like(sorted_ids)
    bucket_ids[order] = sorted_ids

    starts = np.nonzero(new)[0]
    proc_sorted = log.proc[order]
    labels = proc_sorted[starts]
    bad = proc_sorted != labels[sorted_ids]
    if bad.any():
        b = int(sorted_ids[np.argmax(bad)])
        s = starts[b]
        raise DataIntegrityError(
            f"bucket host={log.host_names[h[s]]} pid={p[s]} window={w[s]} mixes process names"
        )
    keys = np.stack([h[starts], p[starts], w[starts]], axis=1)
    return bucket_ids, keys, labels


def aggregate_log(log: EventLog, window_ms: int = WINDOW_MS) -> LabeledDataset:
    """One feature row per non-empty bucket, ordered by (host, pid, window)."""
    log.validate()
    bucket_ids, keys, labels = bucketize(log, window_ms)
    sums = kernels.window_sums(
        bucket_ids, keys.shape[0], log.proto, log.kind, log.bytes, log.packets
    )
    names = np.array(log.proc_names, dtype=str) if log.proc_names else np.zeros(0, dtype=str)
    return LabeledDataset(features_from_sums(sums), names[labels] if len(labels) else names[:0])
