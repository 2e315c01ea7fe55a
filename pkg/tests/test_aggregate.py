import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import FEATURES, brute_force_features
from procflow.aggregate import aggregate_log, aggregate_window, windowize
from procflow.errors import DataIntegrityError, ValidationError
from procflow.events import KINDS, TCP_ONLY_KINDS, EventLog, NetworkEvent
from procflow.features import FEATURE_NAMES, REAL_FEATURES


def ev(kind="send", proto="TCP", nbytes=0, packets=0, ts=0, pid=1, host="h", proc="p.exe"):
    return NetworkEvent(ts, host, pid, proc, proto, kind, nbytes, packets)


def random_event(rng, ts=0):
    kind = KINDS[rng.integers(len(KINDS))]
    proto = "TCP" if kind in TCP_ONLY_KINDS or rng.random() < 0.6 else "UDP"
    carries = kind in ("send", "receive", "copy", "retransmit") and rng.random() < 0.9
    packets = int(rng.integers(1, 20)) if carries else 0
    nbytes = int(rng.integers(packets, 1500 * packets + 1)) if carries else 0
    return ev(kind, proto, nbytes, packets, ts=ts)


def random_bucket(rng):
    return [random_event(rng) for _ in range(int(rng.integers(1, 40)))]


def assert_matches_oracle(fv, bucket):
    expected = brute_force_features(bucket)
    for name in FEATURE_NAMES:
        got = getattr(fv, name)
        if name in REAL_FEATURES:
            assert got == pytest.approx(expected[name], rel=1e-12, abs=0), name
        else:
            assert got == expected[name], name


def test_feature_order_matches_reference_list():
    assert FEATURE_NAMES == FEATURES and len(FEATURE_NAMES) == 26


def test_single_tcp_send():
    fv = aggregate_window([ev("send", "TCP", 400, 1)])
    assert fv.tcp_bytes_sent == 400 and fv.total_bytes_sent == 400
    assert fv.avg_packet_size == 400 and fv.total_events == 1
    # (tcp + 1) / (udp + 1) per pair; only the sent-bytes pair sees the 400 bytes
    assert fv.ratio_bytes_sent == 401 / 1
    assert fv.ratio_bytes_recv == 1.0
    assert fv.ratio_pkts_sent == 2.0 and fv.ratio_pkts_recv == 1.0
    assert fv.protocol == 0
    assert fv.n_accept == fv.n_connect == fv.n_reconnect == fv.n_disconnect == fv.n_retransmit == 0


def test_mixed_bucket():
    bucket = [ev("send", "TCP", 300, 2), ev("send", "UDP", 100, 1), ev("connect", "TCP")]
    fv = aggregate_window(bucket)
    assert fv.total_bytes_sent == 400
    assert fv.avg_packet_size == 400 / 3
    assert fv.ratio_bytes_sent == 301 / 101
    assert fv.n_connect == 1 and fv.total_events == 3 and fv.protocol == 0
    assert_matches_oracle(fv, bucket)


def test_protocol_majority_rules():
    udp_heavy = [ev("send", "UDP", 10, 5), ev("send", "TCP", 10, 4)]
    assert aggregate_window(udp_heavy).protocol == 1
    tie = [ev("send", "UDP", 10, 4), ev("send", "TCP", 10, 4)]
    assert aggregate_window(tie).protocol == 0
    # no data packets: fall back to event counts, ties to TCP
    assert aggregate_window([ev("send", "UDP"), ev("send", "UDP"), ev("connect")]).protocol == 1
    assert aggregate_window([ev("send", "UDP"), ev("connect")]).protocol == 0


def test_random_buckets_match_brute_force(rng):
    for _ in range(300):
        bucket = random_bucket(rng)
        assert_matches_oracle(aggregate_window(bucket), bucket)


def test_empty_and_mixed_buckets_rejected():
    with pytest.raises(ValidationError):
        aggregate_window([])
    with pytest.raises(DataIntegrityError):
        aggregate_window([ev(proc="a"), ev(proc="b")])


def test_windowize_boundaries():
    assert len(windowize([ev(ts=0), ev(ts=9999)])) == 1
    assert len(windowize([ev(ts=9999), ev(ts=10_000)])) == 2
    assert len(windowize([ev(ts=0, pid=1), ev(ts=0, pid=2)])) == 2
    with pytest.raises(ValidationError):
        windowize([], window_ms=0)


def test_windowize_conflict_names_bucket():
    with pytest.raises(DataIntegrityError, match="pid=7 window=0"):
        windowize([ev(pid=7, proc="a"), ev(pid=7, proc="b", ts=5)])


def test_windowize_preserves_count(rng):
    events = []
    for _ in range(1000):
        e = random_event(rng, ts=int(rng.integers(0, 100_000)))
        events.append(NetworkEvent(e.ts_ms, f"h{rng.integers(3)}", int(rng.integers(4)), "p",
                                   e.proto, e.kind, e.bytes, e.packets))
    buckets = windowize(events)
    assert sum(len(b) for b in buckets.values()) == 1000
    assert all(b for b in buckets.values())


def test_aggregate_log_matches_windowize(rng):
    events = []
    for i in range(2000):
        e = random_event(rng, ts=int(rng.integers(0, 60_000)))
        pid = int(rng.integers(5))
        events.append(NetworkEvent(e.ts_ms, f"h{pid % 2}", pid, f"proc{pid}",
                                   e.proto, e.kind, e.bytes, e.packets))
    data = aggregate_log(EventLog.from_events(events))
    buckets = windowize(events)
    assert len(data) == len(buckets)
    keys = sorted(buckets)
    for row, label, key in zip(data.features, data.labels, keys):
        expected = brute_force_features(buckets[key])
        assert label == buckets[key][0].proc
        for j, name in enumerate(FEATURE_NAMES):
            assert row[j] == pytest.approx(expected[name], rel=1e-12, abs=0)


def test_aggregate_log_rejects_conflicting_bucket():
    log = EventLog.from_events([ev(proc="a"), ev(proc="b", ts=10)])
    with pytest.raises(DataIntegrityError):
        aggregate_log(log)


def test_aggregate_empty_log():
    assert len(aggregate_log(EventLog.empty())) == 0


event_st = st.builds(
    lambda kind, udp, packets, per_pkt: ev(
        kind,
        "UDP" if udp and kind not in TCP_ONLY_KINDS else "TCP",
        packets * per_pkt,
        packets,
    ),
    st.sampled_from(KINDS),
    st.booleans(),
    st.integers(0, 50),
    st.integers(1, 2000),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(event_st, min_size=1, max_size=30), st.randoms(use_true_random=False))
def test_permutation_invariance(bucket, rnd):
    shuffled = list(bucket)
    rnd.shuffle(shuffled)
    assert aggregate_window(bucket) == aggregate_window(shuffled)


COUNT_FIELDS = [n for n in FEATURE_NAMES if n not in REAL_FEATURES and n != "protocol"]


@settings(max_examples=60, deadline=None)
@given(st.lists(event_st, min_size=1, max_size=20), st.lists(event_st, min_size=1, max_size=20))
def test_count_additivity(a, b):
    fa, fb, fab = aggregate_window(a), aggregate_window(b), aggregate_window(a + b)
    for name in COUNT_FIELDS:
        assert getattr(fab, name) == getattr(fa, name) + getattr(fb, name)


@settings(max_examples=60, deadline=None)
@given(st.lists(event_st, min_size=1, max_size=20), st.integers(1, 5000))
def test_ratio_monotonicity(bucket, extra):
    base = aggregate_window(bucket).ratio_bytes_sent
    assert aggregate_window(bucket + [ev("send", "TCP", extra, 1)]).ratio_bytes_sent > base
    assert aggregate_window(bucket + [ev("send", "UDP", extra, 1)]).ratio_bytes_sent < base


@settings(max_examples=60, deadline=None)
@given(st.lists(event_st, min_size=1, max_size=20))
def test_avg_zero_iff_no_data_packets(bucket):
    fv = aggregate_window(bucket)
    data_pkts = sum(e.packets for e in bucket if e.kind in ("send", "receive"))
    assert (fv.avg_packet_size == 0) == (data_pkts == 0)
    assert all(np.isfinite(fv.to_array()))
    assert min(fv.ratio_bytes_sent, fv.ratio_bytes_recv, fv.ratio_pkts_sent, fv.ratio_pkts_recv) > 0
