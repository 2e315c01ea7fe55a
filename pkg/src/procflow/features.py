"""The 26 per-window traffic features, in their fixed column order."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

FEATURE_NAMES = (
    "protocol",
    "total_bytes_sent",
    "avg_packet_size",
    "tcp_bytes_sent",
    "tcp_bytes_recv",
    "tcp_pkts_sent",
    "tcp_pkts_recv",
    "avg_tcp_packet_size",
    "tcp_bytes_copied",
    "tcp_pkts_copied",
    "udp_bytes_sent",
    "udp_bytes_recv",
    "udp_pkts_sent",
    "udp_pkts_recv",
    "avg_udp_packet_size",
    "ratio_bytes_sent",
    "ratio_bytes_recv",
    "ratio_pkts_sent",
    "ratio_pkts_recv",
    "total_events",
    "n_accept",
    "n_connect",
    "n_reconnect",
    "n_disconnect",
    "n_receive",
    "n_retransmit",
)
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

# columns holding non-integer values; everything else is a count (or the 0/1 protocol)
REAL_FEATURES = frozenset(
    n for n in FEATURE_NAMES if n.startswith(("avg_", "ratio_"))
)

PROTOCOL_TCP = 0
PROTOCOL_UDP = 1


@dataclass(frozen=True)
class FeatureVector:
    protocol: int
    total_bytes_sent: int
    avg_packet_size: float
    tcp_bytes_sent: int
    tcp_bytes_recv: int
    tcp_pkts_sent: int
    tcp_pkts_recv: int
    avg_tcp_packet_size: float
    tcp_bytes_copied: int
    tcp_pkts_copied: int
    udp_bytes_sent: int
    udp_bytes_recv: int
    udp_pkts_sent: int
    udp_pkts_recv: int
    avg_udp_packet_size: float
    ratio_bytes_sent: float
    ratio_bytes_recv: float
    ratio_pkts_sent: float
    ratio_pkts_recv: float
    total_events: int
    n_accept: int
    n_connect: int
    n_reconnect: int
    n_disconnect: int
    n_receive: int
    n_retransmit: int
    label: str

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self)[:-1], dtype=np.float64)

    @classmethod
    def from_array(cls, row, label: str) -> "FeatureVector":
        vals = {}
        for f, v in zip(fields(cls)[:-1], row):
            vals[f.name] = float(v) if f.name in REAL_FEATURES else int(v)
        return cls(**vals, label=label)


assert tuple(f.name for f in fields(FeatureVector)[:-1]) == FEATURE_NAMES
