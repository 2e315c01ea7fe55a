"""Network event records and the JSONL event-log format.

An event log is held column-wise (:class:`EventLog`) because realistic logs run
to hundreds of thousands of events; :class:`NetworkEvent` is the row view used
at API boundaries and in tests.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ParseError, ProcflowIOError, ValidationError
from .kernels import _codes

PROTOCOLS = ("TCP", "UDP")
KINDS = (
    "accept",
    "connect",
    "reconnect",
    "disconnect",
    "send",
    "receive",
    "retransmit",
    "copy",
)
DATA_KINDS = ("send", "receive")
TCP_ONLY_KINDS = ("accept", "connect", "reconnect", "disconnect", "retransmit", "copy")

_PROTO_CODE = {p: i for i, p in enumerate(PROTOCOLS)}
_KIND_CODE = {k: i for i, k in enumerate(KINDS)}
assert _KIND_CODE["send"] == _codes.SEND and _PROTO_CODE["UDP"] == _codes.UDP

_TCP_ONLY_CODES = np.array([_KIND_CODE[k] for k in TCP_ONLY_KINDS])


@dataclass(frozen=True)
class NetworkEvent:
    ts_ms: int
    host: str
    pid: int
    proc: str
    proto: str
    kind: str
    bytes: int
    packets: int

    def __post_init__(self):
        if self.proto not in _PROTO_CODE:
            raise ValidationError(f"unknown protocol {self.proto!r}")
        if self.kind not in _KIND_CODE:
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if self.bytes < 0 or self.packets < 0:
            raise ValidationError("bytes and packets must be non-negative")
        if self.proto == "UDP" and self.kind in TCP_ONLY_KINDS:
            raise ValidationError(f"{self.kind} events are TCP-only")

    def to_dict(self):
        return {
            "ts_ms": self.ts_ms,
            "host": self.host,
            "pid": self.pid,
            "proc": self.proc,
            "proto": self.proto,
            "kind": self.kind,
            "bytes": self.bytes,
            "packets": self.packets,
        }


def _encode(values) -> tuple[np.ndarray, list[str]]:
    names = sorted(set(values))
    lookup = {v: i for i, v in enumerate(names)}
    return np.fromiter((lookup[v] for v in values), dtype=np.int64, count=len(values)), names


@dataclass
class EventLog:
    """Column-wise event log; ``host`` and ``proc`` are codes into the name lists."""

    ts_ms: np.ndarray
    host: np.ndarray
    pid: np.ndarray
    proc: np.ndarray
    proto: np.ndarray
    kind: np.ndarray
    bytes: np.ndarray
    packets: np.ndarray
    host_names: list[str]
    proc_names: list[str]

    def __len__(self):
        return int(self.ts_ms.shape[0])

    def __eq__(self, other):
        if not isinstance(other, EventLog):
            return NotImplemented
        return (
            self.host_names == other.host_names
            and self.proc_names == other.proc_names
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("ts_ms", "host", "pid", "proc", "proto", "kind", "bytes", "packets")
            )
        )

    @classmethod
    def empty(cls):
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, z, z, z, z, [], [])

    @classmethod
    def from_events(cls, events: Iterable[NetworkEvent]) -> "EventLog":
        events = list(events)
        if not events:
            return cls.empty()
        host, host_names = _encode([e.host for e in events])
        proc, proc_names = _encode([e.proc for e in events])

        def col(fn):
            return np.fromiter((fn(e) for e in events), dtype=np.int64, count=len(events))

        return cls(
            ts_ms=col(lambda e: e.ts_ms),
            host=host,
            pid=col(lambda e: e.pid),
            proc=proc,
            proto=col(lambda e: _PROTO_CODE[e.proto]),
            kind=col(lambda e: _KIND_CODE[e.kind]),
            bytes=col(lambda e: e.bytes),
            packets=col(lambda e: e.packets),
            host_names=host_names,
            proc_names=proc_names,
        )

    def validate(self):
        if len(self) and (self.bytes.min() < 0 or self.packets.min() < 0):
            raise ValidationError("bytes and packets must be non-negative")
        udp_lifecycle = (self.proto == _codes.UDP) & np.isin(self.kind, _TCP_ONLY_CODES)
        if udp_lifecycle.any():
            i = int(np.argmax(udp_lifecycle))
            raise ValidationError(f"event {i}: {KINDS[self.kind[i]]} events are TCP-only")

    def __iter__(self) -> Iterator[NetworkEvent]:
        for i in range(len(self)):
            yield self.event(i)

    def event(self, i: int) -> NetworkEvent:
        return NetworkEvent(
            ts_ms=int(self.ts_ms[i]),
            host=self.host_names[self.host[i]],
            pid=int(self.pid[i]),
            proc=self.proc_names[self.proc[i]],
            proto=PROTOCOLS[self.proto[i]],
            kind=KINDS[self.kind[i]],
            bytes=int(self.bytes[i]),
            packets=int(self.packets[i]),
        )

    def take(self, order: np.ndarray) -> "EventLog":
        return EventLog(
            *(getattr(self, f)[order] for f in
              ("ts_ms", "host", "pid", "proc", "proto", "kind", "bytes", "packets")),
            host_names=list(self.host_names),
            proc_names=list(self.proc_names),
        )

    @staticmethod
    def concat(logs: Iterable["EventLog"]) -> "EventLog":
        """Concatenate logs, re-coding host and process names."""
        logs = [log for log in logs if len(log)]
        if not logs:
            return EventLog.empty()
        host_names = sorted({h for log in logs for h in log.host_names})
        proc_names = sorted({p for log in logs for p in log.proc_names})
        hmap = {h: i for i, h in enumerate(host_names)}
        pmap = {p: i for i, p in enumerate(proc_names)}
        host = [np.array([hmap[h] for h in log.host_names], dtype=np.int64)[log.host] for log in logs]
        proc = [np.array([pmap[p] for p in log.proc_names], dtype=np.int64)[log.proc] for log in logs]
        cat = lambda f: np.concatenate([getattr(log, f) for log in logs])  # noqa: E731
        return EventLog(
            ts_ms=cat("ts_ms"),
            host=np.concatenate(host),
            pid=cat("pid"),
            proc=np.concatenate(proc),
            proto=cat("proto"),
            kind=cat("kind"),
            bytes=cat("bytes"),
            packets=cat("packets"),
            host_names=host_names,
            proc_names=proc_names,
        )

    # -- JSONL ------------------------------------------------------------

    def write_jsonl(self, fh: io.TextIOBase):
        hosts = [json.dumps(h) for h in self.host_names]
        procs = [json.dumps(p) for p in self.proc_names]
        protos = [json.dumps(p) for p in PROTOCOLS]
        kinds = [json.dumps(k) for k in KINDS]
        cols = zip(
            self.ts_ms.tolist(), self.host.tolist(), self.pid.tolist(), self.proc.tolist(),
            self.proto.tolist(), self.kind.tolist(), self.bytes.tolist(), self.packets.tolist(),
        )
        for ts, h, pid, p, pr, k, nb, npk in cols:
            fh.write(
                f'{{"ts_ms": {ts}, "host": {hosts[h]}, "pid": {pid}, "proc": {procs[p]}, '
                f'"proto": {protos[pr]}, "kind": {kinds[k]}, "bytes": {nb}, "packets": {npk}}}\n'
            )


_REQUIRED = {
    "ts_ms": int,
    "host": str,
    "pid": int,
    "proc": str,
    "proto": str,
    "kind": str,
    "bytes": int,
    "packets": int,
}


def _parse_line(text: str, lineno: int, path) -> NetworkEvent:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{lineno}: malformed JSON ({exc.msg})", path, lineno) from None
    if not isinstance(obj, dict):
        raise ParseError(f"{path}:{lineno}: expected a JSON object", path, lineno)
    for key, typ in _REQUIRED.items():
        if key not in obj:
            raise ParseError(f"{path}:{lineno}: missing field {key!r}", path, lineno)
        val = obj[key]
        if not isinstance(val, typ) or (typ is int and isinstance(val, bool)):
            raise ParseError(f"{path}:{lineno}: field {key!r} has wrong type", path, lineno)
    try:
        return NetworkEvent(**{k: obj[k] for k in _REQUIRED})
    except ValidationError as exc:
        raise ParseError(f"{path}:{lineno}: {exc}", path, lineno) from None


def read_jsonl(path) -> EventLog:
    """Read a JSONL event log; blank lines are skipped."""
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise ProcflowIOError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        events = [
            _parse_line(line, lineno, path)
            for lineno, line in enumerate(fh, start=1)
            if line.strip()
        ]
    return EventLog.from_events(events)


def write_jsonl(log: EventLog, path):
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            log.write_jsonl(fh)
    except OSError as exc:
        raise ProcflowIOError(f"cannot write {path}: {exc.strerror}") from None
