"""Append-only scenario history with interval replay.

Everything the stack sees or decides lands here: observations, health
transitions, replacement decisions, and operator actions. Records are
kept in arrival order (strictly increasing sequence numbers) but carry
their own event time, so late-arriving data is re-sorted into correct
chronology at replay time instead of at write time.

On disk the store is a directory of line-delimited JSON segments::

    segment-000001.log
    segment-000002.log
    index.json

Each line carries a CRC over its payload. The newest segment is the only
one ever written to; a crash can at worst leave a torn final line, which
is detected and truncated away on the next open. Closed segments are
immutable and any corruption there is reported, not repaired. The sidecar
index caches per-segment event-time ranges and is rebuilt by full scan
whenever it is missing or stale.
"""

from __future__ import annotations

import json
import math
import os
import zlib
from dataclasses import dataclass

from .errors import ConfigurationError, StorageError

RECORD_KINDS = ("observation", "transition", "decision", "operator-action")

_SEGMENT_PREFIX = "segment-"
_SEGMENT_SUFFIX = ".log"
_INDEX_FILE = "index.json"


@dataclass(frozen=True)
class ScenarioRecord:
    seq: int
    at: float
    kind: str
    body: dict

    def to_doc(self) -> dict:
        return {"seq": self.seq, "at": self.at, "kind": self.kind,
                "body": self.body}


def _payload(seq: int, at: float, kind: str, body: dict) -> str:
    return json.dumps({"seq": seq, "at": at, "kind": kind, "body": body},
                      sort_keys=True, separators=(",", ":"))


def _line(seq: int, at: float, kind: str, body: dict) -> str:
    payload = _payload(seq, at, kind, body)
    crc = zlib.crc32(payload.encode())
    return json.dumps({"crc": crc, "record": json.loads(payload)},
                      sort_keys=True, separators=(",", ":")) + "\n"


def _parse_line(line: str) -> ScenarioRecord:
    doc = json.loads(line)
    record = doc["record"]
    payload = _payload(record["seq"], record["at"], record["kind"],
                       record["body"])
    if zlib.crc32(payload.encode()) != doc["crc"]:
        raise ValueError("checksum mismatch")
    return ScenarioRecord(seq=record["seq"], at=record["at"],
                          kind=record["kind"], body=record["body"])


def _segment_name(number: int) -> str:
    return f"{_SEGMENT_PREFIX}{number:06d}{_SEGMENT_SUFFIX}"


class ScenarioStore:
    """Single-writer durable record log under one directory."""

    def __init__(self, directory, segment_records: int = 5000):
        if segment_records < 1:
            raise ConfigurationError("segment_records must be >= 1")
        self.directory = os.fspath(directory)
        self.segment_records = segment_records
        os.makedirs(self.directory, exist_ok=True)
        self._records: list[ScenarioRecord] = []   # arrival order mirror
        self._segments: list[dict] = []            # per-segment stats
        self._handle = None
        self._closed = False
        self._load()

    # -- startup -------------------------------------------------------------

    def _segment_files(self) -> list:
        names = [n for n in os.listdir(self.directory)
                 if n.startswith(_SEGMENT_PREFIX)
                 and n.endswith(_SEGMENT_SUFFIX)]
        return sorted(names)

    def _load(self):
        names = self._segment_files()
        for position, name in enumerate(names):
            path = os.path.join(self.directory, name)
            last = position == len(names) - 1
            count, first_at, last_at = 0, math.inf, -math.inf
            keep_bytes = 0
            with open(path, "rb") as fh:
                for raw in fh:
                    try:
                        record = _parse_line(raw.decode())
                    except (ValueError, KeyError, UnicodeDecodeError,
                            json.JSONDecodeError):
                        if last:
                            break  # torn tail from a crash; drop the rest
                        raise StorageError(
                            f"corrupt record in closed segment {name}")
                    if record.seq != len(self._records) + 1:
                        raise StorageError(
                            f"sequence gap in {name}: expected "
                            f"{len(self._records) + 1}, got {record.seq}")
                    self._records.append(record)
                    keep_bytes += len(raw)
                    count += 1
                    first_at = min(first_at, record.at)
                    last_at = max(last_at, record.at)
                else:
                    keep_bytes = None  # clean file, nothing to truncate
            if last and keep_bytes is not None:
                with open(path, "ab") as fh:
                    fh.truncate(keep_bytes)
            self._segments.append({
                "file": name, "count": count,
                "min-at": None if count == 0 else first_at,
                "max-at": None if count == 0 else last_at,
                "closed": not last,
            })
        if not self._segments:
            self._segments.append({"file": _segment_name(1), "count": 0,
                                   "min-at": None, "max-at": None,
                                   "closed": False})
        open_name = self._segments[-1]["file"]
        self._handle = open(os.path.join(self.directory, open_name), "a",
                            encoding="utf-8")
        self._write_index()

    def _write_index(self):
        path = os.path.join(self.directory, _INDEX_FILE)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"segments": self._segments,
                       "next-seq": len(self._records) + 1}, fh, indent=2)
        os.replace(tmp, path)

    # -- writing ---------------------------------------------------------------

    @property
    def next_seq(self) -> int:
        return len(self._records) + 1

    def __len__(self) -> int:
        return len(self._records)

    def append(self, kind: str, at: float, body: dict) -> int:
        """Durably append one record; returns its sequence number."""
        if self._closed:
            raise StorageError("store is closed")
        if kind not in RECORD_KINDS:
            raise StorageError(f"unknown record kind {kind!r}")
        at = float(at)
        if math.isnan(at) or math.isinf(at):
            raise StorageError(f"event time must be finite, got {at!r}")
        seq = self.next_seq
        record = ScenarioRecord(seq=seq, at=at, kind=kind, body=body)
        self._handle.write(_line(seq, at, kind, body))
        self._handle.flush()
        self._records.append(record)
        stats = self._segments[-1]
        stats["count"] += 1
        stats["min-at"] = at if stats["min-at"] is None \
            else min(stats["min-at"], at)
        stats["max-at"] = at if stats["max-at"] is None \
            else max(stats["max-at"], at)
        if stats["count"] >= self.segment_records:
            self.close_segment()
        return seq

    def close_segment(self):
        """Seal the open segment and start a fresh one."""
        if self._closed:
            raise StorageError("store is closed")
        self._handle.flush()
        os.fsync(self._handle.fileno())
        self._handle.close()
        self._segments[-1]["closed"] = True
        number = len(self._segments) + 1
        self._segments.append({"file": _segment_name(number), "count": 0,
                               "min-at": None, "max-at": None,
                               "closed": False})
        self._handle = open(
            os.path.join(self.directory, self._segments[-1]["file"]),
            "a", encoding="utf-8")
        self._write_index()

    def close(self):
        if self._closed:
            return
        self._handle.flush()
        os.fsync(self._handle.fileno())
        self._handle.close()
        self._closed = True
        self._write_index()

    # -- reading ---------------------------------------------------------------

    def replay(self, t0: float = -math.inf, t1: float = math.inf,
               kind: str | None = None,
               data_type: str | None = None) -> list:
        """Records with event-time in [t0, t1], re-sorted into chronology.

        The output order is (event-time, sequence-number); arrival order
        does not matter. Optional filters narrow to one record kind or
        one data type (matched against the record body).
        """
        if t0 > t1:
            raise ConfigurationError(f"bad interval: {t0} > {t1}")
        if kind is not None and kind not in RECORD_KINDS:
            raise ConfigurationError(f"unknown record kind {kind!r}")
        snapshot = self._records[:]
        out = [record for record in snapshot
               if t0 <= record.at <= t1
               and (kind is None or record.kind == kind)
               and (data_type is None
                    or record.body.get("data-type") == data_type)]
        out.sort(key=lambda record: (record.at, record.seq))
        return out

    def availability_timeline(self, t0: float, t1: float,
                              data_type: str | None = None) -> dict:
        """Per-source spans (state, from, to) partitioning [t0, t1].

        Derived purely from transition records. Before a source's first
        transition its state reads "unknown".
        """
        if t0 > t1:
            raise ConfigurationError(f"bad interval: {t0} > {t1}")
        transitions = self.replay(kind="transition", data_type=data_type)
        by_source: dict = {}
        for record in transitions:
            by_source.setdefault(record.body["source-id"], []).append(record)
        timeline = {}
        for source_id, records in sorted(by_source.items()):
            state = "unknown"
            for record in records:
                if record.at <= t0:
                    state = record.body["to"]
                else:
                    break
            spans = []
            pointer = t0
            for record in records:
                if not t0 < record.at <= t1:
                    continue
                spans.append((state, pointer, record.at))
                state = record.body["to"]
                pointer = record.at
            spans.append((state, pointer, t1))
            timeline[source_id] = spans
        return timeline
