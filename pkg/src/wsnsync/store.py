"""Server-side packet store: ID-keyed with a timestamp index, JSONL durable.

Export format is one JSON object per line with the fixed field order
``node_id, record_id, temperature, humidity, stamped_at``, sorted by
(node_id, record_id).  Equal content always exports byte-identically, which
is what makes golden-file tests and re-runnable reconciliation possible.
A CSV mirror with the same columns exists for spreadsheet inspection.
"""

from __future__ import annotations

import csv
import enum
import json
from pathlib import Path
from typing import Iterator

from .model import (
    Packet,
    RecordId,
    SensorSample,
    Timestamp,
    make_packet,
    packet_identity,
)

JSONL_FIELDS = ("node_id", "record_id", "temperature", "humidity", "stamped_at")


class ConflictError(Exception):
    """One identity, two different payloads: a reused record ID reached a store."""


class FormatError(ValueError):
    """A store file line could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class InsertOutcome(enum.Enum):
    INSERTED = "inserted"
    DUPLICATE_IGNORED = "duplicate"


class ServerStore:
    """ID-keyed packet store; two instances model the local and online servers."""

    def __init__(self, kind: str = "local"):
        self.kind = kind
        self._records: dict[tuple[str, RecordId], Packet] = {}
        self._ts_index: dict[Timestamp, list[tuple[str, RecordId]]] = {}

    def __len__(self) -> int:
        return len(self._records)

    def insert(self, p: Packet) -> InsertOutcome:
        """Idempotent insert: a byte-equal re-send is ignored, a payload
        mismatch under an existing identity raises ConflictError."""
        key = packet_identity(p)
        existing = self._records.get(key)
        if existing is not None:
            if existing == p:
                return InsertOutcome.DUPLICATE_IGNORED
            raise ConflictError(
                f"store {self.kind!r}: identity {key} already holds a different "
                f"payload (stored {existing}, offered {p})"
            )
        self._records[key] = p
        self._ts_index.setdefault(p.stamped_at, []).append(key)
        return InsertOutcome.INSERTED

    def ids(self, node_id: str) -> list[RecordId]:
        """Ascending record IDs present for one node."""
        return sorted(rid for (nid, rid) in self._records if nid == node_id)

    def nodes(self) -> list[str]:
        return sorted({nid for (nid, _) in self._records})

    def get(self, node_id: str, record_id: RecordId) -> Packet:
        return self._records[(node_id, record_id)]

    def packets(self) -> Iterator[Packet]:
        """Packets in (node_id, record_id) order."""
        for key in sorted(self._records):
            yield self._records[key]

    def identities_at(self, stamped_at: Timestamp) -> list[tuple[str, RecordId]]:
        return list(self._ts_index.get(stamped_at, []))

    def same_records(self, other: "ServerStore") -> bool:
        """Record equality, ignoring the store kind."""
        return self._records == other._records

    def audit(self) -> None:
        """Check that the timestamp index is exactly the inverse of the records."""
        rebuilt: dict[Timestamp, list[tuple[str, RecordId]]] = {}
        for key, p in self._records.items():
            rebuilt.setdefault(p.stamped_at, []).append(key)
        indexed = {ts: sorted(keys) for ts, keys in self._ts_index.items() if keys}
        expected = {ts: sorted(keys) for ts, keys in rebuilt.items()}
        if indexed != expected:
            raise AssertionError(
                f"store {self.kind!r}: timestamp index out of sync with records"
            )


def _packet_to_obj(p: Packet) -> dict:
    return {
        "node_id": p.node_id,
        "record_id": p.record_id,
        "temperature": p.sample.temperature,
        "humidity": p.sample.humidity,
        "stamped_at": p.stamped_at,
    }


def encode_line(p: Packet) -> str:
    """One packet as its canonical JSONL line (no trailing newline)."""
    return json.dumps(_packet_to_obj(p), separators=(",", ":"))


def decode_line(line: str, line_no: int | None = None) -> Packet:
    """Parse one JSONL line back into a validated packet."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", line_no) from exc
    if not isinstance(obj, dict):
        raise FormatError("expected a JSON object", line_no)
    missing = [f for f in JSONL_FIELDS if f not in obj]
    if missing:
        raise FormatError(f"missing fields {missing}", line_no)
    try:
        sample = SensorSample(float(obj["temperature"]), float(obj["humidity"]))
        return make_packet(
            str(obj["node_id"]), obj["record_id"], sample, obj["stamped_at"]
        )
    except (ValueError, TypeError) as exc:
        raise FormatError(str(exc), line_no) from exc


def export_store(store: ServerStore, path: str | Path) -> int:
    """Write the store as sorted JSONL; returns the record count."""
    path = Path(path)
    lines = [encode_line(p) for p in store.packets()]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)


def import_store(path: str | Path, kind: str | None = None) -> ServerStore:
    """Load a JSONL export; FormatError carries the offending line number."""
    path = Path(path)
    store = ServerStore(kind if kind is not None else path.stem)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            store.insert(decode_line(line, line_no))
    return store


def export_csv(store: ServerStore, path: str | Path) -> int:
    """Spreadsheet mirror of the JSONL export; same columns, same order."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(JSONL_FIELDS)
        n = 0
        for p in store.packets():
            writer.writerow(
                [
                    p.node_id,
                    p.record_id,
                    f"{p.sample.temperature:.1f}",
                    f"{p.sample.humidity:.1f}",
                    p.stamped_at,
                ]
            )
            n += 1
    return n
