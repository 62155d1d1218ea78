"""Packet, record-ID and timestamp vocabulary shared by every other module.

A record ID is a plain non-negative ``int``; 0 is the reserved "counter never
advanced" state, so every transmitted packet carries an ID >= 1.  Timestamps
are plain ``int`` seconds since the scenario epoch -- second resolution only,
which is why two packets can legitimately share a timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass

# Measurement envelope of the DHT22 sensor.
TEMP_MIN_C = -40.0
TEMP_MAX_C = 80.0
HUMIDITY_MIN = 0.0
HUMIDITY_MAX = 100.0

DEFAULT_NODE_ID = "n1"

RecordId = int
Timestamp = int


class RangeError(ValueError):
    """A sensor value falls outside the DHT22 measurement envelope."""


class IdError(ValueError):
    """A record ID is invalid (IDs start at 1; 0 is the reserved unset state)."""


def _tenths(value: float) -> float:
    # The sensor reports 0.1 resolution; quantizing here keeps exports byte-stable.
    return round(float(value), 1)


@dataclass(frozen=True)
class SensorSample:
    """One temperature/humidity reading, quantized to 0.1 resolution."""

    temperature: float
    humidity: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "temperature", _tenths(self.temperature))
        object.__setattr__(self, "humidity", _tenths(self.humidity))
        if not TEMP_MIN_C <= self.temperature <= TEMP_MAX_C:
            raise RangeError(
                f"temperature {self.temperature} outside [{TEMP_MIN_C}, {TEMP_MAX_C}]"
            )
        if not HUMIDITY_MIN <= self.humidity <= HUMIDITY_MAX:
            raise RangeError(
                f"humidity {self.humidity} outside [{HUMIDITY_MIN}, {HUMIDITY_MAX}]"
            )


@dataclass(frozen=True)
class Packet:
    """One sensor reading stamped with a node-assigned record ID.

    ``(node_id, record_id)`` is the identity of a packet; any store holding
    two payloads under one identity is corrupt (see ``store.ConflictError``).
    """

    node_id: str
    record_id: RecordId
    sample: SensorSample
    stamped_at: Timestamp


def make_packet(
    node_id: str, record_id: RecordId, sample: SensorSample, stamped_at: Timestamp
) -> Packet:
    """Build a validated packet.

    Raises IdError for a record ID < 1 and RangeError for an out-of-range
    sample; a packet that fails validation must never reach a channel or
    store.
    """
    if not node_id:
        raise ValueError("node_id must be a non-empty string")
    if not isinstance(record_id, int) or isinstance(record_id, bool):
        raise IdError(f"record_id must be an integer, got {record_id!r}")
    if record_id < 1:
        raise IdError(f"record_id must be >= 1, got {record_id} (0 is reserved)")
    if not isinstance(sample, SensorSample):
        sample = SensorSample(*sample)
    if not isinstance(stamped_at, int) or isinstance(stamped_at, bool):
        raise ValueError(f"stamped_at must be integer seconds, got {stamped_at!r}")
    if stamped_at < 0:
        raise ValueError(f"stamped_at must be >= 0, got {stamped_at}")
    return Packet(node_id, record_id, sample, stamped_at)


def packet_identity(p: Packet) -> tuple[str, RecordId]:
    """The dedup key: a pure function of (node_id, record_id), never payload."""
    return (p.node_id, p.record_id)
