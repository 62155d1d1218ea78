"""Sensor-node state machine: boot, Wi-Fi retry, durable record IDs, paced sends.

The counter emulates the board's EEPROM: a single non-negative integer that
survives reboots.  The incremented ID is persisted *before* the packet is
released, so a crash between persist and send costs a gap in the ID sequence
but never a reuse -- gaps are exactly what the reconciler already tolerates.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .model import DEFAULT_NODE_ID, Packet, SensorSample, make_packet

PERSISTENT = "persistent"
NAIVE_RESET = "naive-reset"
COUNTER_MODES = (PERSISTENT, NAIVE_RESET)

BOOTING = "booting"
CONNECTING_WIFI = "connecting-wifi"
RUNNING = "running"


class StorageError(Exception):
    """Counter storage is unreadable, corrupt, or a write failed."""


class CounterStore(Protocol):
    def load(self) -> int: ...

    def persist(self, value: int) -> None: ...


class FileCounter:
    """Durable counter: one decimal integer in a UTF-8 text file.

    Writes go to a temp file in the same directory and are moved into place
    with ``os.replace``, so a crash leaves either the old or the new value,
    never a torn one.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def load(self) -> int:
        if not self.path.exists():
            return 0  # first boot
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot read counter file {self.path}: {exc}") from exc
        stripped = text.strip()
        if not stripped.isdigit():
            raise StorageError(
                f"corrupt counter file {self.path}: {stripped!r} is not a "
                "non-negative integer"
            )
        return int(stripped)

    def persist(self, value: int) -> None:
        tmp = self.path.with_name(self.path.name + ".tmp")
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(f"{int(value)}\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
        except OSError as exc:
            raise StorageError(f"cannot persist counter to {self.path}: {exc}") from exc


class MemoryCounter:
    """In-memory counter with the same contract; keeps its value across
    simulated reboots because the object itself survives them."""

    def __init__(self, value: int = 0):
        self.value = int(value)

    def load(self) -> int:
        return self.value

    def persist(self, value: int) -> None:
        self.value = int(value)


# --- response-delay models -------------------------------------------------
#
# The gap between sends is send_interval plus a model-dependent "server
# response" delay.  `ordinal` is the 1-based count of packets sent so far.


@dataclass(frozen=True)
class NoDelay:
    def extra_seconds(self, ordinal: int, interval: float, rng: random.Random) -> float:
        return 0.0


@dataclass(frozen=True)
class UniformDelay:
    low: float = 0.0
    high: float = 5.0

    def extra_seconds(self, ordinal: int, interval: float, rng: random.Random) -> float:
        return rng.uniform(self.low, self.high)


@dataclass(frozen=True)
class PacedDelay:
    """Deterministic delays that land exactly ``count`` sends in ``over_seconds``.

    Send k happens at ``k * over_seconds // count``, so consecutive gaps
    differ by at most one second and the extra delay over the nominal
    interval stays in the "few seconds" range.
    """

    count: int
    over_seconds: int

    def send_time(self, index: int) -> int:
        """Scheduled time of the (0-based) ``index``-th send."""
        return index * self.over_seconds // self.count

    def extra_seconds(self, ordinal: int, interval: float, rng: random.Random) -> float:
        gap = self.send_time(ordinal) - self.send_time(ordinal - 1)
        return float(gap) - interval


DelayModel = NoDelay | UniformDelay | PacedDelay


@dataclass(frozen=True)
class NodeConfig:
    node_id: str = DEFAULT_NODE_ID
    send_interval: float = 10.0
    response_delay: DelayModel = NoDelay()
    counter_mode: str = PERSISTENT

    def __post_init__(self) -> None:
        if self.send_interval <= 0:
            raise ValueError(f"send_interval must be > 0, got {self.send_interval}")
        if self.counter_mode not in COUNTER_MODES:
            raise ValueError(
                f"counter_mode must be one of {COUNTER_MODES}, got {self.counter_mode!r}"
            )


@dataclass
class NodeState:
    """Mutable-by-replacement node state; the counter store and RNG are shared
    by reference across the states of one run."""

    config: NodeConfig
    counter_store: CounterStore
    cached_id: int
    phase: str
    clock: float
    next_send_at: float
    emitted: int
    rng: random.Random = field(repr=False)


def always_up(t: float) -> bool:
    return True


def up_after(start: float) -> Callable[[float], bool]:
    return lambda t: t >= start


def boot(
    config: NodeConfig,
    counter_store: CounterStore,
    *,
    at: float = 0.0,
    rng: random.Random | None = None,
) -> NodeState:
    """(Re)boot the node: read the durable record ID and start connecting.

    In naive-reset mode the stored value is ignored and the counter restarts
    at zero -- the defect this artifact exists to expose.
    """
    stored = counter_store.load()  # StorageError if the file is corrupt
    cached = stored if config.counter_mode == PERSISTENT else 0
    return NodeState(
        config=config,
        counter_store=counter_store,
        cached_id=cached,
        phase=CONNECTING_WIFI,
        clock=at,
        next_send_at=at,
        emitted=0,
        rng=rng if rng is not None else random.Random(0),
    )


def connect_wifi(
    state: NodeState,
    link_up: Callable[[float], bool] = always_up,
    *,
    give_up_at: float | None = None,
) -> NodeState:
    """Retry once per simulated second until the link reports up.

    Retries never abort on their own; ``give_up_at`` (normally the scenario
    duration) bounds the loop and leaves the node stuck in the connecting
    phase, in which it emits nothing.
    """
    if state.phase != CONNECTING_WIFI:
        raise ValueError(f"connect_wifi requires phase {CONNECTING_WIFI!r}, got {state.phase!r}")
    t = state.clock
    while not link_up(t):
        t += 1.0
        if give_up_at is not None and t >= give_up_at:
            return replace(state, clock=t)
    return replace(state, phase=RUNNING, clock=t, next_send_at=max(t, state.next_send_at))


def next_packet(
    state: NodeState,
    sample_source: Callable[[], SensorSample],
    now: float,
) -> tuple[Packet, NodeState]:
    """Assign the next record ID, persist it, and release one packet.

    The incremented ID hits storage before the packet is released; if
    persisting fails no packet goes out.
    """
    if state.phase != RUNNING:
        raise ValueError(f"next_packet requires phase {RUNNING!r}, got {state.phase!r}")
    if now < state.next_send_at:
        raise ValueError(f"now={now} is before next_send_at={state.next_send_at}")
    record_id = state.cached_id + 1
    state.counter_store.persist(record_id)  # StorageError propagates, packet withheld
    packet = make_packet(state.config.node_id, record_id, sample_source(), int(now))
    emitted = state.emitted + 1
    extra = state.config.response_delay.extra_seconds(
        emitted, state.config.send_interval, state.rng
    )
    new_state = replace(
        state,
        cached_id=record_id,
        clock=now,
        next_send_at=now + state.config.send_interval + extra,
        emitted=emitted,
    )
    return packet, new_state


def dht22_sample_source(seed: int) -> Callable[[], SensorSample]:
    """Plausible greenhouse readings, deterministic per seed."""
    rng = random.Random(seed)

    def sample() -> SensorSample:
        return SensorSample(rng.uniform(18.0, 36.0), rng.uniform(30.0, 75.0))

    return sample


def run_node(
    config: NodeConfig,
    duration: float,
    seed: int,
    *,
    counter_store: CounterStore | None = None,
    reboot_times: Sequence[float] = (),
    link_up: Callable[[float], bool] = always_up,
    sample_source: Callable[[], SensorSample] | None = None,
) -> list[tuple[Packet, float]]:
    """Drive the node for ``duration`` simulated seconds; returns the ordered
    (packet, emit_time) list.

    Deterministic for a fixed seed.  A reboot interrupts the wait for the
    next send; the node resumes sending as soon as it reconnects, but never
    at or before its previous emission instant.
    """
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    counter = counter_store if counter_store is not None else MemoryCounter()
    base = random.Random(seed)
    sample = sample_source if sample_source is not None else dht22_sample_source(
        base.getrandbits(64)
    )
    delay_rng = random.Random(base.getrandbits(64))

    reboots = sorted(t for t in reboot_times if 0.0 < t < duration)
    pending = 0
    out: list[tuple[Packet, float]] = []
    last_emit = -1.0

    state = boot(config, counter, rng=delay_rng)
    state = connect_wifi(state, link_up, give_up_at=duration)
    while state.phase == RUNNING and state.next_send_at < duration:
        if pending < len(reboots) and reboots[pending] < state.next_send_at:
            at = reboots[pending]
            pending += 1
            state = boot(config, counter, at=at, rng=delay_rng)
            state = connect_wifi(state, link_up, give_up_at=duration)
            if state.phase == RUNNING and state.next_send_at <= last_emit:
                # resuming faster than 1 Hz would reorder emit times
                state = replace(state, next_send_at=last_emit + 1.0)
            continue
        emit_at = state.next_send_at
        packet, state = next_packet(state, sample, emit_at)
        out.append((packet, emit_at))
        last_emit = emit_at
    return out
