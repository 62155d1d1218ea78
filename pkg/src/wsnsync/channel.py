"""Seeded lossy-link simulation for the node->local and node->online paths.

Each link owns its generators, so the two links' decisions are independent:
reseeding one never moves the other.  Drop decisions and latency draws come
from separate child streams, so adding latency to a link cannot disturb its
loss sequence either.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .model import Packet, Timestamp

LOCAL = "local"
ONLINE = "online"


@dataclass(frozen=True)
class Lossless:
    """Every transmission is delivered."""


@dataclass(frozen=True)
class Bernoulli:
    """Independent per-send drop probability."""

    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"drop probability must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class Schedule:
    """Drop exactly the listed 1-based transmission ordinals."""

    dropped: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dropped", frozenset(self.dropped))
        if any(o < 1 for o in self.dropped):
            raise ValueError("schedule ordinals are 1-based; got an ordinal < 1")


@dataclass(frozen=True)
class Burst:
    """Two-state (good/burst) loss: enter a burst with p_enter, leave with
    p_exit, and drop with drop_in_burst while inside one."""

    p_enter: float
    p_exit: float
    drop_in_burst: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p_enter", "p_exit", "drop_in_burst"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


LossModel = Lossless | Bernoulli | Schedule | Burst


@dataclass(frozen=True)
class FixedLatency:
    seconds: float = 0.0

    def draw(self, rng: random.Random) -> float:
        return self.seconds


@dataclass(frozen=True)
class UniformLatency:
    low: float = 0.0
    high: float = 2.0

    def draw(self, rng: random.Random) -> float:
        return rng.uniform(self.low, self.high)


LatencyModel = FixedLatency | UniformLatency


@dataclass(frozen=True)
class Delivered:
    arrival: Timestamp


@dataclass(frozen=True)
class Dropped:
    pass


class Link:
    """One lossy link; identical (models, seed) means identical decisions."""

    def __init__(
        self,
        name: str,
        loss: LossModel = Lossless(),
        latency: LatencyModel = FixedLatency(0.0),
        seed: int = 0,
    ):
        self.name = name
        self.loss = loss
        self.latency = latency
        self.seed = seed
        base = random.Random(seed)
        self._loss_rng = random.Random(base.getrandbits(64))
        self._latency_rng = random.Random(base.getrandbits(64))
        self._in_burst = False
        self._next_ordinal = 1

    def transmit(self, ordinal: int, packet: Packet, send_time: float = 0.0) -> Delivered | Dropped:
        """Decide one transmission; ordinals must arrive in order 1, 2, 3, ...

        Out-of-order ordinals would silently desynchronize the seeded
        streams, so they are rejected instead.
        """
        if ordinal != self._next_ordinal:
            raise ValueError(
                f"link {self.name!r} expected ordinal {self._next_ordinal}, got {ordinal}"
            )
        self._next_ordinal += 1
        if self._drop(ordinal):
            return Dropped()
        arrival = int(send_time + self.latency.draw(self._latency_rng))
        return Delivered(arrival=arrival)

    def _drop(self, ordinal: int) -> bool:
        loss = self.loss
        if isinstance(loss, Lossless):
            return False
        if isinstance(loss, Schedule):
            return ordinal in loss.dropped
        if isinstance(loss, Bernoulli):
            return self._loss_rng.random() < loss.p
        if isinstance(loss, Burst):
            if self._in_burst:
                if self._loss_rng.random() < loss.p_exit:
                    self._in_burst = False
            else:
                if self._loss_rng.random() < loss.p_enter:
                    self._in_burst = True
            return self._in_burst and self._loss_rng.random() < loss.drop_in_burst
        raise TypeError(f"unknown loss model {loss!r}")


def transmit(link: Link, ordinal: int, packet: Packet, send_time: float = 0.0) -> Delivered | Dropped:
    return link.transmit(ordinal, packet, send_time)
