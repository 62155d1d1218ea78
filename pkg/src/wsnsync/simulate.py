"""Scenario-driven experiment runner.

Wires one node to the two servers across independent lossy links, runs the
simulated clock, and writes everything a replay needs: both stores, the
generator manifest, the run metrics, and the figure CSVs.  Time is
event-driven; nothing sleeps.

Scenarios are TOML files (see ``load_scenario``), and two presets ship with
the package: ``greenhouse`` (an 8-hour dual-write field day) and
``collision523`` (a short variant tuned so the timestamp-keyed merge sees
exactly 523 colliding rows).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ImportError:  # 3.10
    import tomli as tomllib

from .channel import (
    LOCAL,
    ONLINE,
    Bernoulli,
    Burst,
    Delivered,
    FixedLatency,
    LatencyModel,
    Link,
    Lossless,
    LossModel,
    Schedule,
    UniformLatency,
)
from .ingest import IngestClient, IngestServer, packet_to_form
from .node import (
    FileCounter,
    MemoryCounter,
    NodeConfig,
    NoDelay,
    PacedDelay,
    UniformDelay,
    run_node,
    up_after,
)
from .reconcile import ids_digest
from .store import ServerStore, export_csv, export_store

DIRECT = "direct"
LOOPBACK = "loopback"
TRANSPORTS = (DIRECT, LOOPBACK)

FIGURE_FILES = (
    "transmissions_hourly.csv",
    "loss_hourly.csv",
    "redundancy_comparison.csv",
    "recovery_hourly.csv",
)
OUTPUT_FILES = ("manifest.json", "metrics.json", "local.jsonl", "online.jsonl") + FIGURE_FILES


class ConfigError(ValueError):
    """The scenario does not describe a runnable experiment."""


@dataclass(frozen=True)
class LinkSpec:
    """Enough to rebuild one Link deterministically."""

    loss: LossModel = Lossless()
    latency: LatencyModel = FixedLatency(0.0)
    seed: int = 0

    def build(self, name: str) -> Link:
        return Link(name, loss=self.loss, latency=self.latency, seed=self.seed)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "adhoc"
    duration: float = 3600.0
    node: NodeConfig = NodeConfig()
    local_link: LinkSpec = LinkSpec()
    online_link: LinkSpec = LinkSpec()
    reboot_schedule: tuple[float, ...] = ()
    seed: int = 0
    transport: str = DIRECT
    counter_path: str | None = None
    wifi_up_at: float = 0.0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ConfigError(f"duration must be > 0, got {self.duration}")
        if self.transport not in TRANSPORTS:
            raise ConfigError(f"transport must be one of {TRANSPORTS}, got {self.transport!r}")
        object.__setattr__(self, "reboot_schedule", tuple(self.reboot_schedule))
        for t in self.reboot_schedule:
            if not 0.0 < t < self.duration:
                raise ConfigError(f"reboot time {t} is outside (0, {self.duration})")
        if self.wifi_up_at < 0:
            raise ConfigError(f"wifi_up_at must be >= 0, got {self.wifi_up_at}")


@dataclass(frozen=True)
class HourlyRow:
    hour: int
    generated: int = 0
    delivered_local: int = 0
    delivered_online: int = 0
    lost_local: int = 0
    lost_online: int = 0
    lost_both: int = 0


@dataclass(frozen=True)
class RunMetrics:
    scenario: str
    generated: int
    delivered_local: int
    delivered_online: int
    lost_local: int
    lost_online: int
    lost_both: int
    hourly: tuple[HourlyRow, ...]
    manifest: dict

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "generated": self.generated,
            "delivered_local": self.delivered_local,
            "delivered_online": self.delivered_online,
            "lost_local": self.lost_local,
            "lost_online": self.lost_online,
            "lost_both": self.lost_both,
            "hourly": [asdict(row) for row in self.hourly],
            "manifest": self.manifest,
        }


@dataclass
class RunResult:
    metrics: RunMetrics
    local: ServerStore
    online: ServerStore
    request_log: list[dict]

    def __iter__(self):
        # the common unpacking is (metrics, local, online)
        return iter((self.metrics, self.local, self.online))


def _hour_count(duration: float) -> int:
    return max(1, math.ceil(duration / 3600))


def _check_schedule_bounds(scenario: ScenarioConfig, generated: int) -> None:
    for label, spec in ((LOCAL, scenario.local_link), (ONLINE, scenario.online_link)):
        loss = spec.loss
        if isinstance(loss, Schedule) and loss.dropped and max(loss.dropped) > generated:
            raise ConfigError(
                f"{label} link schedule drops ordinal {max(loss.dropped)} but the "
                f"run only generated {generated} packets"
            )


def run(scenario: ScenarioConfig) -> RunResult:
    """Run one scenario end to end.  Deterministic per config (seed included).

    Direct transport inserts into in-process stores; loopback pushes every
    delivered packet through a real HTTP round trip and must yield
    record-equal stores.
    """
    counter = FileCounter(scenario.counter_path) if scenario.counter_path else MemoryCounter()
    emissions = run_node(
        scenario.node,
        scenario.duration,
        scenario.seed,
        counter_store=counter,
        reboot_times=scenario.reboot_schedule,
        link_up=up_after(scenario.wifi_up_at),
    )
    _check_schedule_bounds(scenario, len(emissions))

    local_link = scenario.local_link.build(LOCAL)
    online_link = scenario.online_link.build(ONLINE)
    local = ServerStore(LOCAL)
    online = ServerStore(ONLINE)
    request_log: list[dict] = []

    servers = clients = None
    if scenario.transport == LOOPBACK:
        servers = (IngestServer(local).start(), IngestServer(online).start())
        clients = tuple(IngestClient(s.base_url) for s in servers)

    hours = [dict(generated=0, delivered_local=0, delivered_online=0,
                  lost_local=0, lost_online=0, lost_both=0)
             for _ in range(_hour_count(scenario.duration))]
    delivered = {LOCAL: 0, ONLINE: 0}
    try:
        for ordinal, (packet, emit_at) in enumerate(emissions, start=1):
            hour = hours[int(emit_at) // 3600]
            hour["generated"] += 1
            got_through = {}
            for idx, (link, store) in enumerate(((local_link, local), (online_link, online))):
                outcome = link.transmit(ordinal, packet, emit_at)
                ok = isinstance(outcome, Delivered)
                got_through[link.name] = ok
                if ok:
                    delivered[link.name] += 1
                    hour[f"delivered_{link.name}"] += 1
                    body = packet_to_form(packet)
                    if clients is not None:
                        status, reply = clients[idx].post_form(body)
                        if status != 200:
                            raise RuntimeError(
                                f"loopback {link.name} refused ordinal {ordinal}: "
                                f"{status} {reply}"
                            )
                    else:
                        store.insert(packet)
                    request_log.append(
                        {"link": link.name, "ordinal": ordinal, "body": body}
                    )
                else:
                    hour[f"lost_{link.name}"] += 1
            if not got_through[LOCAL] and not got_through[ONLINE]:
                hour["lost_both"] += 1
    finally:
        if servers is not None:
            for server in servers:
                server.stop()

    generated = len(emissions)
    emitted_ids = [p.record_id for p, _ in emissions]
    manifest = {
        "nodes": {
            scenario.node.node_id: {
                "generated": generated,
                "max_record_id": max(emitted_ids, default=0),
                "emitted_ids_sha256": ids_digest(emitted_ids),
            }
        }
    }
    metrics = RunMetrics(
        scenario=scenario.name,
        generated=generated,
        delivered_local=delivered[LOCAL],
        delivered_online=delivered[ONLINE],
        lost_local=generated - delivered[LOCAL],
        lost_online=generated - delivered[ONLINE],
        lost_both=sum(h["lost_both"] for h in hours),
        hourly=tuple(HourlyRow(hour=i, **h) for i, h in enumerate(hours)),
        manifest=manifest,
    )
    return RunResult(metrics=metrics, local=local, online=online, request_log=request_log)


# ---------------------------------------------------------------------------
# presets

FIELD_GENERATED = 2364
FIELD_DURATION = 28800  # one 08:00-to-16:00 shift
FIELD_ONLINE_DROPS = 174
FIELD_LOCAL_EXTRA_DROPS = (250, 700, 1150, 1600, 2050)  # lost on the local link only
FIELD_OVERLAP_PICKS = (43, 86, 130)  # indices into the online drop list, lost on both


def _field_online_drops() -> tuple[int, ...]:
    # 174 drop ordinals spread evenly across the run, ~22 per hour
    return tuple(sorted({k * FIELD_GENERATED // FIELD_ONLINE_DROPS
                         for k in range(1, FIELD_ONLINE_DROPS + 1)}))


def _field_local_drops() -> tuple[int, ...]:
    online = _field_online_drops()
    overlap = [online[i] for i in FIELD_OVERLAP_PICKS]
    return tuple(sorted(set(FIELD_LOCAL_EXTRA_DROPS) | set(overlap)))


def greenhouse_scenario() -> ScenarioConfig:
    """The bundled 8-hour field day: 2364 packets, 8 local and 174 online
    drops with exactly 3 ordinals lost on both links."""
    return ScenarioConfig(
        name="greenhouse",
        duration=FIELD_DURATION,
        node=NodeConfig(
            node_id="n1",
            send_interval=10.0,
            response_delay=PacedDelay(count=FIELD_GENERATED, over_seconds=FIELD_DURATION),
            counter_mode="persistent",
        ),
        local_link=LinkSpec(
            loss=Schedule(frozenset(_field_local_drops())),
            latency=FixedLatency(0.0),
            seed=11,
        ),
        online_link=LinkSpec(
            loss=Schedule(frozenset(_field_online_drops())),
            latency=UniformLatency(0.0, 2.0),
            seed=12,
        ),
        seed=20240810,
        transport=DIRECT,
    )


def collision_scenario() -> ScenarioConfig:
    """Two sends per second for 131 s, one online drop at the tail.

    Every integer second then carries 4 merged rows (2 per store) except the
    last, which carries 3; all 523 rows collide under the timestamp merge.
    """
    return ScenarioConfig(
        name="collision523",
        duration=131,
        node=NodeConfig(node_id="n1", send_interval=0.5),
        local_link=LinkSpec(loss=Lossless(), seed=21),
        online_link=LinkSpec(loss=Schedule(frozenset({262})), seed=22),
        seed=20240811,
        transport=DIRECT,
    )


PRESETS = {
    "greenhouse": greenhouse_scenario,
    "collision523": collision_scenario,
}


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; bundled: {sorted(PRESETS)}")
    return Path(str(resources.files("wsnsync.presets") / f"{name}.toml"))


# ---------------------------------------------------------------------------
# scenario files

_LOSS_KINDS = ("lossless", "bernoulli", "schedule", "burst")
_LATENCY_KINDS = ("fixed", "uniform")
_DELAY_KINDS = ("none", "uniform", "paced")


def _loss_from(table: dict, where: str) -> LossModel:
    kind = table.get("kind", "lossless")
    try:
        if kind == "lossless":
            return Lossless()
        if kind == "bernoulli":
            return Bernoulli(p=float(table["p"]))
        if kind == "schedule":
            return Schedule(frozenset(int(o) for o in table["dropped"]))
        if kind == "burst":
            return Burst(
                p_enter=float(table["p_enter"]),
                p_exit=float(table["p_exit"]),
                drop_in_burst=float(table.get("drop_in_burst", 1.0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad {kind!r} loss table: {exc}") from exc
    raise ConfigError(f"{where}: loss kind must be one of {_LOSS_KINDS}, got {kind!r}")


def _latency_from(table: dict, where: str) -> LatencyModel:
    kind = table.get("kind", "fixed")
    try:
        if kind == "fixed":
            return FixedLatency(seconds=float(table.get("seconds", 0.0)))
        if kind == "uniform":
            return UniformLatency(low=float(table["low"]), high=float(table["high"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad {kind!r} latency table: {exc}") from exc
    raise ConfigError(f"{where}: latency kind must be one of {_LATENCY_KINDS}, got {kind!r}")


def _delay_from(table: dict, where: str):
    kind = table.get("kind", "none")
    try:
        if kind == "none":
            return NoDelay()
        if kind == "uniform":
            return UniformDelay(low=float(table["low"]), high=float(table["high"]))
        if kind == "paced":
            return PacedDelay(count=int(table["count"]), over_seconds=int(table["over_seconds"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad {kind!r} delay table: {exc}") from exc
    raise ConfigError(f"{where}: delay kind must be one of {_DELAY_KINDS}, got {kind!r}")


def _link_from(table: dict, where: str) -> LinkSpec:
    return LinkSpec(
        loss=_loss_from(table.get("loss", {}), where),
        latency=_latency_from(table.get("latency", {}), where),
        seed=int(table.get("seed", 0)),
    )


def scenario_from_dict(data: dict, fallback_name: str = "adhoc") -> ScenarioConfig:
    run_t = data.get("run", {})
    node_t = data.get("node", {})
    try:
        node = NodeConfig(
            node_id=str(node_t.get("node_id", "n1")),
            send_interval=float(node_t.get("send_interval", 10.0)),
            response_delay=_delay_from(node_t.get("delay", {}), "node.delay"),
            counter_mode=str(node_t.get("counter_mode", "persistent")),
        )
        return ScenarioConfig(
            name=str(data.get("name", fallback_name)),
            duration=run_t.get("duration", 3600),
            node=node,
            local_link=_link_from(data.get("local_link", {}), "local_link"),
            online_link=_link_from(data.get("online_link", {}), "online_link"),
            reboot_schedule=tuple(float(t) for t in run_t.get("reboot_schedule", [])),
            seed=int(run_t.get("seed", 0)),
            transport=str(run_t.get("transport", DIRECT)),
            counter_path=run_t.get("counter_path"),
            wifi_up_at=float(run_t.get("wifi_up_at", 0.0)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario value: {exc}") from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: not valid TOML: {exc}") from exc
    return scenario_from_dict(data, fallback_name=path.stem)


# ---------------------------------------------------------------------------
# outputs


def emit_figures(
    metrics: RunMetrics, local: ServerStore, online: ServerStore, out_dir: str | Path
) -> list[Path]:
    """Write the four figure CSVs; returns the paths written.

    recovery_hourly counts, per stamped hour, the IDs only one store holds
    (what a reconcile pass would copy each way); redundancy_comparison runs
    both merge baselines on the stores as delivered.
    """
    from .reconcile import id_merge, timestamp_merge_baseline

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def csv(name: str, header: str, rows: list[str]) -> None:
        path = out_dir / name
        path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
        written.append(path)

    csv(
        "transmissions_hourly.csv",
        "hour,generated,delivered_local,delivered_online",
        [f"{r.hour},{r.generated},{r.delivered_local},{r.delivered_online}"
         for r in metrics.hourly],
    )
    csv(
        "loss_hourly.csv",
        "hour,lost_local,lost_online",
        [f"{r.hour},{r.lost_local},{r.lost_online}" for r in metrics.hourly],
    )

    ts_merged, ts_dups = timestamp_merge_baseline(local, online)
    id_merged, id_dups = id_merge(local, online)
    csv(
        "redundancy_comparison.csv",
        "merge_key,merged_rows,duplicate_rows",
        [f"timestamp,{ts_merged},{ts_dups}", f"record_id,{id_merged},{id_dups}"],
    )

    n_hours = len(metrics.hourly)
    to_local = [0] * n_hours
    to_online = [0] * n_hours
    for node_id in sorted(set(local.nodes()) | set(online.nodes())):
        local_ids = set(local.ids(node_id))
        online_ids = set(online.ids(node_id))
        for rid in local_ids - online_ids:
            to_online[local.get(node_id, rid).stamped_at // 3600] += 1
        for rid in online_ids - local_ids:
            to_local[online.get(node_id, rid).stamped_at // 3600] += 1
    csv(
        "recovery_hourly.csv",
        "hour,to_local,to_online",
        [f"{h},{to_local[h]},{to_online[h]}" for h in range(n_hours)],
    )
    return written


def write_outputs(
    result: RunResult,
    out_dir: str | Path,
    csv_mirror: bool = False,
    request_log: bool = False,
) -> list[Path]:
    """Write the fixed output set (see OUTPUT_FILES) plus any opt-ins.

    Byte-identical across runs of an equal scenario.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps(result.metrics.manifest, indent=2) + "\n", encoding="utf-8"
    )
    written.append(manifest_path)

    metrics_path = out_dir / "metrics.json"
    metrics_path.write_text(
        json.dumps(result.metrics.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    written.append(metrics_path)

    for store, name in ((result.local, "local"), (result.online, "online")):
        path = out_dir / f"{name}.jsonl"
        export_store(store, path)
        written.append(path)
        if csv_mirror:
            mirror = out_dir / f"{name}.csv"
            export_csv(store, mirror)
            written.append(mirror)

    written.extend(emit_figures(result.metrics, result.local, result.online, out_dir))

    if request_log:
        log_path = out_dir / "request_log.jsonl"
        with open(log_path, "w", encoding="utf-8") as fh:
            for entry in result.request_log:
                fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
        written.append(log_path)
    return written
