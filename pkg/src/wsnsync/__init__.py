"""Sensor-node data sync experiments: a record-ID counter that survives
reboots, dual writes to a local and an online store over lossy links, and a
set-difference reconciler that repairs whatever either store managed to keep.
"""

from .channel import (
    Bernoulli,
    Burst,
    Delivered,
    Dropped,
    FixedLatency,
    Link,
    Lossless,
    Schedule,
    UniformLatency,
)
from .ingest import IngestClient, IngestServer, packet_to_form, parse_ingest_form
from .model import (
    IdError,
    Packet,
    RangeError,
    SensorSample,
    make_packet,
    packet_identity,
)
from .node import (
    FileCounter,
    MemoryCounter,
    NodeConfig,
    PacedDelay,
    StorageError,
    dht22_sample_source,
    run_node,
)
from .reconcile import (
    SyncPlan,
    SyncReport,
    diff,
    apply_plan,
    id_merge,
    reconcile_stores,
    sync_rate,
    timestamp_merge_baseline,
)
from .simulate import (
    ConfigError,
    LinkSpec,
    RunMetrics,
    RunResult,
    ScenarioConfig,
    collision_scenario,
    load_scenario,
    greenhouse_scenario,
    run,
    write_outputs,
)
from .store import (
    ConflictError,
    FormatError,
    InsertOutcome,
    ServerStore,
    export_store,
    import_store,
)

__version__ = "0.1.0"

__all__ = [
    "Bernoulli",
    "Burst",
    "ConfigError",
    "ConflictError",
    "Delivered",
    "Dropped",
    "FileCounter",
    "FixedLatency",
    "FormatError",
    "IdError",
    "IngestClient",
    "IngestServer",
    "InsertOutcome",
    "Link",
    "LinkSpec",
    "Lossless",
    "MemoryCounter",
    "NodeConfig",
    "PacedDelay",
    "Packet",
    "RangeError",
    "RunMetrics",
    "RunResult",
    "ScenarioConfig",
    "Schedule",
    "SensorSample",
    "ServerStore",
    "StorageError",
    "SyncPlan",
    "SyncReport",
    "UniformLatency",
    "apply_plan",
    "collision_scenario",
    "dht22_sample_source",
    "diff",
    "export_store",
    "id_merge",
    "import_store",
    "load_scenario",
    "make_packet",
    "packet_identity",
    "packet_to_form",
    "greenhouse_scenario",
    "parse_ingest_form",
    "reconcile_stores",
    "run",
    "run_node",
    "sync_rate",
    "timestamp_merge_baseline",
    "write_outputs",
]
