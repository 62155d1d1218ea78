"""Record-ID set reconciliation between the local and online stores.

The plan is pure set arithmetic on the two ID sets: whatever the local store
holds and the online store lacks gets copied out, and vice versa.  IDs below
the reference maximum held by neither store are unrecoverable holes -- no
replica ever received them, so no copy can restore them.

The reference maximum prefers the generator's manifest; without one it falls
back to the maximum ID either store has seen, which can only under-count
holes (a trailing run of fully-lost IDs is invisible).  Reports state which
reference was used.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable

from .model import RecordId, packet_identity
from .store import ConflictError, ServerStore


class MissingSourceError(Exception):
    """A planned copy references an ID its source store no longer holds."""


@dataclass(frozen=True)
class SyncPlan:
    to_online: frozenset[RecordId]
    to_local: frozenset[RecordId]
    unrecoverable: frozenset[RecordId]

    def is_noop(self) -> bool:
        """True when there is nothing to copy (holes may still exist)."""
        return not self.to_online and not self.to_local


def diff(
    local_ids: Iterable[RecordId],
    online_ids: Iterable[RecordId],
    reference_max: RecordId | None = None,
) -> SyncPlan:
    """Compare the two ID sets and plan the bidirectional recovery.

    With ``reference_max`` M (from a manifest, or max of the union when
    absent), every ID in 1..M held by neither side is an unrecoverable hole.
    """
    local = frozenset(local_ids)
    online = frozenset(online_ids)
    union = local | online
    if reference_max is None:
        reference_max = max(union, default=0)
    holes = frozenset(range(1, reference_max + 1)) - union
    return SyncPlan(
        to_online=local - online,
        to_local=online - local,
        unrecoverable=holes,
    )


def apply_plan(
    plan: SyncPlan,
    local: ServerStore,
    online: ServerStore,
    node_id: str,
) -> tuple[ServerStore, ServerStore]:
    """Copy planned packets verbatim in both directions.

    Stores are authoritative for anything either one received; the node may
    be offline, so nothing is re-requested from it.
    """
    for rid in sorted(plan.to_online):
        try:
            packet = local.get(node_id, rid)
        except KeyError:
            raise MissingSourceError(
                f"plan wants to copy ({node_id}, {rid}) to online but the "
                "local store does not hold it"
            ) from None
        online.insert(packet)
    for rid in sorted(plan.to_local):
        try:
            packet = online.get(node_id, rid)
        except KeyError:
            raise MissingSourceError(
                f"plan wants to copy ({node_id}, {rid}) to local but the "
                "online store does not hold it"
            ) from None
        local.insert(packet)
    return local, online


def plan_stores(
    local: ServerStore,
    online: ServerStore,
    reference_max: dict[str, RecordId] | None = None,
) -> dict[str, SyncPlan]:
    """Per-node plans across every node either store has seen."""
    nodes = sorted(set(local.nodes()) | set(online.nodes()))
    if reference_max:
        nodes = sorted(set(nodes) | set(reference_max))
    plans = {}
    for node_id in nodes:
        ref = reference_max.get(node_id) if reference_max else None
        plans[node_id] = diff(local.ids(node_id), online.ids(node_id), ref)
    return plans


def apply_all(
    plans: dict[str, SyncPlan], local: ServerStore, online: ServerStore
) -> tuple[ServerStore, ServerStore]:
    for node_id in sorted(plans):
        apply_plan(plans[node_id], local, online, node_id)
    return local, online


def sync_rate(synchronized: int, generated: int) -> float:
    """100 * synchronized / generated, rounded half-up to 2 decimals."""
    if generated < 1:
        raise ValueError(f"generated must be >= 1, got {generated}")
    rate = Decimal(100 * synchronized) / Decimal(generated)
    return float(rate.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def timestamp_merge_baseline(
    local: ServerStore, online: ServerStore
) -> tuple[int, int]:
    """The legacy merge, keyed on timestamp alone.

    All rows from both stores are retained; the duplicate count is the number
    of retained rows sharing a timestamp with at least one other retained row
    (a 2-row collision contributes 2).  Returns (merged rows, duplicates).
    """
    stamps: dict[int, int] = {}
    merged = 0
    for store in (local, online):
        for p in store.packets():
            stamps[p.stamped_at] = stamps.get(p.stamped_at, 0) + 1
            merged += 1
    duplicates = sum(n for n in stamps.values() if n >= 2)
    return merged, duplicates


def id_merge(local: ServerStore, online: ServerStore) -> tuple[int, int]:
    """Merge keyed on (node_id, record_id); returns (merged rows, duplicates).

    The duplicate count is computed from the merged result rather than
    assumed: identity-keyed merging retains one row per key, so it must come
    out 0 for any store pair that passes the conflict check.
    """
    merged: dict[tuple[str, RecordId], object] = {}
    for store in (local, online):
        for p in store.packets():
            key = packet_identity(p)
            existing = merged.get(key)
            if existing is not None and existing != p:
                raise ConflictError(
                    f"id merge: identity {key} carries two different payloads "
                    f"({existing} vs {p}); a reused record ID reached the stores"
                )
            merged[key] = p
    counts: dict[tuple[str, RecordId], int] = {}
    for p in merged.values():
        counts[packet_identity(p)] = counts.get(packet_identity(p), 0) + 1
    duplicates = sum(n for n in counts.values() if n >= 2)
    assert duplicates == 0, "identity-keyed merge retained two rows for one key"
    return len(merged), duplicates


REPORT_FIELDS = (
    "generated",
    "received_local",
    "received_online",
    "lost_local",
    "lost_online",
    "lost_both",
    "to_online",
    "to_local",
    "unrecoverable",
    "synchronized",
    "sync_rate_percent",
    "redundant_under_timestamp_merge",
    "redundant_under_id_merge",
    "reference",
)


@dataclass(frozen=True)
class SyncReport:
    generated: int
    received_local: int
    received_online: int
    lost_local: int
    lost_online: int
    lost_both: int
    to_online: int
    to_local: int
    unrecoverable: int
    synchronized: int
    sync_rate_percent: float
    redundant_under_timestamp_merge: int
    redundant_under_id_merge: int
    reference: str  # "manifest" or "max-id fallback (lower-bound holes)"

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def reconcile_stores(
    local: ServerStore,
    online: ServerStore,
    manifest: dict | None = None,
    apply: bool = True,
) -> tuple[SyncReport, dict[str, SyncPlan]]:
    """Plan, optionally apply, and report one reconciliation run.

    The redundancy columns describe the stores as given (before any copies),
    so the report captures what reconciliation was up against.
    """
    received_local = len(local)
    received_online = len(online)
    ts_merged, ts_dups = timestamp_merge_baseline(local, online)
    id_merged, id_dups = id_merge(local, online)

    if manifest is not None:
        nodes = manifest["nodes"]
        refs = {nid: int(info["max_record_id"]) for nid, info in nodes.items()}
        generated = sum(int(info["generated"]) for info in nodes.values())
        reference = "manifest"
    else:
        refs = None
        generated = sum(
            max(
                set(local.ids(nid)) | set(online.ids(nid)),
                default=0,
            )
            for nid in set(local.nodes()) | set(online.nodes())
        )
        reference = "max-id fallback (lower-bound holes)"

    plans = plan_stores(local, online, refs)
    if apply:
        apply_all(plans, local, online)

    lost_both = sum(len(p.unrecoverable) for p in plans.values())
    synchronized = sum(
        len(set(local.ids(nid)) | set(online.ids(nid)))
        for nid in set(local.nodes()) | set(online.nodes())
    )
    report = SyncReport(
        generated=generated,
        received_local=received_local,
        received_online=received_online,
        lost_local=generated - received_local,
        lost_online=generated - received_online,
        lost_both=lost_both,
        to_online=sum(len(p.to_online) for p in plans.values()),
        to_local=sum(len(p.to_local) for p in plans.values()),
        unrecoverable=lost_both,
        synchronized=synchronized,
        sync_rate_percent=sync_rate(synchronized, generated) if generated else 100.0,
        redundant_under_timestamp_merge=ts_dups,
        redundant_under_id_merge=id_dups,
        reference=reference,
    )
    return report, plans


def ids_digest(ids: Iterable[RecordId]) -> str:
    """Stable digest of an ID set, for manifest equality checks."""
    joined = ",".join(str(i) for i in sorted(ids))
    return hashlib.sha256(joined.encode("ascii")).hexdigest()


def load_manifest(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if "nodes" not in manifest or not isinstance(manifest["nodes"], dict):
        raise ValueError(f"manifest {path} lacks a 'nodes' mapping")
    for node_id, info in manifest["nodes"].items():
        for field in ("generated", "max_record_id"):
            if field not in info:
                raise ValueError(f"manifest node {node_id!r} lacks {field!r}")
    return manifest
