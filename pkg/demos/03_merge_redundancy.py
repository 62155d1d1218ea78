"""Merging two server dumps: timestamp key versus record-ID key.

Second-resolution timestamps collide as soon as two packets land in the
same second, so a timestamp-keyed merge sees phantom duplicates.  The
record ID is assigned once, at the source, and never collides.

Run:  python3 demos/03_merge_redundancy.py
"""

from wsnsync import (
    collision_scenario,
    id_merge,
    run,
    timestamp_merge_baseline,
)

result = run(collision_scenario())
local, online = result.local, result.online
print(f"scenario '{result.metrics.scenario}': node sends every 0.5 s,")
print(f"local store {len(local)} rows, online store {len(online)} rows\n")

ts_merged, ts_dups = timestamp_merge_baseline(local, online)
print(f"timestamp-keyed merge: {ts_merged} rows, {ts_dups} of them share a stamp")

sample_stamp = next(iter(p.stamped_at for p in local.packets()))
collided = local.identities_at(sample_stamp) + online.identities_at(sample_stamp)
print(f"  e.g. stamp {sample_stamp}s holds {len(collided)} rows: {collided}")

id_merged, id_dups = id_merge(local, online)
print(f"\nrecord-id-keyed merge: {id_merged} rows, {id_dups} duplicates")
print("the id key collapses the cross-server copies and nothing else")
