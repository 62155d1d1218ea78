"""Why the record counter must live in EEPROM, not RAM.

A node that keeps its record counter in memory restarts numbering at 1
after every reboot.  The servers then see the same (node_id, record_id)
identity twice with different readings, and an honest store has no safe
way to resolve that.

Run:  python3 demos/02_counter_defect.py
"""

from wsnsync import ConflictError, NodeConfig, ServerStore, run_node
from wsnsync.node import MemoryCounter

REBOOT_AT = 47.0


def day(counter_mode):
    return run_node(
        NodeConfig(send_interval=10.0, counter_mode=counter_mode),
        duration=120.0,
        seed=5,
        counter_store=MemoryCounter(),
        reboot_times=(REBOOT_AT,),
    )


print(f"--- node reboots at t={REBOOT_AT:.0f}s ---\n")

for mode in ("persistent", "naive-reset"):
    emissions = day(mode)
    ids = [p.record_id for p, _ in emissions]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    print(f"{mode:>12}: ids {ids}")
    print(f"{'':>12}  duplicates: {dupes if dupes else 'none'}")

print()
print("--- what a store does with the naive stream ---")
store = ServerStore("local")
for packet, _ in day("naive-reset"):
    try:
        store.insert(packet)
    except ConflictError as err:
        print(f"id {packet.record_id}: REFUSED ({type(err).__name__})")

print(f"\nstore kept {len(store)} records; the post-reboot readings that")
print("reused ids were refused rather than silently overwriting history")
