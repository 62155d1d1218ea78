from __future__ import annotations

import random

import pytest

from wsnsync.model import SensorSample, make_packet
from wsnsync.store import (
    ConflictError,
    FormatError,
    InsertOutcome,
    ServerStore,
    decode_line,
    encode_line,
    export_csv,
    export_store,
    import_store,
)


def pkt(rid, node="n1", temp=23.5, hum=55.0, at=120):
    return make_packet(node, rid, SensorSample(temp, hum), at)


def test_insert_outcomes():
    store = ServerStore("local")
    assert store.insert(pkt(1)) is InsertOutcome.INSERTED
    assert store.insert(pkt(1)) is InsertOutcome.DUPLICATE_IGNORED
    assert len(store) == 1


def test_conflicting_payload_is_refused_not_overwritten():
    store = ServerStore("local")
    store.insert(pkt(1, temp=20.0))
    with pytest.raises(ConflictError):
        store.insert(pkt(1, temp=30.0))
    assert store.get("n1", 1).sample.temperature == 20.0


def test_ids_are_sorted_and_per_node():
    store = ServerStore("local")
    for rid in (5, 1, 3):
        store.insert(pkt(rid))
    store.insert(pkt(2, node="n2"))
    assert store.ids("n1") == [1, 3, 5]
    assert store.ids("n2") == [2]
    assert store.ids("ghost") == []
    assert store.nodes() == ["n1", "n2"]


def test_get_missing_raises_key_error():
    with pytest.raises(KeyError):
        ServerStore().get("n1", 1)


def test_packets_iterate_in_identity_order():
    store = ServerStore()
    for rid in (9, 2, 7):
        store.insert(pkt(rid))
    assert [p.record_id for p in store.packets()] == [2, 7, 9]


def test_identities_at_and_audit():
    store = ServerStore()
    store.insert(pkt(1, at=50))
    store.insert(pkt(2, at=50))
    store.insert(pkt(3, at=51))
    assert sorted(store.identities_at(50)) == [("n1", 1), ("n1", 2)]
    assert store.identities_at(999) == []
    store.audit()


def test_same_records_ignores_kind():
    a, b = ServerStore("local"), ServerStore("online")
    a.insert(pkt(1))
    b.insert(pkt(1))
    assert a.same_records(b)
    b.insert(pkt(2))
    assert not a.same_records(b)


# --- codec ------------------------------------------------------------------


def test_encode_line_golden():
    line = encode_line(pkt(7))
    assert line == (
        '{"node_id":"n1","record_id":7,"temperature":23.5,'
        '"humidity":55.0,"stamped_at":120}'
    )


def test_decode_round_trip():
    p = pkt(12, temp=-3.2, hum=99.9, at=0)
    assert decode_line(encode_line(p)) == p


def test_decode_rejects_bad_json_with_line_number():
    with pytest.raises(FormatError) as err:
        decode_line("{nope", line_no=3)
    assert str(err.value).startswith("line 3:")


def test_decode_rejects_non_object():
    with pytest.raises(FormatError):
        decode_line("[1,2,3]")


def test_decode_rejects_missing_fields():
    with pytest.raises(FormatError) as err:
        decode_line('{"node_id":"n1","record_id":1}')
    assert "missing fields" in str(err.value)


@pytest.mark.parametrize(
    "line",
    [
        '{"node_id":"n1","record_id":0,"temperature":20.0,"humidity":40.0,"stamped_at":1}',
        '{"node_id":"n1","record_id":1,"temperature":"hot","humidity":40.0,"stamped_at":1}',
        '{"node_id":"n1","record_id":1,"temperature":120.0,"humidity":40.0,"stamped_at":1}',
        '{"node_id":"n1","record_id":1,"temperature":20.0,"humidity":40.0,"stamped_at":-9}',
    ],
)
def test_decode_rejects_invalid_values(line):
    with pytest.raises(FormatError):
        decode_line(line)


# --- files ------------------------------------------------------------------


def test_export_import_round_trip(tmp_path):
    store = ServerStore("local")
    rng = random.Random(2)
    for rid in rng.sample(range(1, 500), 120):
        store.insert(pkt(rid, temp=rng.uniform(-40, 80), hum=rng.uniform(0, 100), at=rid * 7))
    path = tmp_path / "local.jsonl"
    assert export_store(store, path) == 120
    loaded = import_store(path)
    assert loaded.same_records(store)


def test_export_is_identity_sorted_and_byte_stable(tmp_path):
    a, b = ServerStore("x"), ServerStore("x")
    for rid in (3, 1, 2):
        a.insert(pkt(rid))
    for rid in (2, 3, 1):
        b.insert(pkt(rid))
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    export_store(a, pa)
    export_store(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    first = pa.read_text(encoding="utf-8").splitlines()[0]
    assert '"record_id":1' in first


def test_export_golden_file(tmp_path):
    store = ServerStore()
    store.insert(pkt(1, temp=20.0, hum=40.0, at=0))
    store.insert(pkt(2, temp=20.1, hum=40.5, at=12))
    path = tmp_path / "g.jsonl"
    export_store(store, path)
    assert path.read_text(encoding="utf-8") == (
        '{"node_id":"n1","record_id":1,"temperature":20.0,"humidity":40.0,"stamped_at":0}\n'
        '{"node_id":"n1","record_id":2,"temperature":20.1,"humidity":40.5,"stamped_at":12}\n'
    )


def test_import_skips_blank_lines_and_reports_bad_line(tmp_path):
    path = tmp_path / "messy.jsonl"
    path.write_text(
        '{"node_id":"n1","record_id":1,"temperature":20.0,"humidity":40.0,"stamped_at":0}\n'
        "\n"
        "not json\n",
        encoding="utf-8",
    )
    with pytest.raises(FormatError) as err:
        import_store(path)
    assert str(err.value).startswith("line 3:")


def test_import_default_kind_comes_from_filename(tmp_path):
    path = tmp_path / "online.jsonl"
    export_store(ServerStore(), path)
    assert import_store(path).kind == "online"
    assert import_store(path, kind="local").kind == "local"


def test_csv_mirror(tmp_path):
    store = ServerStore()
    store.insert(pkt(7))
    path = tmp_path / "m.csv"
    assert export_csv(store, path) == 1
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "node_id,record_id,temperature,humidity,stamped_at"
    assert lines[1] == "n1,7,23.5,55.0,120"
