"""The ingest service end to end, over real HTTP on loopback.

A node that loses its acknowledgement retransmits, so the endpoint has to
treat a repeated record as a no-op and a contradictory one as an error.
This script exercises every status the wire can answer.

Run:  python3 demos/04_wire_service.py
"""

from wsnsync import (
    IngestClient,
    IngestServer,
    ServerStore,
    make_packet,
    packet_to_form,
)

store = ServerStore("local")
with IngestServer(store, host="127.0.0.1", port=0) as server:
    client = IngestClient(server.base_url)
    print(f"serving {server.base_url}  health={client.health()}\n")

    packets = [
        make_packet("n1", i, (20.0 + i, 55.0), stamped_at=i * 10)
        for i in (1, 2, 3)
    ]
    for pkt in packets:
        status, body = client.ingest(pkt)
        print(f"POST /ingest id={pkt.record_id}: {status} {body}")

    # the retransmit case: byte-identical record, accepted and ignored
    status, body = client.ingest(packets[0])
    print(f"POST /ingest id=1 again:  {status} {body}")

    # same identity, different reading: the store refuses to guess
    liar = make_packet("n1", 2, (75.0, 10.0), stamped_at=20)
    status, body = client.ingest(liar)
    print(f"POST /ingest id=2 forged: {status} {body}")

    status, body = client.post_form("node_id=n1&record_id=banana")
    print(f"POST /ingest malformed:   {status} {body}")

    print(f"\nGET /ids?node=n1 -> {client.ids('n1')}")
    print(f"store kept {len(store)} rows; retries and junk left no trace")

    # replaying the whole session is safe too
    for pkt in packets:
        client.post_form(packet_to_form(pkt))
    print(f"after full replay the store still holds {len(store)} rows")
