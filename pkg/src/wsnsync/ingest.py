"""Loopback HTTP ingestion endpoint, the wire boundary in front of a store.

Routes (HTTP/1.1 on a loopback port):

    POST /ingest          form-encoded node_id, record_id, temperature,
                          humidity, stamped_at
                          -> 200 "inserted" | 200 "duplicate" | 400 | 409
    GET  /ids?node=<id>   newline-separated ascending record IDs
    GET  /health          200 "ok"

A duplicate returns 200 on purpose: retries after an ambiguous network
failure must be safe, so the endpoint is idempotent per identity.
"""

from __future__ import annotations

import threading
import urllib.error
import urllib.parse
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .model import Packet, SensorSample, make_packet
from .store import ConflictError, InsertOutcome, ServerStore

INGEST_FIELDS = ("node_id", "record_id", "temperature", "humidity", "stamped_at")


def packet_to_form(p: Packet) -> str:
    """Encode a packet as the form body the endpoint expects."""
    return urllib.parse.urlencode(
        [
            ("node_id", p.node_id),
            ("record_id", str(p.record_id)),
            ("temperature", f"{p.sample.temperature:.1f}"),
            ("humidity", f"{p.sample.humidity:.1f}"),
            ("stamped_at", str(p.stamped_at)),
        ]
    )


def parse_ingest_form(body: str) -> Packet:
    """Decode and validate a form body; raises ValueError on any bad field."""
    fields = urllib.parse.parse_qs(body, keep_blank_values=True)
    values = {}
    for name in INGEST_FIELDS:
        got = fields.get(name, [])
        if len(got) != 1:
            raise ValueError(f"field {name!r} must appear exactly once")
        values[name] = got[0]
    try:
        record_id = int(values["record_id"])
        stamped_at = int(values["stamped_at"])
        sample = SensorSample(float(values["temperature"]), float(values["humidity"]))
    except ValueError as exc:
        raise ValueError(f"unparseable field: {exc}") from exc
    return make_packet(values["node_id"], record_id, sample, stamped_at)


def apply_ingest(store: ServerStore, body: str) -> tuple[int, str]:
    """The ingest decision, shared by the HTTP handler and offline replay."""
    try:
        packet = parse_ingest_form(body)
    except ValueError as exc:
        return 400, f"bad request: {exc}"
    try:
        outcome = store.insert(packet)
    except ConflictError as exc:
        return 409, f"conflict: {exc}"
    return 200, "inserted" if outcome is InsertOutcome.INSERTED else "duplicate"


def ids_body(store: ServerStore, node_id: str) -> tuple[int, str]:
    """Wire form of the ID listing; 404 only for an unknown node in a
    non-empty store (an empty store answers 200 with an empty body)."""
    if len(store) == 0:
        return 200, ""
    ids = store.ids(node_id)
    if not ids:
        return 404, f"unknown node {node_id!r}"
    return 200, "".join(f"{i}\n" for i in ids)


class _Handler(BaseHTTPRequestHandler):
    server: "_StoreServer"

    def _reply(self, status: int, body: str) -> None:
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self) -> None:
        parsed = urllib.parse.urlparse(self.path)
        if parsed.path == "/health":
            self._reply(200, "ok")
            return
        if parsed.path == "/ids":
            query = urllib.parse.parse_qs(parsed.query)
            node = query.get("node", [])
            if len(node) != 1:
                self._reply(400, "bad request: query parameter 'node' is required")
                return
            with self.server.lock:
                status, body = ids_body(self.server.store, node[0])
            self._reply(status, body)
            return
        self._reply(404, "not found")

    def do_POST(self) -> None:
        parsed = urllib.parse.urlparse(self.path)
        if parsed.path != "/ingest":
            self._reply(404, "not found")
            return
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length).decode("utf-8")
        with self.server.lock:
            status, reply = apply_ingest(self.server.store, body)
        self._reply(status, reply)

    def log_message(self, format: str, *args) -> None:
        pass  # keep test output quiet


class _StoreServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, handler, store: ServerStore):
        super().__init__(addr, handler)
        self.store = store
        self.lock = threading.Lock()


class IngestServer:
    """One ingestion endpoint bound to one store, served from a thread."""

    def __init__(self, store: ServerStore, host: str = "127.0.0.1", port: int = 0):
        self.store = store
        self._httpd = _StoreServer((host, port), _Handler, store)
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "IngestServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def __enter__(self) -> "IngestServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


class IngestClient:
    """Minimal loopback client used by the simulator and the tests."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _request(self, req: urllib.request.Request) -> tuple[int, str]:
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.status, resp.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            return exc.code, exc.read().decode("utf-8")

    def post_form(self, body: str) -> tuple[int, str]:
        req = urllib.request.Request(
            self.base_url + "/ingest",
            data=body.encode("utf-8"),
            headers={"Content-Type": "application/x-www-form-urlencoded"},
            method="POST",
        )
        return self._request(req)

    def ingest(self, packet: Packet) -> tuple[int, str]:
        return self.post_form(packet_to_form(packet))

    def ids(self, node_id: str) -> list[int]:
        status, body = self._request(
            urllib.request.Request(
                self.base_url + "/ids?" + urllib.parse.urlencode({"node": node_id})
            )
        )
        if status != 200:
            raise RuntimeError(f"GET /ids returned {status}: {body}")
        return [int(line) for line in body.splitlines() if line]

    def health(self) -> bool:
        status, body = self._request(
            urllib.request.Request(self.base_url + "/health")
        )
        return status == 200 and body == "ok"
