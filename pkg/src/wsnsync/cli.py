"""Command line entry point.

Exit codes are part of the contract:
  0  success
  1  equality/consistency check failed (replay mismatch, merge conflict)
  2  usage or scenario/config error
  3  reconciliation completed but unrecoverable holes exist
  4  I/O or file format error
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from .ingest import IngestServer, apply_ingest
from .reconcile import (
    SyncReport,
    id_merge,
    load_manifest,
    reconcile_stores,
    timestamp_merge_baseline,
)
from .simulate import (
    PRESETS,
    TRANSPORTS,
    ConfigError,
    load_scenario,
    preset_path,
    run,
    write_outputs,
)
from .store import ConflictError, FormatError, ServerStore, export_store, import_store

OK = 0
CHECK_FAILED = 1
USAGE = 2
HOLES = 3
IO_ERROR = 4


def _resolve_scenario(ref: str):
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    if ref in PRESETS:
        return load_scenario(preset_path(ref))
    raise ConfigError(f"scenario {ref!r} is neither a file nor a bundled preset {sorted(PRESETS)}")


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args.scenario)
    if args.transport:
        scenario = replace(scenario, transport=args.transport)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    result = run(scenario)
    written = write_outputs(
        result, args.out, csv_mirror=args.csv, request_log=args.request_log
    )
    m = result.metrics
    if args.json:
        print(json.dumps(m.to_dict(), indent=2))
    else:
        print(f"scenario {m.scenario}: generated {m.generated}, "
              f"local {m.delivered_local}, online {m.delivered_online}, "
              f"lost both {m.lost_both}")
        for path in written:
            print(f"  wrote {path}")
    return OK


def _cmd_serve(args: argparse.Namespace) -> int:
    store = import_store(args.load, kind=args.kind) if args.load else ServerStore(args.kind)
    server = IngestServer(store, host=args.host, port=args.port)
    server.start()
    print(f"serving {args.kind} store ({len(store)} records) on {server.base_url}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        if args.export:
            n = export_store(store, args.export)
            print(f"exported {n} records to {args.export}")
    return OK


def _report_lines(report: SyncReport) -> str:
    d = report.to_dict()
    return "\n".join(f"{k}: {d[k]}" for k in d)


def _cmd_reconcile(args: argparse.Namespace) -> int:
    local = import_store(args.local, kind="local")
    online = import_store(args.online, kind="online")
    manifest = load_manifest(args.manifest) if args.manifest else None
    report, plans = reconcile_stores(local, online, manifest=manifest, apply=True)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.apply_to:
        out = Path(args.apply_to)
        out.mkdir(parents=True, exist_ok=True)
        export_store(local, out / "local.jsonl")
        export_store(online, out / "online.jsonl")
    print(report.to_json() if args.json else _report_lines(report))
    return HOLES if report.unrecoverable else OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    local = import_store(args.local, kind="local")
    online = import_store(args.online, kind="online")
    ts_merged, ts_dups = timestamp_merge_baseline(local, online)
    id_merged, id_dups = id_merge(local, online)
    comparison = {
        "timestamp": {"merged_rows": ts_merged, "duplicate_rows": ts_dups},
        "record_id": {"merged_rows": id_merged, "duplicate_rows": id_dups},
    }
    if args.json:
        print(json.dumps(comparison, indent=2))
    else:
        print(f"timestamp merge: {ts_merged} rows, {ts_dups} duplicates")
        print(f"record_id merge: {id_merged} rows, {id_dups} duplicates")
    return OK


def _cmd_replay(args: argparse.Namespace) -> int:
    store = ServerStore(args.link)
    with open(args.log, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad log line: {exc}", line_no) from exc
            if entry.get("link") != args.link:
                continue
            body = entry.get("body")
            if not isinstance(body, str):
                raise FormatError("log entry lacks a string 'body'", line_no)
            status, reply = apply_ingest(store, body)
            if status != 200:
                print(f"line {line_no}: replay refused ({status} {reply})")
                return CHECK_FAILED
    expected = import_store(args.expect, kind=args.link)
    if args.manifest:
        manifest = load_manifest(args.manifest)
        for node_id in store.nodes():
            top = manifest["nodes"].get(node_id, {}).get("max_record_id", 0)
            stray = [i for i in store.ids(node_id) if i > top]
            if stray:
                print(f"replay produced IDs beyond the manifest maximum: {stray}")
                return CHECK_FAILED
    if not store.same_records(expected):
        got, want = len(store), len(expected)
        print(f"replayed store does not match {args.expect} ({got} vs {want} records)")
        return CHECK_FAILED
    print(f"replayed {len(store)} records; store matches {args.expect}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsnsync",
        description="Sensor-to-server sync experiments: simulate, serve, reconcile.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write its outputs")
    p.add_argument("--scenario", required=True,
                   help=f"scenario TOML path or bundled preset {sorted(PRESETS)}")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--transport", choices=TRANSPORTS, default=None,
                   help="override the scenario transport")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--csv", action="store_true", help="also write CSV store mirrors")
    p.add_argument("--request-log", action="store_true",
                   help="also write request_log.jsonl (one POST per line)")
    p.add_argument("--json", action="store_true", help="print metrics JSON to stdout")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="run the ingest HTTP service in the foreground")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--kind", choices=("local", "online"), default="local")
    p.add_argument("--load", default=None, help="seed the store from a JSONL export")
    p.add_argument("--export", default=None, help="write the store to JSONL on shutdown")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("reconcile", help="diff two store exports and report the sync")
    p.add_argument("--local", required=True)
    p.add_argument("--online", required=True)
    p.add_argument("--manifest", default=None,
                   help="generator manifest for exact hole detection")
    p.add_argument("--out", default=None, help="write the report JSON here")
    p.add_argument("--apply-to", default=None,
                   help="write the repaired local.jsonl/online.jsonl into this directory")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=_cmd_reconcile)

    p = sub.add_parser("analyze", help="compare timestamp-keyed and id-keyed merges")
    p.add_argument("--local", required=True)
    p.add_argument("--online", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("replay", help="re-run a request log and check the result")
    p.add_argument("--log", required=True, help="request_log.jsonl from a simulate run")
    p.add_argument("--link", choices=("local", "online"), required=True)
    p.add_argument("--expect", required=True, help="store export the replay must match")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=_cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (FormatError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    except ConflictError as exc:
        print(f"conflict: {exc}", file=sys.stderr)
        return CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
