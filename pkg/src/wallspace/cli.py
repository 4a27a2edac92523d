"""Command line entry points: serve, sim, replay, report, demo-corpus."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import make_demo_corpus
from .eventlog import LogCorrupt, read_log
from .geometry import RoomSpec
from .sim import (
    ConfigError,
    ReplayDivergence,
    load_scenario_file,
    replay_records,
    run_scenario,
)
from .tasks import report_from_log, write_report


def _parse_room(text: str) -> RoomSpec:
    try:
        w, d = text.lower().split("x")
        return RoomSpec(width_m=float(w), depth_m=float(d))
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"room must look like 12x10, got {text!r}"
        ) from e


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from . import qr
    from .server import create_app

    corpus = Path(args.corpus)
    app = create_app(
        corpus_dir=corpus,
        room=args.room,
        seed=args.seed,
        frontend_dist=args.frontend,
    )
    print(f"wallspace hub on http://{args.host}:{args.port}")
    for side in ("left", "right"):
        url = f"http://{args.host}:{args.port}/pad?side={side}"
        print(f"\n{side} pad: {url}")
        print(qr.to_ascii(qr.encode(url)))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_sim(args: argparse.Namespace) -> int:
    config = load_scenario_file(args.scenario)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    result = run_scenario(config, out_dir=args.out)
    status = "completed" if result.completed else "timed out"
    print(
        f"scenario {status}: exit {result.exit_code}, "
        f"{result.sim_ms / 1000:.1f} simulated seconds, "
        f"{len(result.log.records)} log records"
    )
    if args.out:
        print(f"outputs in {args.out}: events.jsonl, report.json, report.csv")
    return result.exit_code


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        records = read_log(args.log)
        snapshot = replay_records(records)
    except LogCorrupt as e:
        print(f"log corrupt: {e}", file=sys.stderr)
        return 2
    except ReplayDivergence as e:
        print(f"replay divergence: {e}", file=sys.stderr)
        return 3
    print(
        f"replay ok: final revision {snapshot['revision']}, "
        f"{len(records)} records verified"
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        records = read_log(args.log)
    except LogCorrupt as e:
        print(f"log corrupt: {e}", file=sys.stderr)
        return 2
    report = report_from_log(records)
    if args.out:
        json_path, csv_path = write_report(report, args.out)
        print(f"wrote {json_path} and {csv_path}")
    else:
        print(json.dumps(report.to_json_dict(), indent=1, sort_keys=True))
    return 0


def cmd_demo_corpus(args: argparse.Namespace) -> int:
    manifest = make_demo_corpus(args.out)
    print(f"wrote {len(manifest.entries)} images under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wallspace",
        description="360-degree display wall interaction hub and simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the live WebSocket hub")
    serve.add_argument("--room", type=_parse_room, default=RoomSpec(), metavar="WxD")
    serve.add_argument("--corpus", required=True, help="image corpus directory")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--frontend", default="frontend/dist",
                       help="built TypeScript client bundle directory")
    serve.set_defaults(fn=cmd_serve)

    sim = sub.add_parser("sim", help="run a scenario headless")
    sim.add_argument("--scenario", required=True, help="scenario JSON file")
    sim.add_argument("--seed", type=int, default=None, help="override the file's seed")
    sim.add_argument("--out", default=None, help="output directory for logs and reports")
    sim.set_defaults(fn=cmd_sim)

    replay = sub.add_parser("replay", help="verify a recorded event log")
    replay.add_argument("--log", required=True)
    replay.set_defaults(fn=cmd_replay)

    report = sub.add_parser("report", help="recompute metrics from an event log")
    report.add_argument("--log", required=True)
    report.add_argument("--out", default=None)
    report.set_defaults(fn=cmd_report)

    demo = sub.add_parser("demo-corpus", help="generate a small tagged image corpus")
    demo.add_argument("--out", required=True)
    demo.set_defaults(fn=cmd_demo_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
