"""Command-line entry points: replay, generate, serve.

``replay`` streams an annotation JSON-Lines file either to stdout or into a
running gateway; ``generate`` emits a seeded synthetic stream; ``serve``
runs the NDJSON gateway until interrupted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import EngineConfig, Interval, MarginModel
from .fusion import FusionConfig, load_fusion_config
from .gateway import GatewayCore, send_events_to_gateway, serve
from .replay import SimConfig, generate_synthetic, replay
from .wire import event_to_dict


def default_fusion_config() -> FusionConfig:
    return FusionConfig(
        alpha_p=0.5,
        alpha_i=0.3,
        alpha_v=0.2,
        scale_s=100.0,
        thresholds={"default": 65.0},
    )


def default_engine_config(fusion: FusionConfig | None = None) -> EngineConfig:
    return EngineConfig(
        fusion=fusion or default_fusion_config(),
        margin=MarginModel(
            theta_p=Interval(2.1, 2.5),
            theta_i=Interval(1.3, 1.7),
            theta_v=Interval(0.8, 1.2),
            bias=-2.2,
        ),
        tau=0.70,
    )


def _load_fusion(args: argparse.Namespace) -> FusionConfig:
    if getattr(args, "config", None):
        return load_fusion_config(args.config)
    return default_fusion_config()


def _cmd_replay(args: argparse.Namespace) -> int:
    cfg = SimConfig(seed=args.seed, speed=args.speed, fps=args.fps)
    events = []

    def sink(event):
        events.append(event)
        if args.out == "stdout":
            print(json.dumps(event_to_dict(event)))

    summary = replay(args.file, cfg, sink)
    if args.out != "stdout":
        host, _, port = args.out.rpartition(":")
        send_events_to_gateway(host or "127.0.0.1", int(port), args.match, events,
                               token=args.token)
    print(
        json.dumps(
            {
                "total_events": summary.total_events,
                "counts": summary.counts,
                "stream_sha256": summary.stream_sha256,
            }
        ),
        file=sys.stderr,
    )
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = SimConfig(seed=args.seed, event_rate=args.rate)
    events = generate_synthetic(
        cfg,
        duration_s=args.duration,
        fusion=_load_fusion(args),
        borderline_fraction=args.borderline,
        count=args.count,
        match_id=args.match,
    )
    for event in events:
        print(json.dumps(event_to_dict(event)))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    tokens = {}
    if args.tokens:
        tokens = json.loads(Path(args.tokens).read_text("utf-8"))
    core = GatewayCore(
        default_engine_config(_load_fusion(args)),
        audit_dir=args.audit_dir,
        tokens=tokens,
    )
    server = serve(core, host=args.host, port=args.port)
    print(f"gateway listening on {args.host}:{server.port}", file=sys.stderr)
    try:
        import threading

        threading.Event().wait()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ringside")
    sub = parser.add_subparsers(dest="command", required=True)

    p_replay = sub.add_parser("replay", help="replay an annotation JSON-Lines file")
    p_replay.add_argument("--file", required=True)
    p_replay.add_argument("--seed", type=int, default=0)
    p_replay.add_argument("--speed", type=float, default=float("inf"))
    p_replay.add_argument("--fps", type=float, default=30.0)
    p_replay.add_argument("--out", default="stdout", help="'stdout' or host:port of a gateway")
    p_replay.add_argument("--match", default="REPLAY_0001")
    p_replay.add_argument("--token", default=None)
    p_replay.set_defaults(func=_cmd_replay)

    p_gen = sub.add_parser("generate", help="emit a seeded synthetic event stream")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--duration", type=float, required=True, help="seconds")
    p_gen.add_argument("--borderline", type=float, default=0.0)
    p_gen.add_argument("--rate", type=float, default=12.0, help="events per minute")
    p_gen.add_argument("--count", type=int, default=None, help="exact event count")
    p_gen.add_argument("--match", default="SYNTH_0001")
    p_gen.add_argument("--config", default=None, help="fusion config JSON path")
    p_gen.set_defaults(func=_cmd_generate)

    p_serve = sub.add_parser("serve", help="run the NDJSON gateway")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=7465)
    p_serve.add_argument("--audit-dir", default="./audit")
    p_serve.add_argument("--config", default=None, help="fusion config JSON path")
    p_serve.add_argument("--tokens", default=None, help="JSON file mapping token -> role")
    p_serve.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
