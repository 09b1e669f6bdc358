#!/usr/bin/env python3
"""Record a live gateway session into a JSON fixture for the console tests.

Drives the real NDJSON gateway end to end (open match, ingest events,
confirm one review, double-submit to capture the NotPending error, pull a
metrics snapshot) while a second observer connection records every pushed
feed message. The console contract tests replay this file.
"""

from __future__ import annotations

import json
import socket
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from ringside.cli import default_engine_config
from ringside.core import AnnotationRecord, EventType, Interval, RefVerdict, ScoringEvent
from ringside.fusion import SensorReading
from ringside.gateway import GatewayCore, serve
from ringside.wire import event_to_dict

MATCH = "FIX_2026_0001"


def borderline_event() -> ScoringEvent:
    # sensors chosen so the fused impact interval is exactly [62.1, 69.4]
    # on the 0..100 scale with the default convex weights
    return ScoringEvent(
        event_id=f"{MATCH}-0001",
        t_event=3667,
        annotation=AnnotationRecord(
            match_id=MATCH,
            athlete_id="KOR_A123",
            event=EventType.HEAD_KICK,
            start_frame=110,
            end_frame=135,
            hit_valid=True,
            ref_verdict=RefVerdict.POINT_AWARDED,
        ),
        sensors=SensorReading(
            pressure=Interval(0.28, 0.42),
            imu=Interval(0.99, 1.00),
            vision=Interval(0.92, 0.92),
        ),
    )


def auto_award_event() -> ScoringEvent:
    return ScoringEvent(
        event_id=f"{MATCH}-0002",
        t_event=8200,
        annotation=AnnotationRecord(
            match_id=MATCH,
            athlete_id="ESP_B007",
            event=EventType.SPIN_KICK,
            start_frame=246,
            end_frame=270,
            hit_valid=True,
            ref_verdict=RefVerdict.POINT_AWARDED,
        ),
        sensors=SensorReading(
            pressure=Interval(0.85, 0.90),
            imu=Interval(0.80, 0.85),
            vision=Interval(0.75, 0.80),
        ),
    )


def weak_contact_event() -> ScoringEvent:
    return ScoringEvent(
        event_id=f"{MATCH}-0003",
        t_event=15500,
        annotation=AnnotationRecord(
            match_id=MATCH,
            athlete_id="KOR_A123",
            event=EventType.PUNCH,
            start_frame=465,
            end_frame=480,
            hit_valid=False,
            ref_verdict=RefVerdict.NO_ACTION,
        ),
        sensors=SensorReading(
            pressure=Interval(0.30, 0.40),
            imu=Interval(0.35, 0.45),
            vision=Interval(0.28, 0.36),
        ),
    )


class Client:
    def __init__(self, port: int) -> None:
        self.sock = socket.create_connection(("127.0.0.1", port))
        self.fh = self.sock.makefile("rwb")
        self.seq = 0
        self.exchanges: list[dict] = []

    def call(self, kind: str, payload: dict) -> dict:
        self.seq += 1
        request = {"kind": kind, "payload": payload, "seq": self.seq}
        self.fh.write((json.dumps(request) + "\n").encode())
        self.fh.flush()
        response = json.loads(self.fh.readline())
        self.exchanges.append({"request": request, "response": response})
        return response

    def close(self) -> None:
        self.sock.close()


def main(out_path: str) -> None:
    core = GatewayCore(default_engine_config(), audit_dir=Path(out_path).parent / ".audit-scratch")
    server = serve(core, port=0)
    try:
        observer = Client(server.port)
        observer.call("subscribe", {})

        actor = Client(server.port)
        actor.call("open_match", {"match_id": MATCH})
        for event in (borderline_event(), auto_award_event(), weak_contact_event()):
            actor.call("ingest", {"match_id": MATCH, "event": event_to_dict(event)})
        actor.call("review_queue", {"match_id": MATCH})
        actor.call(
            "submit_override",
            {"event_id": f"{MATCH}-0003", "action": "confirm", "reviewer": "jury_chair"},
        )
        # double submission: the second must be rejected as NotPending
        actor.call(
            "submit_override",
            {"event_id": f"{MATCH}-0003", "action": "confirm", "reviewer": "jury_chair"},
        )
        actor.call("metrics_snapshot", {"scope": MATCH})
        actor.call("audit_export", {"match_id": MATCH})

        time.sleep(0.3)  # let broadcasts drain to the observer
        observer.sock.setblocking(False)
        feed = [observer.exchanges[0]["response"]]
        try:
            for line in observer.fh:
                feed.append(json.loads(line))
        except (BlockingIOError, OSError):
            pass

        fixture = {
            "note": "recorded gateway session: 3 ingested events, one confirm, "
                    "one double-submit rejection, one metrics snapshot",
            "match_id": MATCH,
            "observer_feed": feed,
            "actor_exchanges": actor.exchanges,
        }
        Path(out_path).write_text(json.dumps(fixture, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {out_path}: {len(feed)} feed messages, {len(actor.exchanges)} exchanges")
        observer.close()
        actor.close()
    finally:
        server.shutdown()


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "test/fixtures/session.json")
