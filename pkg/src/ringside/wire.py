"""JSON payload encoding shared by the gateway, the replay CLI and fixtures.

Every payload is a plain dict of JSON-safe values; canonical serialization
(sorted keys, compact separators) makes event digests and stream digests
reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np

from .core import (
    AnnotationRecord,
    Interval,
    PoseSequence,
    ScoringEvent,
    parse_annotation,
    serialize_annotation,
)
from .engine import Verdict
from .errors import ValidationFailed
from .fusion import SensorReading


def interval_to_pair(iv: Interval) -> list[float]:
    return [iv.lo, iv.hi]


def event_to_dict(event: ScoringEvent) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "event_id": event.event_id,
        "t_event": event.t_event,
        "annotation": json.loads(serialize_annotation(event.annotation)),
        "sensors": {
            "pressure": interval_to_pair(event.sensors.pressure),
            "imu": interval_to_pair(event.sensors.imu),
            "vision": interval_to_pair(event.sensors.vision),
        },
    }
    if event.pose is not None:
        payload["pose"] = {
            "fps": event.pose.fps,
            "frames": event.pose.frames.tolist(),
            "valid": event.pose.valid.tolist(),
        }
    return payload


def event_from_dict(payload: dict[str, Any]) -> ScoringEvent:
    try:
        annotation: AnnotationRecord = parse_annotation(json.dumps(payload["annotation"]))
        sensors = SensorReading(
            pressure=Interval(*payload["sensors"]["pressure"]),
            imu=Interval(*payload["sensors"]["imu"]),
            vision=Interval(*payload["sensors"]["vision"]),
        )
        pose = None
        if "pose" in payload and payload["pose"] is not None:
            pose = PoseSequence(
                frames=np.asarray(payload["pose"]["frames"], dtype=float),
                fps=float(payload["pose"]["fps"]),
                valid=np.asarray(payload["pose"]["valid"], dtype=bool),
            )
        return ScoringEvent(
            event_id=str(payload["event_id"]),
            t_event=int(payload["t_event"]),
            annotation=annotation,
            sensors=sensors,
            pose=pose,
        )
    except (KeyError, TypeError) as exc:
        raise ValidationFailed(f"malformed event payload: {exc}") from exc


def verdict_to_dict(verdict: Verdict) -> dict[str, Any]:
    return {
        "event_id": verdict.event_id,
        "action": verdict.action.value,
        "impact_lo": verdict.impact_bounds.lo,
        "impact_hi": verdict.impact_bounds.hi,
        "p_lo": verdict.validity_bounds.lo,
        "p_hi": verdict.validity_bounds.hi,
        "explanation": verdict.explanation,
        "band": verdict.band.value,
    }


def canonical_json(payload: dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def stream_digest(payloads: list[dict[str, Any]]) -> str:
    """Order-sensitive digest of a payload stream; equal iff bit-identical."""
    h = hashlib.sha256()
    for payload in payloads:
        h.update(canonical_json(payload).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()
