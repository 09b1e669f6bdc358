"""Domain types shared by all modules, plus the annotation record format.

Timestamps are integer milliseconds since match start; conversion from frame
numbers is centralized in :func:`frames_to_ms` so tests can rely on exact
equality. All types here are immutable value objects and safe to share
across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    InvalidArgument,
    MalformedInput,
    SchemaViolation,
)

if TYPE_CHECKING:  # SensorReading lives in fusion; only needed for typing
    from .fusion import SensorReading

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True, order=True)
class Interval:
    """Closed real interval carrying epistemic bounds on a measurement."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidArgument(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise InvalidArgument(f"interval lower bound {self.lo} exceeds upper bound {self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def __iter__(self) -> Iterator[float]:
        yield self.lo
        yield self.hi


@dataclass(frozen=True)
class ProbVector:
    """Point on the probability simplex (one component per class)."""

    p: tuple[float, ...]

    def __init__(self, p: Sequence[float]) -> None:
        object.__setattr__(self, "p", tuple(float(x) for x in p))
        if not self.p:
            raise InvalidArgument("probability vector must have at least one class")
        for x in self.p:
            if not math.isfinite(x) or x < 0.0 or x > 1.0:
                raise InvalidArgument(f"probability {x} outside [0, 1]")
        total = math.fsum(self.p)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise InvalidArgument(f"probabilities sum to {total}, not 1 within {PROB_SUM_TOL}")

    @classmethod
    def normalized(cls, values: Sequence[float]) -> "ProbVector":
        """Restore the simplex invariant by dividing by the sum exactly once."""
        vals = [float(x) for x in values]
        if any(x < 0.0 or not math.isfinite(x) for x in vals):
            raise InvalidArgument("cannot normalize negative or non-finite weights")
        total = math.fsum(vals)
        if total <= 0.0:
            raise InvalidArgument("cannot normalize a zero-sum vector")
        return cls([x / total for x in vals])

    def __len__(self) -> int:
        return len(self.p)

    def __getitem__(self, i: int) -> float:
        return self.p[i]

    def __iter__(self) -> Iterator[float]:
        return iter(self.p)

    def argmax(self) -> int:
        """Index of the largest component; ties break toward the lowest index."""
        best = 0
        for i, x in enumerate(self.p):
            if x > self.p[best]:
                best = i
        return best

    def max(self) -> float:
        return max(self.p)


@dataclass(frozen=True)
class EnsemblePrediction:
    """M stochastic forward passes over the same input, M >= 1."""

    members: tuple[ProbVector, ...]

    def __init__(self, members: Sequence[ProbVector]) -> None:
        object.__setattr__(self, "members", tuple(members))
        if not self.members:
            raise InvalidArgument("ensemble needs at least one member")
        k = len(self.members[0])
        for m in self.members:
            if len(m) != k:
                raise InvalidArgument("ensemble members must share one class dimension")

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def num_classes(self) -> int:
        return len(self.members[0])


class EventType(str, Enum):
    HEAD_KICK = "head_kick"
    PUNCH = "punch"
    BLOCK = "block"
    FALL = "fall"
    SPIN_KICK = "spin_kick"
    SIDE_KICK = "side_kick"


class RefVerdict(str, Enum):
    POINT_AWARDED = "point_awarded"
    FOUL_CALLED = "foul_called"
    WARNING = "warning"
    NO_ACTION = "no_action"


@dataclass(frozen=True)
class PoseSequence:
    """T x J x C joint tensor with per-joint validity mask (never NaN).

    Missing joints are encoded through ``valid`` and contribute zero to any
    graph aggregation downstream; coordinates must be finite everywhere.
    """

    frames: np.ndarray
    fps: float
    valid: np.ndarray  # bool, T x J

    def __init__(self, frames: np.ndarray, fps: float, valid: np.ndarray | None = None) -> None:
        arr = np.asarray(frames, dtype=np.float64)
        if arr.ndim != 3:
            raise InvalidArgument(f"pose tensor must be T x J x C, got shape {arr.shape}")
        t, j, c = arr.shape
        if t < 1 or j < 1 or c < 1:
            raise InvalidArgument(f"pose tensor dimensions must all be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidArgument("pose coordinates must be finite; encode missing joints in the mask")
        if fps <= 0 or not math.isfinite(fps):
            raise InvalidArgument(f"fps must be positive and finite, got {fps}")
        mask = np.ones((t, j), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
        if mask.shape != (t, j):
            raise InvalidArgument(f"validity mask must be T x J = {(t, j)}, got {mask.shape}")
        arr = arr.copy()
        mask = mask.copy()
        arr.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "frames", arr)
        object.__setattr__(self, "fps", float(fps))
        object.__setattr__(self, "valid", mask)

    @property
    def t(self) -> int:
        return self.frames.shape[0]

    @property
    def j(self) -> int:
        return self.frames.shape[1]

    @property
    def c(self) -> int:
        return self.frames.shape[2]


# Canonical annotation field order, bit-exact with the JSON-Lines format.
ANNOTATION_FIELDS = (
    "match_id",
    "athlete_id",
    "event",
    "start_frame",
    "end_frame",
    "hit_valid",
    "ref_verdict",
)


@dataclass(frozen=True)
class AnnotationRecord:
    """One labeled contact event as stored in the annotation files."""

    match_id: str
    athlete_id: str
    event: EventType
    start_frame: int
    end_frame: int
    hit_valid: bool
    ref_verdict: RefVerdict
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.match_id or not self.athlete_id:
            raise SchemaViolation("match_id and athlete_id must be non-empty")
        if self.start_frame < 0:
            raise SchemaViolation(f"start_frame must be >= 0, got {self.start_frame}")
        if self.start_frame > self.end_frame:
            raise SchemaViolation(
                f"start_frame {self.start_frame} after end_frame {self.end_frame}"
            )
        object.__setattr__(self, "meta", dict(self.meta))


@dataclass(frozen=True)
class ScoringEvent:
    """One stream item binding annotation, sensor evidence and optional pose."""

    event_id: str
    t_event: int  # milliseconds since match start
    annotation: AnnotationRecord
    sensors: "SensorReading"
    pose: PoseSequence | None = None

    def __post_init__(self) -> None:
        if not self.event_id:
            raise InvalidArgument("event_id must be non-empty")
        if self.t_event < 0:
            raise InvalidArgument(f"t_event must be >= 0 ms, got {self.t_event}")


@dataclass(frozen=True)
class DecisionRecord:
    """Engine verdict tuple (t_i, y_i, y_hat_i, s_i) for the analytics layer."""

    t_ms: int
    y_hat: str
    confidence: float
    y_true: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidArgument(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class LoggedEvent:
    """Event-type occurrence with timestamp, for distribution metrics."""

    t_ms: int
    label: str
    athlete_id: str | None = None


@dataclass(frozen=True)
class MatchLog:
    """Per-match decision tuples plus logged event-type occurrences."""

    match_id: str
    records: tuple[DecisionRecord, ...]
    events: tuple[LoggedEvent, ...]

    def __init__(
        self,
        match_id: str,
        records: Sequence[DecisionRecord] = (),
        events: Sequence[LoggedEvent] = (),
    ) -> None:
        recs = tuple(records)
        for a, b in zip(recs, recs[1:]):
            if b.t_ms < a.t_ms:
                raise InvalidArgument("decision records must be ordered by non-decreasing t_ms")
        object.__setattr__(self, "match_id", match_id)
        object.__setattr__(self, "records", recs)
        object.__setattr__(self, "events", tuple(events))


def frames_to_ms(frame: int, fps: float) -> int:
    """Convert a frame index to integer milliseconds since match start."""
    if fps <= 0 or not math.isfinite(fps):
        raise InvalidArgument(f"fps must be positive, got {fps}")
    if frame < 0:
        raise InvalidArgument(f"frame must be >= 0, got {frame}")
    return int(round(frame * 1000.0 / fps))


def _coerce_meta_value(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value)


def parse_annotation(text: bytes | str) -> AnnotationRecord:
    """Parse one annotation JSON object into an :class:`AnnotationRecord`.

    Unknown top-level fields are preserved into ``meta`` (stringified when
    not already strings) rather than rejected, so files from newer
    annotation phases keep their tags.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"annotation is not valid UTF-8: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"annotation is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaViolation(f"annotation must be a JSON object, got {type(obj).__name__}")

    missing = [k for k in ANNOTATION_FIELDS if k not in obj]
    if missing:
        raise SchemaViolation(f"annotation missing required fields: {missing}")

    def _typed(key: str, kind: type) -> Any:
        value = obj[key]
        if kind is int and isinstance(value, bool):  # bool is an int subclass
            raise SchemaViolation(f"field {key!r} must be an integer, got a boolean")
        if not isinstance(value, kind):
            raise SchemaViolation(f"field {key!r} must be {kind.__name__}, got {type(value).__name__}")
        return value

    try:
        event = EventType(_typed("event", str))
    except ValueError as exc:
        raise SchemaViolation(f"unknown event type {obj['event']!r}") from exc
    try:
        verdict = RefVerdict(_typed("ref_verdict", str))
    except ValueError as exc:
        raise SchemaViolation(f"unknown ref_verdict {obj['ref_verdict']!r}") from exc

    meta: dict[str, str] = {}
    raw_meta = obj.get("meta", {})
    if raw_meta:
        if not isinstance(raw_meta, dict):
            raise SchemaViolation("meta must be a JSON object of strings")
        for k, v in raw_meta.items():
            meta[str(k)] = _coerce_meta_value(v)
    for key, value in obj.items():
        if key in ANNOTATION_FIELDS or key == "meta":
            continue
        meta[key] = _coerce_meta_value(value)

    return AnnotationRecord(
        match_id=_typed("match_id", str),
        athlete_id=_typed("athlete_id", str),
        event=event,
        start_frame=_typed("start_frame", int),
        end_frame=_typed("end_frame", int),
        hit_valid=_typed("hit_valid", bool),
        ref_verdict=verdict,
        meta=meta,
    )


def serialize_annotation(record: AnnotationRecord) -> str:
    """Serialize a record to one JSON line; inverse of :func:`parse_annotation`."""
    obj: dict[str, Any] = {
        "match_id": record.match_id,
        "athlete_id": record.athlete_id,
        "event": record.event.value,
        "start_frame": record.start_frame,
        "end_frame": record.end_frame,
        "hit_valid": record.hit_valid,
        "ref_verdict": record.ref_verdict.value,
    }
    if record.meta:
        obj["meta"] = dict(sorted(record.meta.items()))
    return json.dumps(obj, separators=(",", ":"), sort_keys=False)
