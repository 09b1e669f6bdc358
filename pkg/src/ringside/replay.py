"""Deterministic match replay and seeded synthetic event generation.

Annotations carry labels but no sensor traces, so sensor intervals are
synthesized from the labels under a documented, config-driven mapping:
valid hits draw feature centers from a high band, invalid contacts from a
low band, and borderline events are constructed so their fused impact
interval straddles the division threshold. Everything is driven by one
seeded generator, so (seed, inputs) fully determine the emitted stream.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .core import (
    AnnotationRecord,
    EventType,
    Interval,
    RefVerdict,
    ScoringEvent,
    frames_to_ms,
    parse_annotation,
)
from .errors import InvalidArgument, ParseError, RingsideError
from .fusion import FusionConfig, SensorReading
from .wire import event_to_dict, stream_digest

Sink = Callable[[ScoringEvent], None]

SCORING_EVENT_TYPES = (
    EventType.HEAD_KICK,
    EventType.PUNCH,
    EventType.SPIN_KICK,
    EventType.SIDE_KICK,
)

DEFAULT_ATHLETES = ("BLU_0001", "RED_0002")


@dataclass(frozen=True)
class NoiseModel:
    """Per-sensor interval half-widths (epistemic envelope after calibration)."""

    pressure: float = 0.04
    imu: float = 0.05
    vision: float = 0.04

    def __post_init__(self) -> None:
        if min(self.pressure, self.imu, self.vision) < 0:
            raise InvalidArgument("noise half-widths must be >= 0")


@dataclass(frozen=True)
class SynthesisProfile:
    """Label-to-sensor mapping used when annotations carry no sensor traces."""

    valid_center: tuple[float, float] = (0.78, 0.95)
    invalid_center: tuple[float, float] = (0.25, 0.55)

    def center_range(self, hit_valid: bool) -> tuple[float, float]:
        return self.valid_center if hit_valid else self.invalid_center


@dataclass(frozen=True)
class SimConfig:
    """Replay/generation parameters; speed=inf disables wall-clock pacing."""

    seed: int = 0
    speed: float = math.inf
    noise: NoiseModel = field(default_factory=NoiseModel)
    event_rate: float = 12.0  # events per minute, synthetic mode
    fps: float = 30.0
    synthesis: SynthesisProfile = field(default_factory=SynthesisProfile)

    def __post_init__(self) -> None:
        if self.speed <= 0:
            raise InvalidArgument(f"speed must be > 0, got {self.speed}")
        if self.event_rate < 0:
            raise InvalidArgument(f"event_rate must be >= 0, got {self.event_rate}")
        if self.fps <= 0:
            raise InvalidArgument(f"fps must be > 0, got {self.fps}")


@dataclass(frozen=True)
class ReplaySummary:
    """What a replay emitted: counts per event type and a stream digest."""

    total_events: int
    counts: dict[str, int]
    stream_sha256: str


def _clip01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def _synthesize_sensors(rng: random.Random, cfg: SimConfig, hit_valid: bool) -> SensorReading:
    lo, hi = cfg.synthesis.center_range(hit_valid)
    half = (cfg.noise.pressure, cfg.noise.imu, cfg.noise.vision)
    intervals = []
    for hw in half:
        center = rng.uniform(lo, hi)
        intervals.append(Interval(_clip01(center - hw), _clip01(center + hw)))
    return SensorReading(pressure=intervals[0], imu=intervals[1], vision=intervals[2])


def replay(
    file: str | Path,
    cfg: SimConfig,
    sink: Sink,
) -> ReplaySummary:
    """Stream one annotation file into the sink as ScoringEvents.

    Events are emitted in start_frame order at scaled wall-clock spacing;
    identical (seed, file) pairs produce bit-identical streams.
    """
    lines = Path(file).read_text("utf-8").splitlines()
    records: list[AnnotationRecord] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(parse_annotation(line))
        except RingsideError as exc:
            raise ParseError(f"{file}:{lineno}: {exc}") from exc

    records.sort(key=lambda r: r.start_frame)
    rng = random.Random(cfg.seed)
    counts: dict[str, int] = {}
    payloads = []
    prev_ms: int | None = None
    for idx, record in enumerate(records):
        t_event = frames_to_ms(record.start_frame, cfg.fps)
        event = ScoringEvent(
            event_id=f"{record.match_id}-{idx:04d}",
            t_event=t_event,
            annotation=record,
            sensors=_synthesize_sensors(rng, cfg, record.hit_valid),
        )
        if prev_ms is not None and math.isfinite(cfg.speed):
            gap_s = max(0, t_event - prev_ms) / 1000.0 / cfg.speed
            if gap_s > 0:
                time.sleep(gap_s)
        prev_ms = t_event
        sink(event)
        counts[record.event.value] = counts.get(record.event.value, 0) + 1
        payloads.append(event_to_dict(event))

    return ReplaySummary(
        total_events=len(records),
        counts=counts,
        stream_sha256=stream_digest(payloads),
    )


def generate_synthetic(
    cfg: SimConfig,
    duration_s: float,
    fusion: FusionConfig,
    borderline_fraction: float = 0.0,
    count: int | None = None,
    match_id: str = "SYNTH_0001",
    division: str | None = None,
    athletes: Sequence[str] = DEFAULT_ATHLETES,
) -> list[ScoringEvent]:
    """Seeded synthetic contact stream for load and borderline-case testing.

    A ``borderline_fraction`` of events gets sensor intervals constructed so
    the fused impact interval straddles the division threshold T_w (equal
    normalized intervals fuse back to themselves on the impact scale since
    the weights are convex). The rest follow the label-driven synthesis
    profile. ``count`` pins the exact number of events; otherwise arrivals
    are drawn at ``event_rate`` per minute until the duration is exhausted.
    """
    if duration_s <= 0:
        raise InvalidArgument(f"duration must be > 0 s, got {duration_s}")
    if not 0.0 <= borderline_fraction <= 1.0:
        raise InvalidArgument(f"borderline fraction must be in [0, 1], got {borderline_fraction}")

    rng = random.Random(cfg.seed)
    t_w = fusion.threshold_for(division)
    scale = fusion.scale_s

    times_ms: list[int]
    if count is not None:
        if count < 0:
            raise InvalidArgument(f"count must be >= 0, got {count}")
        times_ms = sorted(int(rng.uniform(0, duration_s * 1000.0)) for _ in range(count))
    else:
        times_ms = []
        rate_per_s = cfg.event_rate / 60.0
        if rate_per_s > 0:
            t = 0.0
            while True:
                t += rng.expovariate(rate_per_s)
                if t >= duration_s:
                    break
                times_ms.append(int(t * 1000.0))

    events: list[ScoringEvent] = []
    for idx, t_event in enumerate(times_ms):
        athlete = rng.choice(list(athletes))
        event_type = rng.choice(SCORING_EVENT_TYPES)
        borderline = rng.random() < borderline_fraction
        if borderline:
            # fused interval must straddle T_w: lo < T_w <= hi
            lo_impact = max(0.0, t_w - rng.uniform(0.5, 6.0))
            hi_impact = min(scale, t_w + rng.uniform(0.5, 6.0))
            unit = Interval(lo_impact / scale, hi_impact / scale)
            sensors = SensorReading(pressure=unit, imu=unit, vision=unit)
            hit_valid = True
            verdict = rng.choice((RefVerdict.POINT_AWARDED, RefVerdict.NO_ACTION))
        else:
            hit_valid = rng.random() < 0.7
            sensors = _synthesize_sensors(rng, cfg, hit_valid)
            verdict = RefVerdict.POINT_AWARDED if hit_valid else RefVerdict.NO_ACTION
        start_frame = int(t_event * cfg.fps / 1000.0)
        annotation = AnnotationRecord(
            match_id=match_id,
            athlete_id=athlete,
            event=event_type,
            start_frame=start_frame,
            end_frame=start_frame + rng.randint(5, 40),
            hit_valid=hit_valid,
            ref_verdict=verdict,
            meta={"division": division} if division else {},
        )
        events.append(
            ScoringEvent(
                event_id=f"{match_id}-{idx:04d}",
                t_event=t_event,
                annotation=annotation,
                sensors=sensors,
            )
        )
    return events
