"""Live verdict pipeline: robust awarding, overrides, audit, latency budget.

The award rule is maximin: a point is granted automatically only when the
worst case over the declared uncertainty (impact lower bound, validity
lower probability) still satisfies the thresholds. Anything less robust is
routed to human review rather than silently dropped; ``no_award`` is
reserved for human-confirmed rejections.

Bound values quoted in explanation strings are formatted with
:func:`format_bound` so the text names the same numbers that are logged.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Mapping, Sequence

if TYPE_CHECKING:
    from .para import ParaDecision

from .audit import (
    FLOW_AI_FINAL,
    FLOW_DEFERRED,
    FLOW_HUMAN_CONFIRM,
    FLOW_HUMAN_OVERRIDE,
    AuditEntry,
    AuditLog,
    decode_award,
    encode_award,
)
from .core import (
    DecisionRecord,
    Interval,
    LoggedEvent,
    MatchLog,
    ScoringEvent,
    serialize_annotation,
)
from .credal import MarginBound, sigmoid_bounds
from .errors import (
    InvalidArgument,
    NotPending,
    UnknownEvent,
    UnreviewedFinalization,
    ValidationFailed,
)
from .fusion import FusionConfig, SensorReading, fuse_interval

LATENCY_BUDGET_MS = 300.0

# Human override labels that grant the point.
AWARD_LABELS = frozenset({"point_awarded", "award"})

DEFAULT_POINTS: Mapping[str, int] = {
    "head_kick": 3,
    "spin_kick": 4,
    "side_kick": 2,
    "punch": 1,
    "block": 0,
    "fall": 0,
}


class VerdictAction(str, Enum):
    AUTO_AWARD = "auto_award"
    NO_AWARD = "no_award"
    REVIEW_REQUIRED = "review_required"


class Band(str, Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"


def format_bound(x: float) -> str:
    """Render a bound the way explanations and review cards quote it."""
    return f"{x:.10g}"


def confidence_band(conf: float) -> Band:
    """green >= 0.9 > yellow >= 0.7 > red (0.9 itself is green, documented)."""
    if not 0.0 <= conf <= 1.0:
        raise InvalidArgument(f"confidence must be in [0, 1], got {conf}")
    if conf >= 0.9:
        return Band.GREEN
    if conf >= 0.7:
        return Band.YELLOW
    return Band.RED


@dataclass(frozen=True)
class Verdict:
    """Engine decision for one scoring event, bounds echoed for audit."""

    event_id: str
    action: VerdictAction
    impact_bounds: Interval
    validity_bounds: Interval
    explanation: str
    band: Band


def robust_award(
    impact: Interval,
    validity: Interval,
    t_w: float,
    tau: float,
    event_id: str = "",
) -> Verdict:
    """Maximin award rule: grant only if impact.lo >= T_w and validity.lo >= tau.

    Both comparisons are inclusive; any failure produces review_required
    with an explanation naming the failed bound and its threshold.
    """
    if validity.lo < 0.0 or validity.hi > 1.0:
        raise InvalidArgument(f"validity bounds {list(validity)} outside [0, 1]")
    if t_w <= 0.0:
        raise InvalidArgument(f"impact threshold must be > 0, got {t_w}")
    if not (0.0 < tau < 1.0):
        raise InvalidArgument(f"tau must be in (0, 1), got {tau}")

    failures = []
    if impact.lo < t_w:
        failures.append(
            f"impact lower bound {format_bound(impact.lo)} below threshold {format_bound(t_w)}"
        )
    if validity.lo < tau:
        failures.append(
            f"validity lower bound {format_bound(validity.lo)} below threshold {format_bound(tau)}"
        )

    band = confidence_band(validity.lo)
    if failures:
        return Verdict(
            event_id=event_id,
            action=VerdictAction.REVIEW_REQUIRED,
            impact_bounds=impact,
            validity_bounds=validity,
            explanation="; ".join(failures),
            band=band,
        )
    explanation = (
        f"auto-award: impact lower bound {format_bound(impact.lo)} meets threshold "
        f"{format_bound(t_w)}; validity lower bound {format_bound(validity.lo)} meets "
        f"threshold {format_bound(tau)}"
    )
    return Verdict(
        event_id=event_id,
        action=VerdictAction.AUTO_AWARD,
        impact_bounds=impact,
        validity_bounds=validity,
        explanation=explanation,
        band=band,
    )


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-stage pipeline latency against the live budget."""

    t_capture: float
    t_pose: float
    t_classify: float
    t_overlay: float
    total: float
    over_budget: bool
    budget_ms: float = LATENCY_BUDGET_MS


def record_latency(
    stages: Sequence[float], budget_ms: float = LATENCY_BUDGET_MS
) -> LatencyBreakdown:
    """Sum the four stage durations and flag totals at or above the budget."""
    if len(stages) != 4:
        raise InvalidArgument(f"expected 4 stage durations, got {len(stages)}")
    if any(s < 0 for s in stages):
        raise InvalidArgument(f"stage durations must be >= 0, got {list(stages)}")
    total = float(sum(stages))
    return LatencyBreakdown(
        t_capture=float(stages[0]),
        t_pose=float(stages[1]),
        t_classify=float(stages[2]),
        t_overlay=float(stages[3]),
        total=total,
        over_budget=total >= budget_ms,
        budget_ms=budget_ms,
    )


# -- override gate ---------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    """Human-in-the-loop gate: none, confirm, or override with a label."""

    kind: str  # "none" | "confirm" | "override"
    label: str | None = None

    @classmethod
    def none(cls) -> "Gate":
        return cls("none")

    @classmethod
    def confirm(cls) -> "Gate":
        return cls("confirm")

    @classmethod
    def override(cls, label: str) -> "Gate":
        if not label:
            raise InvalidArgument("override requires a human label")
        return cls("override", label)


def apply_override(
    verdict: Verdict,
    gate: Gate,
    reviewer: str | None,
    *,
    ts_ms: int,
    input_digest: str = "",
    entropy_nats: float = 0.0,
    award_y_hat: str | None = None,
) -> tuple[str, AuditEntry]:
    """Finalize a verdict through the override gate; returns (final label, entry).

    review_required verdicts must receive confirm or override; finalizing
    one with gate=none raises UnreviewedFinalization. Confirm keeps the
    engine's recommendation (for review_required that is a rejection, so
    the final label is no_award).
    """
    if gate.kind not in ("none", "confirm", "override"):
        raise InvalidArgument(f"unknown gate kind {gate.kind!r}")

    if gate.kind == "override":
        flow = FLOW_HUMAN_OVERRIDE
        final_label = gate.label or ""
    elif verdict.action is VerdictAction.REVIEW_REQUIRED:
        if gate.kind == "none":
            raise UnreviewedFinalization(
                f"event {verdict.event_id}: review_required verdicts need confirm or override"
            )
        flow = FLOW_HUMAN_CONFIRM
        final_label = VerdictAction.NO_AWARD.value
    else:
        flow = FLOW_AI_FINAL if gate.kind == "none" else FLOW_HUMAN_CONFIRM
        final_label = verdict.action.value

    grants = final_label == VerdictAction.AUTO_AWARD.value or final_label in AWARD_LABELS
    y_hat = award_y_hat if (grants and award_y_hat) else final_label
    entry = AuditEntry(
        ts_ms=ts_ms,
        event_id=verdict.event_id,
        input_digest=input_digest,
        y_hat=y_hat,
        entropy_nats=entropy_nats,
        decision_flow=flow,
        override_by=reviewer if gate.kind in ("confirm", "override") else None,
        impact_lo=verdict.impact_bounds.lo,
        impact_hi=verdict.impact_bounds.hi,
        p_lo=verdict.validity_bounds.lo,
        p_hi=verdict.validity_bounds.hi,
    )
    return final_label, entry


# -- margin model ------------------------------------------------------------


def _interval_product(a: Interval, b: Interval) -> Interval:
    corners = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval(min(corners), max(corners))


@dataclass(frozen=True)
class MarginModel:
    """Linear validity margin with drift-bounded parameters.

    m = theta_p*x_p + theta_i*x_i + theta_v*x_v + bias, with each theta an
    interval (drift hyper-rectangle); the induced margin interval bounds
    the imprecise validity probability through the logistic.
    """

    theta_p: Interval
    theta_i: Interval
    theta_v: Interval
    bias: float

    def margin_bounds(self, reading: SensorReading) -> MarginBound:
        lo = self.bias
        hi = self.bias
        for theta, x in (
            (self.theta_p, reading.pressure),
            (self.theta_i, reading.imu),
            (self.theta_v, reading.vision),
        ):
            term = _interval_product(theta, x)
            lo += term.lo
            hi += term.hi
        return MarginBound(Interval(lo, hi))


# -- per-match engine --------------------------------------------------------


@dataclass(frozen=True)
class EngineConfig:
    """Everything the verdict pipeline needs for one deployment."""

    fusion: FusionConfig
    margin: MarginModel
    tau: float = 0.70
    points: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_POINTS))

    def __post_init__(self) -> None:
        if not (0.0 < self.tau < 1.0):
            raise InvalidArgument(f"tau must be in (0, 1), got {self.tau}")
        object.__setattr__(self, "points", dict(self.points))

    def points_for(self, event_type: str) -> int:
        return self.points.get(event_type, 0)


def event_digest(event: ScoringEvent) -> str:
    """Content hash of the serialized event (raw pose payloads excluded)."""
    body = {
        "event_id": event.event_id,
        "t_event": event.t_event,
        "annotation": serialize_annotation(event.annotation),
        "sensors": [
            [event.sensors.pressure.lo, event.sensors.pressure.hi],
            [event.sensors.imu.lo, event.sensors.imu.hi],
            [event.sensors.vision.lo, event.sensors.vision.hi],
        ],
        "has_pose": event.pose is not None,
    }
    return hashlib.sha256(json.dumps(body, separators=(",", ":")).encode("utf-8")).hexdigest()


def _binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log(1.0 - p))


def para_audit_entry(
    decision: "ParaDecision",
    *,
    ts_ms: int,
    event_id: str,
    input_digest: str = "",
    reviewer: str | None = None,
) -> AuditEntry:
    """Audit row for an impairment-classification decision.

    Assigned classes finalize as ai_final with y_hat ``class:<label>``;
    flagged cases are deferred pending expert review. Probability bounds of
    the leading class fill the p columns; impact columns do not apply and
    stay zero.
    """
    from .para import ASSIGNED

    best = decision.probs.argmax()
    if decision.prob_bounds is not None:
        p_lo, p_hi = decision.prob_bounds[best].lo, decision.prob_bounds[best].hi
    else:
        p_lo = p_hi = decision.probs[best]
    assigned = decision.outcome == ASSIGNED
    return AuditEntry(
        ts_ms=ts_ms,
        event_id=event_id,
        input_digest=input_digest,
        y_hat=f"class:{decision.labels[best]}" if assigned else "flagged_for_review",
        entropy_nats=decision.entropy_nats,
        decision_flow=FLOW_AI_FINAL if assigned else FLOW_DEFERRED,
        override_by=reviewer,
        impact_lo=0.0,
        impact_hi=0.0,
        p_lo=p_lo,
        p_hi=p_hi,
    )


@dataclass
class PendingReview:
    event: ScoringEvent
    verdict: Verdict
    entropy_nats: float
    input_digest: str
    enqueued_ts: int


class MatchEngine:
    """Single-writer verdict loop for one match.

    One logical owner calls :meth:`process` and :meth:`finalize`; finalized
    state is only ever appended, so concurrent readers of snapshots and the
    audit file are safe. Run one engine per match for parallel matches.
    """

    def __init__(self, match_id: str, config: EngineConfig, audit_log: AuditLog) -> None:
        self.match_id = match_id
        self.config = config
        self.audit = audit_log
        self._seen: set[str] = set()
        self._pending: dict[str, PendingReview] = {}
        self._finalized: dict[str, str] = {}  # event_id -> final y_hat
        self._scores: dict[str, int] = {}
        self._records: list[DecisionRecord] = []
        self._events: list[LoggedEvent] = []
        self._outcomes: list[tuple[str, str, str]] = []  # (event_id, ref verdict, y_hat)
        self._bands: dict[str, int] = {b.value: 0 for b in Band}
        self._compute_ms: list[float] = []
        self._latency_pairs: list[tuple[float, float]] = []

    # -- processing --------------------------------------------------------

    def process(self, event: ScoringEvent) -> Verdict:
        """Run the verdict pipeline for one event; auto-finalizes robust awards."""
        if event.event_id in self._seen:
            raise ValidationFailed(f"duplicate event_id {event.event_id!r}")
        started = time.perf_counter()

        impact = fuse_interval(event.sensors, self.config.fusion)
        validity = sigmoid_bounds(self.config.margin.margin_bounds(event.sensors))
        t_w = self.config.fusion.threshold_for(event.annotation.meta.get("division"))
        verdict = robust_award(impact, validity, t_w, self.config.tau, event.event_id)
        entropy = _binary_entropy(validity.midpoint)
        digest = event_digest(event)

        self._seen.add(event.event_id)
        self._bands[verdict.band.value] += 1
        self._events.append(
            LoggedEvent(t_ms=event.t_event, label=event.annotation.event.value,
                        athlete_id=event.annotation.athlete_id)
        )

        if verdict.action is VerdictAction.AUTO_AWARD:
            award = encode_award(
                event.annotation.athlete_id, self.config.points_for(event.annotation.event.value)
            )
            final_label, entry = apply_override(
                verdict,
                Gate.none(),
                None,
                ts_ms=self._clock(event.t_event),
                input_digest=digest,
                entropy_nats=entropy,
                award_y_hat=award,
            )
            self.audit.append(entry)
            self._finish(event, verdict, entry.y_hat, validity.lo)
        else:
            self.audit.append(
                AuditEntry(
                    ts_ms=self._clock(event.t_event),
                    event_id=event.event_id,
                    input_digest=digest,
                    y_hat=VerdictAction.REVIEW_REQUIRED.value,
                    entropy_nats=entropy,
                    decision_flow=FLOW_DEFERRED,
                    override_by=None,
                    impact_lo=impact.lo,
                    impact_hi=impact.hi,
                    p_lo=validity.lo,
                    p_hi=validity.hi,
                )
            )
            self._pending[event.event_id] = PendingReview(
                event=event,
                verdict=verdict,
                entropy_nats=entropy,
                input_digest=digest,
                enqueued_ts=event.t_event,
            )

        elapsed_ms = (time.perf_counter() - started) * 1000.0
        self._compute_ms.append(elapsed_ms)
        if verdict.action is VerdictAction.AUTO_AWARD:
            self._latency_pairs.append((event.t_event, event.t_event + elapsed_ms))
        return verdict

    def finalize(self, event_id: str, gate: Gate, reviewer: str | None) -> tuple[str, int]:
        """Resolve a pending review; returns (final label, audit sequence)."""
        if event_id in self._finalized:
            raise NotPending(f"event {event_id} already finalized")
        if event_id not in self._pending:
            raise UnknownEvent(f"event {event_id} is not awaiting review")
        pending = self._pending[event_id]
        award = encode_award(
            pending.event.annotation.athlete_id,
            self.config.points_for(pending.event.annotation.event.value),
        )
        final_label, entry = apply_override(
            pending.verdict,
            gate,
            reviewer,
            ts_ms=self._clock(pending.event.t_event),
            input_digest=pending.input_digest,
            entropy_nats=pending.entropy_nats,
            award_y_hat=award,
        )
        seq = self.audit.append(entry)
        del self._pending[event_id]
        self._finish(pending.event, pending.verdict, entry.y_hat, pending.verdict.validity_bounds.lo)
        self._latency_pairs.append((pending.event.t_event, entry.ts_ms))
        return final_label, seq

    def _finish(self, event: ScoringEvent, verdict: Verdict, y_hat: str, confidence: float) -> None:
        self._finalized[event.event_id] = y_hat
        awarded = decode_award(y_hat)
        if awarded is not None:
            athlete, points = awarded
            self._scores[athlete] = self._scores.get(athlete, 0) + points
        self._records.append(
            DecisionRecord(
                t_ms=event.t_event,
                y_hat=y_hat,
                confidence=confidence,
                y_true=event.annotation.ref_verdict.value,
            )
        )
        self._outcomes.append((event.event_id, event.annotation.ref_verdict.value, y_hat))

    def _clock(self, t_event: int) -> int:
        """Audit timestamps are match-clock ms, forced non-decreasing."""
        last = self.audit.last_ts
        return t_event if last is None else max(t_event, last)

    # -- snapshots -----------------------------------------------------------

    def pending_reviews(self) -> list[PendingReview]:
        return sorted(self._pending.values(), key=lambda p: (p.event.t_event, p.event.event_id))

    def scores(self) -> dict[str, int]:
        return dict(self._scores)

    def finalized(self) -> dict[str, str]:
        return dict(self._finalized)

    def band_counts(self) -> dict[str, int]:
        return dict(self._bands)

    def compute_times_ms(self) -> list[float]:
        return list(self._compute_ms)

    def outcomes(self) -> list[tuple[str, str, str]]:
        """Finalized (event_id, referee verdict, engine y_hat) triples."""
        return list(self._outcomes)

    def latency_pairs(self) -> list[tuple[float, float]]:
        return list(self._latency_pairs)

    def match_log(self) -> MatchLog:
        records = sorted(self._records, key=lambda r: r.t_ms)
        events = sorted(self._events, key=lambda e: e.t_ms)
        return MatchLog(self.match_id, records, events)
