"""Network surface binding the verdict engine to the review console.

Wire protocol: newline-delimited JSON messages ``{kind, payload, seq}``
over a persistent TCP stream, with ``seq`` strictly increasing per
connection per direction, plus plain request/response message kinds for
snapshots. :class:`GatewayCore` is transport-independent (used directly by
tests and by the socket layer); :class:`NdjsonServer` adds sockets.

Truth lives in the audit log: restarting the gateway and restoring a match
from its audit file reproduces the review queue and score state. Each
match's mutations are serialized through one lock (the single-writer
engine loop); snapshot reads work on copies.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from . import analytics
from .audit import FLOW_DEFERRED, FINAL_FLOWS, AuditLog, replay_final_scores
from .core import Interval, ScoringEvent
from .engine import (
    EngineConfig,
    Gate,
    MatchEngine,
    PendingReview,
    Verdict,
    confidence_band,
    robust_award,
)
from .errors import (
    DegenerateMarginals,
    EmptyInput,
    InsufficientGroups,
    NotPending,
    RingsideError,
    SessionClosed,
    UnknownEvent,
    UnknownMatch,
    UnknownScope,
    ValidationFailed,
)
from .wire import event_from_dict, verdict_to_dict

ROLE_REFEREE = "referee"
ROLE_JURY = "jury"
ROLE_OBSERVER = "observer"
OVERRIDE_ROLES = frozenset({ROLE_REFEREE, ROLE_JURY})

LATENCY_TREND_WINDOW = 5
DISPARITY_THRESHOLD = 0.1

Subscriber = Callable[[str, dict[str, Any]], None]


def _review_item_payload(pending: PendingReview, t_w: float, tau: float) -> dict[str, Any]:
    verdict = pending.verdict
    saliency = None
    if pending.event.pose is not None:
        # Pose present but no recognizer configured: expose the mask footprint
        # so the console can render the joint grid dimensions.
        saliency = {
            "joints": pending.event.pose.j,
            "frames": pending.event.pose.t,
            "values": None,
        }
    return {
        "event_id": verdict.event_id,
        "t_event": pending.event.t_event,
        "athlete_id": pending.event.annotation.athlete_id,
        "event_type": pending.event.annotation.event.value,
        "explanation": verdict.explanation,
        "impact_lo": verdict.impact_bounds.lo,
        "impact_hi": verdict.impact_bounds.hi,
        "p_lo": verdict.validity_bounds.lo,
        "p_hi": verdict.validity_bounds.hi,
        "t_w": t_w,
        "tau": tau,
        "band": verdict.band.value,
        "entropy_nats": pending.entropy_nats,
        "saliency": saliency,
    }


@dataclass
class MatchSession:
    engine: MatchEngine
    audit_path: Path
    lock: threading.RLock = field(default_factory=threading.RLock)
    restored_pending: dict[str, dict[str, Any]] = field(default_factory=dict)
    restored_verdicts: dict[str, Verdict] = field(default_factory=dict)


class GatewayCore:
    """Transport-independent gateway state machine."""

    def __init__(
        self,
        config: EngineConfig,
        audit_dir: str | Path,
        tokens: Mapping[str, str] | None = None,
    ) -> None:
        self.config = config
        self.audit_dir = Path(audit_dir)
        self.audit_dir.mkdir(parents=True, exist_ok=True)
        self.tokens = dict(tokens or {})
        self._matches: dict[str, MatchSession] = {}
        self._event_index: dict[str, str] = {}
        self._subscribers: list[Subscriber] = []
        self._sub_lock = threading.Lock()

    # -- wiring --------------------------------------------------------------

    def subscribe(self, callback: Subscriber) -> None:
        with self._sub_lock:
            self._subscribers.append(callback)

    def unsubscribe(self, callback: Subscriber) -> None:
        with self._sub_lock:
            if callback in self._subscribers:
                self._subscribers.remove(callback)

    def _broadcast(self, kind: str, payload: dict[str, Any]) -> None:
        with self._sub_lock:
            subscribers = list(self._subscribers)
        for callback in subscribers:
            callback(kind, payload)

    def role_for_token(self, token: str | None) -> str | None:
        if not self.tokens:
            return ROLE_JURY  # auth disabled
        if token is None:
            return None
        return self.tokens.get(token)

    def _audit_path(self, match_id: str) -> Path:
        return self.audit_dir / f"{match_id}.audit.jsonl"

    def _session(self, match_id: str) -> MatchSession:
        if match_id not in self._matches:
            raise UnknownMatch(f"no session for match {match_id!r}")
        return self._matches[match_id]

    # -- endpoints -----------------------------------------------------------

    def open_match(self, match_id: str) -> dict[str, Any]:
        if not match_id:
            raise ValidationFailed("match_id must be non-empty")
        if match_id in self._matches:
            return {"match_id": match_id, "already_open": True}
        path = self._audit_path(match_id)
        session = MatchSession(
            engine=MatchEngine(match_id, self.config, AuditLog(path)),
            audit_path=path,
        )
        self._matches[match_id] = session
        if path.exists():
            self._restore_session(session)
        return {"match_id": match_id, "already_open": False}

    def _restore_session(self, session: MatchSession) -> None:
        """Rebuild queue and score state from the audit file (source of truth)."""
        engine = session.engine
        entries = engine.audit.entries()
        scores, finals = replay_final_scores(entries)
        engine._seen = {e.event_id for _, e in entries}
        engine._finalized = dict(finals)
        engine._scores = dict(scores)
        t_w = self.config.fusion.threshold_for(None)
        for _, entry in entries:
            if entry.decision_flow != FLOW_DEFERRED or entry.event_id in finals:
                continue
            verdict = robust_award(
                Interval(entry.impact_lo, entry.impact_hi),
                Interval(entry.p_lo, entry.p_hi),
                t_w,
                self.config.tau,
                entry.event_id,
            )
            session.restored_verdicts[entry.event_id] = verdict
            session.restored_pending[entry.event_id] = {
                "event_id": entry.event_id,
                "t_event": entry.ts_ms,
                "athlete_id": None,
                "event_type": None,
                "explanation": verdict.explanation,
                "impact_lo": entry.impact_lo,
                "impact_hi": entry.impact_hi,
                "p_lo": entry.p_lo,
                "p_hi": entry.p_hi,
                "t_w": t_w,
                "tau": self.config.tau,
                "band": verdict.band.value,
                "entropy_nats": entry.entropy_nats,
                "saliency": None,
            }
            self._event_index[entry.event_id] = engine.match_id
        for event_id in engine._seen:
            self._event_index.setdefault(event_id, engine.match_id)

    def ingest(self, match_id: str, event_payload: dict[str, Any]) -> dict[str, Any]:
        """Enqueue one event into the match's engine loop; returns the ack."""
        if match_id not in self._matches:
            raise SessionClosed(f"no open session for match {match_id!r}")
        session = self._matches[match_id]
        event = event_from_dict(event_payload)
        with session.lock:
            if event.event_id in self._event_index:
                raise ValidationFailed(f"duplicate event_id {event.event_id!r}")
            verdict = session.engine.process(event)
            self._event_index[event.event_id] = match_id
        payload = verdict_to_dict(verdict)
        if verdict.action.value == "review_required":
            t_w = self.config.fusion.threshold_for(event.annotation.meta.get("division"))
            pending = next(
                p for p in session.engine.pending_reviews() if p.event.event_id == event.event_id
            )
            self._broadcast("review_item", _review_item_payload(pending, t_w, self.config.tau))
        else:
            self._broadcast("verdict", payload)
        return {"event_id": event.event_id, "verdict": payload}

    def review_queue(self, match_id: str) -> list[dict[str, Any]]:
        """Pending review items ordered by event time."""
        session = self._session(match_id)
        with session.lock:
            items = [
                _review_item_payload(
                    p,
                    self.config.fusion.threshold_for(p.event.annotation.meta.get("division")),
                    self.config.tau,
                )
                for p in session.engine.pending_reviews()
            ]
            items.extend(session.restored_pending.values())
        items.sort(key=lambda item: (item["t_event"], item["event_id"]))
        return items

    def submit_override(
        self, event_id: str, action: str, reviewer: str, label: str | None = None
    ) -> dict[str, Any]:
        """Finalize a pending review with confirm or override(label)."""
        if event_id not in self._event_index:
            raise UnknownEvent(f"event {event_id!r} was never ingested")
        match_id = self._event_index[event_id]
        session = self._session(match_id)
        if action == "confirm":
            gate = Gate.confirm()
        elif action == "override":
            gate = Gate.override(label or "")
        else:
            raise ValidationFailed(f"unknown override action {action!r}")

        with session.lock:
            if event_id in session.restored_pending:
                final_label, seq = self._finalize_restored(session, event_id, gate, reviewer)
            else:
                final_label, seq = session.engine.finalize(event_id, gate, reviewer)
        payload = {
            "event_id": event_id,
            "final_label": final_label,
            "audit_seq": seq,
            "decision_flow": "human_confirm" if action == "confirm" else "human_override",
        }
        self._broadcast("verdict", payload)
        return payload

    def _finalize_restored(
        self, session: MatchSession, event_id: str, gate: Gate, reviewer: str
    ) -> tuple[str, int]:
        # Restored items carry no athlete context (not part of the audit
        # schema), so the finalized y_hat is the plain label.
        from .engine import apply_override

        verdict = session.restored_verdicts[event_id]
        item = session.restored_pending[event_id]
        final_label, entry = apply_override(
            verdict,
            gate,
            reviewer,
            ts_ms=max(item["t_event"], session.engine.audit.last_ts or 0),
            input_digest="",
            entropy_nats=item["entropy_nats"],
        )
        seq = session.engine.audit.append(entry)
        del session.restored_pending[event_id]
        del session.restored_verdicts[event_id]
        session.engine._finalized[event_id] = entry.y_hat
        return final_label, seq

    def metrics_snapshot(
        self, scope: str, filters: Mapping[str, str] | None = None
    ) -> dict[str, Any]:
        """Metrics document for one match (or ``global``); nulls where undefined."""
        filters = dict(filters or {})
        if scope == "global":
            match_ids = sorted(self._matches)
        elif scope in self._matches:
            match_ids = [scope]
        else:
            raise UnknownScope(f"unknown metrics scope {scope!r}")

        logs = []
        band_counts = {"green": 0, "yellow": 0, "red": 0}
        latency_pairs: list[tuple[float, float]] = []
        scores: dict[str, int] = {}
        outcomes: list[tuple[str, str, str]] = []
        pending = 0
        finalized = 0
        for mid in match_ids:
            session = self._matches[mid]
            with session.lock:
                logs.append(session.engine.match_log())
                for band, n in session.engine.band_counts().items():
                    band_counts[band] += n
                latency_pairs.extend(session.engine.latency_pairs())
                for athlete, pts in session.engine.scores().items():
                    scores[athlete] = scores.get(athlete, 0) + pts
                outcomes.extend(session.engine.outcomes())
                pending += len(session.engine.pending_reviews()) + len(session.restored_pending)
                finalized += len(session.engine.finalized())

        pairs = [
            (r.y_true, _ai_label(r.y_hat))
            for log in logs
            for r in log.records
            if r.y_true is not None
        ]
        agreement = analytics.agreement_rate(pairs) if pairs else None
        try:
            kappa = analytics.cohens_kappa(pairs) if pairs else None
        except DegenerateMarginals:
            kappa = None

        if latency_pairs:
            deltas, mean_latency = analytics.scoring_latency(
                [k for k, _ in latency_pairs], [s for _, s in latency_pairs]
            )
            trend = analytics.moving_average(deltas, LATENCY_TREND_WINDOW)
        else:
            mean_latency = None
            trend = []

        award_by_athlete: dict[str, list[int]] = {}
        for log in logs:
            for event, record in _paired_events(log):
                if filters.get("event") and event.label != filters["event"]:
                    continue
                award_by_athlete.setdefault(event.athlete_id or "?", []).append(
                    1 if record.y_hat.startswith("award:") else 0
                )
        group_means = {
            athlete: sum(flags) / len(flags) for athlete, flags in award_by_athlete.items() if flags
        }
        try:
            report = analytics.disparity(group_means, DISPARITY_THRESHOLD)
            disparity_doc = {
                "max_gap": report.max_gap,
                "threshold": report.threshold,
                "flagged": [list(pair) for pair in report.flagged],
            }
        except InsufficientGroups:
            disparity_doc = None

        distribution = None
        try:
            merged = _merge_logs(logs)
            labels, probs = analytics.event_distribution(
                merged,
                athlete_id=filters.get("athlete"),
                event_filter=filters.get("event"),
            )
            distribution = {"labels": list(labels), "probs": list(probs)}
        except EmptyInput:
            pass

        partition = None
        if outcomes:
            correct, error = analytics.partition_decisions(
                (event_id, y_true, _ai_label(y_hat)) for event_id, y_true, y_hat in outcomes
            )
            partition = {
                "correct": sorted(correct),
                "error": sorted(error),
            }

        return {
            "scope": scope,
            "events_total": sum(len(log.events) for log in logs),
            "agreement": agreement,
            "kappa": kappa,
            "latency_mean_ms": mean_latency,
            "latency_trend_ms": trend,
            "band_counts": band_counts,
            "disparity": disparity_doc,
            "event_distribution": distribution,
            "partition": partition,
            "scores": scores,
            "pending_reviews": pending,
            "finalized": finalized,
        }

    def audit_export(self, match_id: str) -> dict[str, Any]:
        """Raw audit lines plus the chain verification result."""
        session = self._session(match_id)
        with session.lock:
            lines = session.engine.audit.raw_lines()
            report = session.engine.audit.verify()
        return {
            "match_id": match_id,
            "lines": lines,
            "verified": report.ok,
            "first_bad_seq": report.first_bad_seq,
            "reason": report.reason,
        }


def _ai_label(y_hat: str) -> str:
    """Map engine y_hat labels into the referee verdict vocabulary."""
    if y_hat.startswith("award:") or y_hat in ("auto_award", "point_awarded", "award"):
        return "point_awarded"
    return "no_action"


def _paired_events(log):
    # records and events are both sorted by time and appended together
    for event, record in zip(log.events, sorted(log.records, key=lambda r: r.t_ms)):
        yield event, record


def _merge_logs(logs):
    from .core import MatchLog

    if len(logs) == 1:
        return logs[0]
    records = sorted((r for log in logs for r in log.records), key=lambda r: r.t_ms)
    events = sorted((e for log in logs for e in log.events), key=lambda e: e.t_ms)
    return MatchLog("__merged__", records, events)


# -- NDJSON socket layer -------------------------------------------------------


class _ClientHandler(socketserver.StreamRequestHandler):
    server: "NdjsonServer"

    def handle(self) -> None:
        core = self.server.core
        out_seq = 0
        in_seq = 0
        write_lock = threading.Lock()
        role: str | None = core.role_for_token(None) if not core.tokens else None
        subscribed = False

        def send(kind: str, payload: dict[str, Any]) -> None:
            nonlocal out_seq
            with write_lock:
                out_seq += 1
                line = json.dumps({"kind": kind, "payload": payload, "seq": out_seq})
                try:
                    self.wfile.write(line.encode("utf-8") + b"\n")
                    self.wfile.flush()
                except OSError:
                    pass

        def on_broadcast(kind: str, payload: dict[str, Any]) -> None:
            send(kind, payload)

        try:
            for raw in self.rfile:
                line = raw.decode("utf-8").strip()
                if not line:
                    continue
                try:
                    message = json.loads(line)
                except json.JSONDecodeError:
                    send("error", {"code": "MalformedInput", "message": "not valid JSON"})
                    continue
                kind = message.get("kind")
                payload = message.get("payload") or {}
                seq = message.get("seq")
                if not isinstance(seq, int) or seq <= in_seq:
                    send("error", {"code": "ValidationFailed",
                                   "message": f"client seq must increase, got {seq!r}"})
                    continue
                in_seq = seq

                try:
                    if kind == "hello":
                        role = core.role_for_token(payload.get("token"))
                        if role is None:
                            send("error", {"code": "AuthFailed", "message": "unknown token"})
                        else:
                            send("ack", {"role": role})
                        continue
                    if role is None:
                        send("error", {"code": "AuthRequired", "message": "send hello first"})
                        continue
                    if kind == "open_match":
                        send("ack", core.open_match(payload["match_id"]))
                    elif kind in ("ingest", "event"):
                        ack = core.ingest(payload["match_id"], payload["event"])
                        send("ack", ack)
                    elif kind == "review_queue":
                        send("review_queue", {"items": core.review_queue(payload["match_id"])})
                    elif kind in ("submit_override", "override"):
                        if role not in OVERRIDE_ROLES:
                            send("error", {"code": "Forbidden",
                                           "message": f"role {role} cannot override"})
                            continue
                        result = core.submit_override(
                            payload["event_id"],
                            payload["action"],
                            payload.get("reviewer", "anonymous"),
                            payload.get("label"),
                        )
                        send("ack", result)
                    elif kind in ("metrics_snapshot", "metrics"):
                        send(
                            "metrics",
                            core.metrics_snapshot(payload.get("scope", "global"),
                                                  payload.get("filters")),
                        )
                    elif kind == "audit_export":
                        send("audit", core.audit_export(payload["match_id"]))
                    elif kind == "subscribe":
                        if not subscribed:
                            core.subscribe(on_broadcast)
                            subscribed = True
                        send("ack", {"subscribed": True})
                    else:
                        send("error", {"code": "UnknownKind", "message": f"unknown kind {kind!r}"})
                except RingsideError as exc:
                    send("error", {"code": type(exc).__name__, "message": str(exc)})
                except KeyError as exc:
                    send("error", {"code": "ValidationFailed",
                                   "message": f"missing payload field {exc}"})
        finally:
            if subscribed:
                core.unsubscribe(on_broadcast)


class NdjsonServer(socketserver.ThreadingTCPServer):
    """Threaded NDJSON-over-TCP server wrapping a :class:`GatewayCore`."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], core: GatewayCore) -> None:
        super().__init__(address, _ClientHandler)
        self.core = core

    @property
    def port(self) -> int:
        return self.server_address[1]


def serve(core: GatewayCore, host: str = "127.0.0.1", port: int = 0) -> NdjsonServer:
    """Start a server thread; returns the server (call ``shutdown()`` to stop)."""
    server = NdjsonServer((host, port), core)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def send_events_to_gateway(
    host: str, port: int, match_id: str, events: list[ScoringEvent], token: str | None = None
) -> list[dict[str, Any]]:
    """Minimal client: open the match and ingest events; returns the acks."""
    from .wire import event_to_dict

    acks = []
    with socket.create_connection((host, port)) as sock:
        fh = sock.makefile("rwb")
        seq = 0

        def call(kind: str, payload: dict[str, Any]) -> dict[str, Any]:
            nonlocal seq
            seq += 1
            fh.write(json.dumps({"kind": kind, "payload": payload, "seq": seq}).encode() + b"\n")
            fh.flush()
            return json.loads(fh.readline())

        if token is not None:
            call("hello", {"token": token})
        call("open_match", {"match_id": match_id})
        for event in events:
            acks.append(call("ingest", {"match_id": match_id, "event": event_to_dict(event)}))
    return acks
