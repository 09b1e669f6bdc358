"""Append-only, hash-chained audit log (JSON-Lines, one file per match).

Each line carries exactly the fields
``{seq, ts_ms, event_id, input_digest, y_hat, entropy_nats, decision_flow,
override_by, impact_lo, impact_hi, p_lo, p_hi, prev_hash}``
where ``prev_hash`` is the SHA-256 hex digest of the previous line's exact
bytes (a 64-zero genesis value for the first line). Any edit to a line
breaks the chain for every later line, which is what verification checks.

A prev-hash chain cannot protect its own final line, so every append also
rewrites a sidecar head record (``<file>.head``) holding the expected
length and tail hash; verification checks the chain and the anchor, which
makes in-place edits of any line, including the last, detectable.

The log is the source of truth: final match scores are reconstructed from
the finalized entries alone (see :func:`replay_final_scores`).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import OutOfOrderTimestamp, StorageFailure

GENESIS_HASH = "0" * 64

AUDIT_FIELDS = (
    "seq",
    "ts_ms",
    "event_id",
    "input_digest",
    "y_hat",
    "entropy_nats",
    "decision_flow",
    "override_by",
    "impact_lo",
    "impact_hi",
    "p_lo",
    "p_hi",
    "prev_hash",
)

FLOW_AI_FINAL = "ai_final"
FLOW_HUMAN_OVERRIDE = "human_override"
FLOW_HUMAN_CONFIRM = "human_confirm"
FLOW_DEFERRED = "deferred"

FINAL_FLOWS = frozenset({FLOW_AI_FINAL, FLOW_HUMAN_OVERRIDE, FLOW_HUMAN_CONFIRM})

AWARD_PREFIX = "award:"


@dataclass(frozen=True)
class AuditEntry:
    """One immutable audit row (sequence and chain hash are store-assigned)."""

    ts_ms: int
    event_id: str
    input_digest: str
    y_hat: str
    entropy_nats: float
    decision_flow: str
    override_by: str | None
    impact_lo: float
    impact_hi: float
    p_lo: float
    p_hi: float


@dataclass(frozen=True)
class ChainReport:
    """Outcome of verifying an audit file."""

    ok: bool
    length: int
    first_bad_seq: int | None = None
    reason: str | None = None


def _line_hash(line: str) -> str:
    return hashlib.sha256(line.encode("utf-8")).hexdigest()


def _serialize(seq: int, entry: AuditEntry, prev_hash: str) -> str:
    record = {
        "seq": seq,
        "ts_ms": entry.ts_ms,
        "event_id": entry.event_id,
        "input_digest": entry.input_digest,
        "y_hat": entry.y_hat,
        "entropy_nats": entry.entropy_nats,
        "decision_flow": entry.decision_flow,
        "override_by": entry.override_by,
        "impact_lo": entry.impact_lo,
        "impact_hi": entry.impact_hi,
        "p_lo": entry.p_lo,
        "p_hi": entry.p_hi,
        "prev_hash": prev_hash,
    }
    return json.dumps(record, separators=(",", ":"))


def _entry_from_record(record: dict) -> AuditEntry:
    return AuditEntry(
        ts_ms=record["ts_ms"],
        event_id=record["event_id"],
        input_digest=record["input_digest"],
        y_hat=record["y_hat"],
        entropy_nats=record["entropy_nats"],
        decision_flow=record["decision_flow"],
        override_by=record["override_by"],
        impact_lo=record["impact_lo"],
        impact_hi=record["impact_hi"],
        p_lo=record["p_lo"],
        p_hi=record["p_hi"],
    )


def verify_lines(lines: list[str], expected_head: str | None = None) -> ChainReport:
    """Check sequence continuity, timestamp order and the hash chain.

    ``expected_head`` anchors the tail: when given, the hash of the final
    line must equal it (otherwise an in-place edit of the last line would
    be invisible to the chain).
    """
    prev_hash = GENESIS_HASH
    prev_ts: int | None = None
    for i, line in enumerate(lines):
        seq = i + 1
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            return ChainReport(False, len(lines), seq, "line is not valid JSON")
        if not isinstance(record, dict) or tuple(record.keys()) != AUDIT_FIELDS:
            return ChainReport(False, len(lines), seq, "line does not carry the audit schema")
        if record["seq"] != seq:
            return ChainReport(False, len(lines), seq, f"sequence gap: expected {seq}, got {record['seq']}")
        if record["prev_hash"] != prev_hash:
            return ChainReport(False, len(lines), seq, "hash chain broken")
        if prev_ts is not None and record["ts_ms"] < prev_ts:
            return ChainReport(False, len(lines), seq, "timestamps decrease")
        prev_ts = record["ts_ms"]
        prev_hash = _line_hash(line)
    if expected_head is not None and prev_hash != expected_head:
        return ChainReport(False, len(lines), len(lines) or None, "tail hash does not match head anchor")
    return ChainReport(True, len(lines))


class AuditLog:
    """Single-writer append-only store backed by one JSON-Lines file.

    One logical event loop owns appends for a match; concurrent reads of
    already-written entries are safe because lines are never rewritten.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.head_path = self.path.with_suffix(self.path.suffix + ".head")
        self._prev_hash = GENESIS_HASH
        self._next_seq = 1
        self._last_ts: int | None = None
        if self.path.exists():
            lines = self._read_lines()
            report = verify_lines(lines, expected_head=self._read_head(len(lines)))
            if not report.ok:
                raise StorageFailure(
                    f"{self.path}: existing audit log fails verification at seq "
                    f"{report.first_bad_seq}: {report.reason}"
                )
            if lines:
                self._prev_hash = _line_hash(lines[-1])
                self._next_seq = len(lines) + 1
                self._last_ts = json.loads(lines[-1])["ts_ms"]

    def _read_lines(self) -> list[str]:
        try:
            text = self.path.read_text("utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot read audit log {self.path}: {exc}") from exc
        return text.splitlines()

    def _read_head(self, length: int) -> str | None:
        anchor = _load_head(self.head_path)
        if anchor is None:
            return None
        anchored_length, head = anchor
        if anchored_length != length:
            raise StorageFailure(
                f"{self.path}: head anchor records {anchored_length} lines, file has {length}"
            )
        return head

    def _write_head(self) -> None:
        body = json.dumps({"length": self._next_seq - 1, "head": self._prev_hash})
        try:
            self.head_path.write_text(body + "\n", encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot write head anchor {self.head_path}: {exc}") from exc

    @property
    def last_ts(self) -> int | None:
        return self._last_ts

    def append(self, entry: AuditEntry) -> int:
        """Persist one entry; returns its sequence number (strictly increasing)."""
        if self._last_ts is not None and entry.ts_ms < self._last_ts:
            raise OutOfOrderTimestamp(
                f"entry at {entry.ts_ms} ms precedes last entry at {self._last_ts} ms"
            )
        seq = self._next_seq
        line = _serialize(seq, entry, self._prev_hash)
        try:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
        except OSError as exc:
            raise StorageFailure(f"cannot append to audit log {self.path}: {exc}") from exc
        self._prev_hash = _line_hash(line)
        self._next_seq = seq + 1
        self._last_ts = entry.ts_ms
        self._write_head()
        return seq

    def entries(self) -> list[tuple[int, AuditEntry]]:
        """Read back all entries, bit-faithful to what was appended."""
        out = []
        for line in self._read_lines():
            record = json.loads(line)
            out.append((record["seq"], _entry_from_record(record)))
        return out

    def raw_lines(self) -> list[str]:
        return self._read_lines()

    def verify(self) -> ChainReport:
        """Verify against the live chain head (catches edits to any line)."""
        return verify_lines(self._read_lines(), expected_head=self._prev_hash)


def _load_head(head_path: Path) -> tuple[int, str] | None:
    if not head_path.exists():
        return None
    try:
        record = json.loads(head_path.read_text("utf-8"))
        return int(record["length"]), str(record["head"])
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise StorageFailure(f"unreadable head anchor {head_path}: {exc}") from exc


def verify_file(path: str | Path) -> ChainReport:
    """Cold verification of a log file plus its head anchor when present."""
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise StorageFailure(f"cannot read audit log {path}: {exc}") from exc
    lines = text.splitlines()
    anchor = _load_head(path.with_suffix(path.suffix + ".head"))
    if anchor is not None:
        length, head = anchor
        if length != len(lines):
            return ChainReport(False, len(lines), len(lines) or None,
                               f"head anchor records {length} lines, file has {len(lines)}")
        return verify_lines(lines, expected_head=head)
    return verify_lines(lines)


def encode_award(athlete_id: str, points: int) -> str:
    """y_hat label for a granted point, self-sufficient for score replay."""
    return f"{AWARD_PREFIX}{athlete_id}:{points}"


def decode_award(y_hat: str) -> tuple[str, int] | None:
    """Parse an award label back into (athlete_id, points); None if not an award."""
    if not y_hat.startswith(AWARD_PREFIX):
        return None
    athlete, _, points = y_hat[len(AWARD_PREFIX):].rpartition(":")
    if not athlete:
        return None
    try:
        return athlete, int(points)
    except ValueError:
        return None


def replay_final_scores(
    entries: list[tuple[int, AuditEntry]],
) -> tuple[dict[str, int], dict[str, str]]:
    """Reconstruct final scores and per-event final labels from the log alone.

    Only entries whose decision_flow is final count; deferred rows mark an
    event as pending until a final row for the same event_id appears.
    """
    scores: dict[str, int] = {}
    finals: dict[str, str] = {}
    for _, entry in entries:
        if entry.decision_flow not in FINAL_FLOWS:
            continue
        if entry.event_id in finals:  # exactly-once: first finalization wins
            continue
        finals[entry.event_id] = entry.y_hat
        award = decode_award(entry.y_hat)
        if award is not None:
            athlete, points = award
            scores[athlete] = scores.get(athlete, 0) + points
    return scores, finals
