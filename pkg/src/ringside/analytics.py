"""Officiating and athlete metrics: latency, agreement, kappa, fairness, trends.

All functions are pure aggregates over immutable snapshots. Cohen's kappa
uses population marginal products for the chance term; the moving average
warms up with prefix means so dashboard series stay aligned with their
inputs; F1 with zero precision and recall is defined as 0 (documented
convention) instead of erroring out to dashboards.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .core import MatchLog, ProbVector
from .errors import (
    DegenerateMarginals,
    DivisionByZero,
    EmptyInput,
    InsufficientGroups,
    InvalidArgument,
    InvalidWindow,
    LengthMismatch,
    NegativeLatency,
    UndefinedScore,
)

SKILL_LEVELS = ("Novice", "Intermediate", "Expert")
DEFAULT_SKILL_THRESHOLDS = {"Expert": 0.9, "Intermediate": 0.75}


@dataclass(frozen=True)
class RefereeProfile:
    """Longitudinal referee aggregates used by the education dashboards."""

    referee_id: str
    per_event_scores: Mapping[str, tuple[float, float, float]]  # event -> (P, R, F1)
    mean_latency: float
    agreement_history: tuple[float, ...]
    skill_level: str

    def __post_init__(self) -> None:
        if self.skill_level not in SKILL_LEVELS:
            raise InvalidArgument(f"unknown skill level {self.skill_level!r}")
        for event, scores in self.per_event_scores.items():
            for s in scores:
                if not 0.0 <= s <= 1.0:
                    raise InvalidArgument(f"score {s} for {event!r} outside [0, 1]")
        object.__setattr__(self, "per_event_scores", dict(self.per_event_scores))


@dataclass(frozen=True)
class AthleteProfile:
    """Per-athlete performance aggregates; fatigue markers are free-form reals."""

    athlete_id: str
    accuracy: float
    reaction_time: float
    technique_variety: float
    scoring_ratio: float
    fatigue_markers: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, ratio in (("accuracy", self.accuracy), ("scoring_ratio", self.scoring_ratio)):
            if not 0.0 <= ratio <= 1.0:
                raise InvalidArgument(f"{name} must be in [0, 1], got {ratio}")
        object.__setattr__(self, "fatigue_markers", dict(self.fatigue_markers))


def scoring_latency(
    kicks: Sequence[float], scores: Sequence[float]
) -> tuple[list[float], float]:
    """Paired deltas t_score - t_kick and their arithmetic mean."""
    if len(kicks) != len(scores):
        raise LengthMismatch(f"{len(kicks)} kicks vs {len(scores)} scores")
    if not kicks:
        raise EmptyInput("need at least one kick/score pair")
    deltas = []
    for kick, score in zip(kicks, scores):
        if score < kick:
            raise NegativeLatency(f"score at {score} precedes kick at {kick}")
        deltas.append(score - kick)
    return deltas, math.fsum(deltas) / len(deltas)


def agreement_rate(pairs: Sequence[tuple[Hashable, Hashable]]) -> float:
    """Fraction of (referee, AI) pairs with matching labels."""
    if not pairs:
        raise EmptyInput("agreement over zero events is undefined")
    return sum(1 for a, b in pairs if a == b) / len(pairs)


def accuracy(pairs: Sequence[tuple[Hashable, Hashable]]) -> float:
    """Match fraction of (prediction, truth) pairs."""
    if not pairs:
        raise DivisionByZero("accuracy over zero pairs is undefined")
    return sum(1 for a, b in pairs if a == b) / len(pairs)


def cohens_kappa(pairs: Sequence[tuple[Hashable, Hashable]]) -> float:
    """Chance-corrected agreement with marginal-product expected agreement."""
    if not pairs:
        raise EmptyInput("kappa over zero pairs is undefined")
    n = len(pairs)
    p_o = sum(1 for a, b in pairs if a == b) / n
    left = Counter(a for a, _ in pairs)
    right = Counter(b for _, b in pairs)
    labels = set(left) | set(right)
    p_e = math.fsum((left[l] / n) * (right[l] / n) for l in labels)
    if p_e >= 1.0:
        if p_o == 1.0:
            return 1.0
        raise DegenerateMarginals(f"chance agreement is 1 but observed is {p_o}")
    return (p_o - p_e) / (1.0 - p_e)


def classification_scores(
    tp: int,
    fp: int,
    fn: int,
    skill_thresholds: Mapping[str, float] | None = None,
) -> tuple[float, float, float, str]:
    """(precision, recall, F1, skill level). F1 := 0 when P = R = 0."""
    if min(tp, fp, fn) < 0:
        raise InvalidArgument("counts must be >= 0")
    if tp + fp == 0:
        raise UndefinedScore("precision undefined: tp + fp = 0")
    if tp + fn == 0:
        raise UndefinedScore("recall undefined: tp + fn = 0")
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0.0:
        warnings.warn("F1 undefined (P = R = 0); reporting 0 by convention", stacklevel=2)
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    thresholds = dict(DEFAULT_SKILL_THRESHOLDS if skill_thresholds is None else skill_thresholds)
    if f1 >= thresholds["Expert"]:
        level = "Expert"
    elif f1 >= thresholds["Intermediate"]:
        level = "Intermediate"
    else:
        level = "Novice"
    return precision, recall, f1, level


def efficiency_improvement(mu_before: float, mu_after: float) -> float:
    """Relative review-time improvement in percent: (before-after)/before * 100."""
    if mu_before <= 0:
        raise DivisionByZero(f"baseline mean must be > 0, got {mu_before}")
    return (mu_before - mu_after) / mu_before * 100.0


def override_reduction(rho_hist: float, rho_pilot: float) -> float:
    """Relative override-rate reduction in percent."""
    if rho_hist <= 0:
        raise DivisionByZero(f"historical rate must be > 0, got {rho_hist}")
    return (rho_hist - rho_pilot) / rho_hist * 100.0


def calibration_loss(model_conf: Sequence[float], consensus_conf: Sequence[float]) -> float:
    """Sum of squared gaps between model and referee-consensus confidence."""
    if len(model_conf) != len(consensus_conf):
        raise LengthMismatch(f"{len(model_conf)} model vs {len(consensus_conf)} consensus values")
    return math.fsum((p - t) ** 2 for p, t in zip(model_conf, consensus_conf))


def event_distribution(
    log: MatchLog, athlete_id: str | None = None, event_filter: str | None = None
) -> tuple[tuple[str, ...], ProbVector]:
    """Empirical distribution over event types, optionally filtered.

    Returns the sorted label tuple alongside the matching probabilities.
    """
    events = [
        e
        for e in log.events
        if (athlete_id is None or e.athlete_id == athlete_id)
        and (event_filter is None or e.label == event_filter)
    ]
    if not events:
        raise EmptyInput("no events after filtering")
    counts = Counter(e.label for e in events)
    labels = tuple(sorted(counts))
    return labels, ProbVector.normalized([counts[l] for l in labels])


def score_efficiency(points: float, valid_attempts: float) -> float:
    """Points per valid attempt; can exceed 1 (head kicks score several points)."""
    if valid_attempts <= 0:
        raise DivisionByZero(f"valid_attempts must be > 0, got {valid_attempts}")
    return points / valid_attempts


def hit_accuracy(valid_hits: float, total_hits: float) -> float:
    """Fraction of hits that were valid contacts."""
    if total_hits <= 0:
        raise DivisionByZero(f"total_hits must be > 0, got {total_hits}")
    if valid_hits < 0 or valid_hits > total_hits:
        raise InvalidArgument(f"valid_hits {valid_hits} outside [0, {total_hits}]")
    return valid_hits / total_hits


def moving_average(series: Sequence[float], window: int) -> list[float]:
    """Trailing mean; the first window-1 positions use the available prefix."""
    if not isinstance(window, int) or window < 1:
        raise InvalidWindow(f"window must be an integer >= 1, got {window}")
    out = []
    for i in range(len(series)):
        lo = max(0, i - window + 1)
        chunk = series[lo : i + 1]
        out.append(math.fsum(chunk) / len(chunk))
    return out


def consistency_score(joint_variances: Sequence[float]) -> float:
    """exp(-mean joint displacement variance), in (0, 1]."""
    if not joint_variances:
        raise InvalidArgument("need at least one joint variance")
    if any(v < 0 for v in joint_variances):
        raise InvalidArgument("variances must be >= 0")
    return math.exp(-math.fsum(joint_variances) / len(joint_variances))


def timing_deviation(t_planned: float, t_executed: float) -> float:
    """Absolute gap between planned and executed technique timing."""
    return abs(t_planned - t_executed)


@dataclass(frozen=True)
class DisparityReport:
    """Pairwise subgroup prediction gaps with threshold flags."""

    pairwise: Mapping[tuple[str, str], float]
    max_gap: float
    flagged: tuple[tuple[str, str], ...]
    threshold: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairwise", dict(self.pairwise))


def disparity(group_means: Mapping[str, float], threshold: float) -> DisparityReport:
    """Max pairwise |E[y_hat | G_i] - E[y_hat | G_j]|; gaps >= threshold are flagged."""
    if len(group_means) < 2:
        raise InsufficientGroups(f"need >= 2 groups, got {len(group_means)}")
    names = sorted(group_means)
    pairwise: dict[tuple[str, str], float] = {}
    flagged = []
    max_gap = 0.0
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            gap = abs(group_means[a] - group_means[b])
            pairwise[(a, b)] = gap
            max_gap = max(max_gap, gap)
            if gap >= threshold:
                flagged.append((a, b))
    return DisparityReport(
        pairwise=pairwise, max_gap=max_gap, flagged=tuple(flagged), threshold=threshold
    )


def partition_decisions(
    clips: Iterable[tuple[Hashable, Hashable, Hashable]],
) -> tuple[set[Hashable], set[Hashable]]:
    """Split (clip_id, truth, verdict) triples into correct and error id sets."""
    correct: set[Hashable] = set()
    error: set[Hashable] = set()
    for clip_id, y, y_hat in clips:
        (correct if y == y_hat else error).add(clip_id)
    return correct, error


def select_borderline(
    clips: Iterable[tuple[Hashable, float]], tau: float
) -> set[Hashable]:
    """Clip ids whose best class probability falls below tau (ambiguous set)."""
    return {clip_id for clip_id, max_prob in clips if max_prob < tau}


def export_match_csv(log: MatchLog) -> str:
    """Decision tuples as CSV for offline analysis (one row per record)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["match_id", "t_ms", "y_true", "y_hat", "confidence"])
    for record in log.records:
        writer.writerow(
            [log.match_id, record.t_ms, record.y_true or "", record.y_hat, record.confidence]
        )
    return buffer.getvalue()
