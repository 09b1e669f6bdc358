"""Impairment classification with uncertainty flagging.

Feature formulas are artifact definitions: range of motion is the max-min
joint angle over the sequence, and the symmetry score is one minus the mean
normalized left/right trajectory discrepancy after centering and scale
normalization (so it is invariant to translation and uniform scaling).

Every uncertainty signal defers to humans: high entropy, a non-singleton
credal set, a low best probability, or low upper probability bounds each
independently flag the case for manual review.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import EnsemblePrediction, Interval, PoseSequence, ProbVector
from .credal import (
    confidence_interval,
    credal_set,
    ensemble_mean,
    predictive_entropy,
)
from .errors import (
    DegenerateSequence,
    DimensionMismatch,
    InvalidArgument,
    MissingJoint,
)

DEFAULT_CLASS_LABELS = ("A6", "A7", "A8")

ASSIGNED = "assigned"
FLAGGED = "flagged_for_review"


@dataclass(frozen=True)
class MotorFeatures:
    """Handcrafted motor-ability descriptors extracted from a pose sequence."""

    rom_hip: float
    rom_knee: float
    symmetry_score: float
    impact_delay: float
    extra: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, rom in (("rom_hip", self.rom_hip), ("rom_knee", self.rom_knee)):
            if not 0.0 <= rom <= 360.0:
                raise InvalidArgument(f"{name} must be in [0, 360] degrees, got {rom}")
        if not 0.0 <= self.symmetry_score <= 1.0:
            raise InvalidArgument(f"symmetry_score must be in [0, 1], got {self.symmetry_score}")
        if self.impact_delay < 0.0:
            raise InvalidArgument(f"impact_delay must be >= 0 s, got {self.impact_delay}")
        object.__setattr__(self, "extra", dict(self.extra))

    def as_vector(self) -> tuple[float, ...]:
        return (self.rom_hip, self.rom_knee, self.symmetry_score, self.impact_delay)


@dataclass(frozen=True)
class JointMap:
    """Joint indices required for feature extraction.

    Angle triples are (A, B, C): the angle is measured at B between the
    B->A and B->C segments. Left/right chains list corresponding joints for
    the symmetry comparison, mirrored across the vertical axis.
    """

    hip_triple: tuple[int, int, int]
    knee_triple: tuple[int, int, int]
    left_chain: tuple[int, ...]
    right_chain: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.left_chain) != len(self.right_chain) or not self.left_chain:
            raise InvalidArgument("left/right chains must be non-empty and equally long")

    def required_joints(self) -> set[int]:
        return set(self.hip_triple) | set(self.knee_triple) | set(self.left_chain) | set(self.right_chain)


@dataclass(frozen=True)
class ParaDecision:
    """Outcome of an impairment classification under uncertainty."""

    probs: ProbVector
    entropy_nats: float
    credal_set: frozenset[int]
    prob_bounds: tuple[Interval, ...] | None
    outcome: str  # ASSIGNED or FLAGGED
    assigned_class: int | None
    flag_reasons: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.outcome == ASSIGNED:
            if self.assigned_class is None:
                raise InvalidArgument("assigned outcome needs a class")
            if self.assigned_class != self.probs.argmax():
                raise InvalidArgument("assigned class must be the argmax")
            if self.credal_set != frozenset({self.assigned_class}):
                raise InvalidArgument("assigned outcome requires a singleton credal set")

    @property
    def assigned_label(self) -> str | None:
        if self.assigned_class is None:
            return None
        return self.labels[self.assigned_class]


def _joint_angle_deg(frames: np.ndarray, triple: tuple[int, int, int]) -> np.ndarray:
    """Per-frame angle at joint B of the (A, B, C) triple, in degrees."""
    a, b, c = triple
    v1 = frames[:, a, :] - frames[:, b, :]
    v2 = frames[:, c, :] - frames[:, b, :]
    n1 = np.linalg.norm(v1, axis=1)
    n2 = np.linalg.norm(v2, axis=1)
    safe = (n1 > 0) & (n2 > 0)
    cos = np.zeros(frames.shape[0])
    cos[safe] = (v1[safe] * v2[safe]).sum(axis=1) / (n1[safe] * n2[safe])
    return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))


def _normalize_frames(frames: np.ndarray) -> np.ndarray:
    """Center each frame on its joint centroid and divide by RMS spread."""
    centered = frames - frames.mean(axis=1, keepdims=True)
    scale = np.sqrt((centered**2).sum(axis=(1, 2)) / frames.shape[1])
    scale[scale == 0] = 1.0
    return centered / scale[:, None, None]


def extract_motor_features(
    x: PoseSequence,
    joints: JointMap,
    meta: Mapping[str, str] | None = None,
) -> MotorFeatures:
    """Compute ROM, symmetry and impact delay from a pose sequence.

    ``impact_delay`` is read from event timing metadata (key
    ``impact_delay_s``) because it is a property of the contact event, not
    of the pose geometry; it defaults to 0 when absent.
    """
    if x.t < 2:
        raise DegenerateSequence(f"need at least 2 frames for motor features, got {x.t}")
    missing = sorted(j for j in joints.required_joints() if j >= x.j or j < 0)
    if missing:
        raise MissingJoint(f"joint indices {missing} outside pose with {x.j} joints")

    hip_angles = _joint_angle_deg(x.frames, joints.hip_triple)
    knee_angles = _joint_angle_deg(x.frames, joints.knee_triple)
    rom_hip = float(hip_angles.max() - hip_angles.min())
    rom_knee = float(knee_angles.max() - knee_angles.min())

    norm = _normalize_frames(x.frames)
    left = norm[:, list(joints.left_chain), :]
    right = norm[:, list(joints.right_chain), :].copy()
    right[:, :, 0] = -right[:, :, 0]  # mirror across the vertical axis
    discrepancy = float(np.linalg.norm(left - right, axis=2).mean())
    symmetry = max(0.0, 1.0 - min(discrepancy, 1.0))

    delay = 0.0
    if meta and "impact_delay_s" in meta:
        try:
            delay = float(meta["impact_delay_s"])
        except ValueError as exc:
            raise InvalidArgument(f"impact_delay_s is not numeric: {meta['impact_delay_s']!r}") from exc
        if delay < 0:
            raise InvalidArgument(f"impact_delay_s must be >= 0, got {delay}")

    return MotorFeatures(
        rom_hip=rom_hip,
        rom_knee=rom_knee,
        symmetry_score=symmetry,
        impact_delay=delay,
    )


def classify_para(features: Sequence[float], weights: np.ndarray) -> ProbVector:
    """Softmax over linear class scores w_k . x (shift-invariant)."""
    w = np.asarray(weights, dtype=np.float64)
    f = np.asarray(features, dtype=np.float64)
    if w.ndim != 2 or f.ndim != 1 or w.shape[1] != f.shape[0]:
        raise DimensionMismatch(
            f"weights {w.shape} do not chain with feature vector of length {f.shape[0] if f.ndim == 1 else f.shape}"
        )
    scores = w @ f
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return ProbVector((exp / exp.sum()).tolist())


def decide_or_flag(
    prediction: ProbVector | EnsemblePrediction,
    entropy_threshold: float,
    theta: float,
    tau: float,
    bounds: Sequence[Interval] | None = None,
    labels: Sequence[str] | None = None,
) -> ParaDecision:
    """Assign the argmax class only when every uncertainty signal is quiet.

    Any of the following flags the case for manual review: entropy above
    the threshold, a credal set that is not a singleton, a best probability
    below tau, or (when bounds are known) a best upper bound below tau.
    When an ensemble is supplied and bounds are not, per-class bounds
    default to the ensemble min/max envelope.
    """
    if entropy_threshold < 0.0:
        raise InvalidArgument(f"entropy threshold must be >= 0, got {entropy_threshold}")
    if not (0.0 < tau <= 1.0):
        raise InvalidArgument(f"tau must be in (0, 1], got {tau}")
    if not (0.0 < theta <= 1.0):
        raise InvalidArgument(f"theta must be in (0, 1], got {theta}")

    if isinstance(prediction, EnsemblePrediction):
        probs = ensemble_mean(prediction)
        if bounds is None:
            bounds = tuple(
                confidence_interval(prediction, c) for c in range(prediction.num_classes)
            )
    else:
        probs = prediction
    if bounds is not None and len(bounds) != len(probs):
        raise DimensionMismatch(f"{len(bounds)} bounds for {len(probs)} classes")

    label_tuple = tuple(labels) if labels is not None else _default_labels(len(probs))
    if len(label_tuple) != len(probs):
        raise DimensionMismatch(f"{len(label_tuple)} labels for {len(probs)} classes")

    entropy = predictive_entropy(probs)
    credal = credal_set(probs, theta)
    reasons: list[str] = []
    if entropy > entropy_threshold:
        reasons.append(f"entropy {entropy:.4f} nats above threshold {entropy_threshold:.4f}")
    if len(credal) != 1:
        members = "{" + ", ".join(label_tuple[c] for c in sorted(credal)) + "}"
        reasons.append(f"credal set {members} at theta {theta:g} is not a singleton")
    if probs.max() < tau:
        reasons.append(f"best probability {probs.max():.4f} below tau {tau:g}")
    if bounds is not None and max(b.hi for b in bounds) < tau:
        reasons.append(f"best upper probability bound {max(b.hi for b in bounds):.4f} below tau {tau:g}")

    bounds_tuple = tuple(bounds) if bounds is not None else None
    if reasons:
        return ParaDecision(
            probs=probs,
            entropy_nats=entropy,
            credal_set=credal,
            prob_bounds=bounds_tuple,
            outcome=FLAGGED,
            assigned_class=None,
            flag_reasons=tuple(reasons),
            labels=label_tuple,
        )
    return ParaDecision(
        probs=probs,
        entropy_nats=entropy,
        credal_set=credal,
        prob_bounds=bounds_tuple,
        outcome=ASSIGNED,
        assigned_class=probs.argmax(),
        flag_reasons=(),
        labels=label_tuple,
    )


def _default_labels(k: int) -> tuple[str, ...]:
    if k == len(DEFAULT_CLASS_LABELS):
        return DEFAULT_CLASS_LABELS
    return tuple(f"C{i}" for i in range(k))


@dataclass(frozen=True)
class ParaConfig:
    """Classifier weights and decision thresholds, loaded from a config file."""

    labels: tuple[str, ...]
    weights: np.ndarray  # K x d
    entropy_threshold: float
    theta: float
    tau: float

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.weights.shape[0] != len(self.labels):
            raise InvalidArgument(
                f"weights must be K x d with K = {len(self.labels)}, got {self.weights.shape}"
            )


def load_para_config(path: str | Path) -> ParaConfig:
    """Load a classifier config from JSON.

    Schema::

        {
          "labels": ["A6", "A7", "A8"],
          "weights": [[...], [...], [...]],   # one row per class
          "entropy_threshold": 0.9,           # nats
          "theta": 0.35,
          "tau": 0.5
        }
    """
    try:
        obj = json.loads(Path(path).read_text("utf-8"))
        return ParaConfig(
            labels=tuple(obj["labels"]),
            weights=np.asarray(obj["weights"], dtype=np.float64),
            entropy_threshold=float(obj["entropy_threshold"]),
            theta=float(obj["theta"]),
            tau=float(obj["tau"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"bad classifier config {path}: {exc}") from exc


def classify_and_decide(
    features: Sequence[float], config: ParaConfig
) -> ParaDecision:
    """One-call pipeline: linear softmax then uncertainty-gated assignment."""
    probs = classify_para(features, config.weights)
    return decide_or_flag(
        probs,
        entropy_threshold=config.entropy_threshold,
        theta=config.theta,
        tau=config.tau,
        labels=config.labels,
    )
