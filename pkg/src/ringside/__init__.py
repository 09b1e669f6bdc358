"""ringside: uncertainty-aware scoring decision engine for combat-sport officiating.

Fuses interval-valued sensor evidence, classifies validity under imprecise
probability, auto-awards points only when robustly justified, routes
ambiguous events to human review, and computes the officiating analytics
suite over the resulting decision logs.
"""

from .core import (
    AnnotationRecord,
    DecisionRecord,
    EnsemblePrediction,
    EventType,
    Interval,
    MatchLog,
    PoseSequence,
    ProbVector,
    RefVerdict,
    ScoringEvent,
    frames_to_ms,
    parse_annotation,
    serialize_annotation,
)
from .credal import (
    CredalResult,
    MarginBound,
    confidence_interval,
    credal_set,
    ensemble_mean,
    ensemble_variance,
    predictive_entropy,
    sigmoid_bounds,
    uncertainty_decompose,
)
from .engine import (
    Band,
    EngineConfig,
    Gate,
    MarginModel,
    MatchEngine,
    Verdict,
    VerdictAction,
    apply_override,
    confidence_band,
    record_latency,
    robust_award,
)
from .fusion import FusionConfig, SensorReading, fuse_interval, fuse_point
from .recognition import (
    ActionPrediction,
    AttentionWeights,
    GraphWeights,
    LayerWeights,
    SkeletonGraph,
    attention_forward,
    build_graph,
    gcn_forward,
    joint_heatmap,
    saliency_gradcam,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "ActionPrediction",
    "AttentionWeights",
    "Band",
    "CredalResult",
    "DecisionRecord",
    "EngineConfig",
    "EnsemblePrediction",
    "EventType",
    "FusionConfig",
    "Gate",
    "GraphWeights",
    "Interval",
    "LayerWeights",
    "MarginBound",
    "MarginModel",
    "MatchEngine",
    "MatchLog",
    "PoseSequence",
    "ProbVector",
    "RefVerdict",
    "ScoringEvent",
    "SensorReading",
    "SkeletonGraph",
    "Verdict",
    "VerdictAction",
    "apply_override",
    "attention_forward",
    "build_graph",
    "confidence_band",
    "confidence_interval",
    "credal_set",
    "ensemble_mean",
    "ensemble_variance",
    "frames_to_ms",
    "fuse_interval",
    "fuse_point",
    "gcn_forward",
    "joint_heatmap",
    "parse_annotation",
    "predictive_entropy",
    "record_latency",
    "robust_award",
    "saliency_gradcam",
    "serialize_annotation",
    "sigmoid_bounds",
    "uncertainty_decompose",
]
