"""Desk-scale deterministic perception over skeleton graphs.

Everything here is inference-only with fixture-loaded weights: a
partitioned graph-convolution forward pass, a single-head scaled
dot-product attention encoder over frame tokens, and saliency export
(gradient-weighted class-activation maps plus joint heatmaps).

Graph layout
------------
A skeleton is an undirected joint graph with three partitions:

* ``self``      - identity links (each joint to itself),
* ``spatial``   - anatomical edges from the skeleton spec,
* ``temporal``  - self-links across adjacent frames (window ``w``).

Each partition's aggregation matrix is renormalized as
``D^{-1/2} (A + I) D^{-1/2}``, which keeps the spectrum within [-1, 1].
The temporal partition mixes each joint with the same joint in frames at
distance 1..w (mean over existing neighbors); the self and spatial
partitions act per frame.

Masking: joints invalid in every frame are removed from the graph before
normalization, and per-frame invalid joints contribute zero to every
aggregation and to pooling, so a fully masked joint is indistinguishable
from one that was never in the skeleton spec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import PoseSequence, ProbVector
from .errors import (
    DimensionMismatch,
    InvalidArgument,
    InvalidEdge,
    NonFiniteActivation,
    ShapeMismatch,
)

PARTITIONS = ("self", "spatial", "temporal")

# 18-joint skeleton spec (nose, neck, shoulders/elbows/wrists, hips/knees/
# ankles, eyes, ears), anatomical edges only.
STANDARD_SKELETON_18: tuple[tuple[int, int], ...] = (
    (0, 1),
    (1, 2), (2, 3), (3, 4),
    (1, 5), (5, 6), (6, 7),
    (1, 8), (8, 9), (9, 10),
    (1, 11), (11, 12), (12, 13),
    (0, 14), (14, 16),
    (0, 15), (15, 17),
)

ACTIVATIONS = ("identity", "relu")


def _renormalize(adj: np.ndarray) -> np.ndarray:
    """Symmetric renormalization D^{-1/2} (A + I) D^{-1/2}."""
    a_hat = adj + np.eye(adj.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


@dataclass(frozen=True)
class SkeletonGraph:
    """Joint graph with self/spatial/temporal partitions and their normalized forms."""

    num_joints: int
    temporal_window: int
    partitions: tuple[np.ndarray, ...]  # raw 0/1 matrices, order = PARTITIONS
    normalized: tuple[np.ndarray, ...]

    @property
    def num_partitions(self) -> int:
        return len(self.partitions)


def build_graph(
    skeleton_spec: Iterable[tuple[int, int]],
    num_joints: int,
    temporal_window: int = 1,
) -> SkeletonGraph:
    """Build the three-partition skeleton graph from an anatomical edge list."""
    if num_joints < 1:
        raise InvalidArgument(f"need at least one joint, got {num_joints}")
    if temporal_window < 0:
        raise InvalidArgument(f"temporal window must be >= 0, got {temporal_window}")

    spatial = np.zeros((num_joints, num_joints))
    for edge in skeleton_spec:
        try:
            i, j = int(edge[0]), int(edge[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise InvalidEdge(f"edge {edge!r} is not a joint pair") from exc
        if not (0 <= i < num_joints and 0 <= j < num_joints):
            raise InvalidEdge(f"edge ({i}, {j}) references a joint outside [0, {num_joints})")
        spatial[i, j] = 1.0
        spatial[j, i] = 1.0

    self_part = np.eye(num_joints)
    temporal = np.eye(num_joints)  # joint-level projection of cross-frame self-links
    raw = (self_part, spatial, temporal)
    normalized = tuple(_renormalize(a) for a in raw)
    for m in raw + normalized:
        m.setflags(write=False)
    return SkeletonGraph(
        num_joints=num_joints,
        temporal_window=temporal_window,
        partitions=raw,
        normalized=normalized,
    )


@dataclass(frozen=True)
class LayerWeights:
    """One layer: a weight matrix per partition plus the activation tag."""

    partitions: tuple[np.ndarray, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise InvalidArgument(f"unknown activation {self.activation!r}")
        if not self.partitions:
            raise InvalidArgument("layer needs at least one partition matrix")
        shape = self.partitions[0].shape
        for w in self.partitions:
            if w.ndim != 2 or w.shape != shape:
                raise DimensionMismatch("all partition matrices must share one 2-D shape")
            if not np.isfinite(w).all():
                raise InvalidArgument("layer weights must be finite")

    @property
    def in_width(self) -> int:
        return self.partitions[0].shape[0]

    @property
    def out_width(self) -> int:
        return self.partitions[0].shape[1]


@dataclass(frozen=True)
class GraphWeights:
    """Full graph-convolution bundle: stacked layers plus the class head."""

    layers: tuple[LayerWeights, ...]
    head: np.ndarray  # final width x num_classes

    def __post_init__(self) -> None:
        if not self.layers:
            raise InvalidArgument("need at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_width != b.in_width:
                raise DimensionMismatch(
                    f"layer widths do not chain: {a.out_width} -> {b.in_width}"
                )
        if self.head.ndim != 2 or self.head.shape[0] != self.layers[-1].out_width:
            raise DimensionMismatch(
                f"head expects {self.layers[-1].out_width} features, got shape {self.head.shape}"
            )

    @property
    def num_classes(self) -> int:
        return self.head.shape[1]


@dataclass(frozen=True)
class AttentionWeights:
    """Single-head attention bundle over frame tokens.

    Token embedding is a linear map of the flattened (masked) frame plus a
    learned positional row: z_t = p_t W_embed + pos[t].
    """

    w_embed: np.ndarray  # (J*C) x d_model
    pos: np.ndarray      # T_max x d_model
    wq: np.ndarray       # d_model x d_k
    wk: np.ndarray       # d_model x d_k
    wv: np.ndarray       # d_model x d_model
    head: np.ndarray     # d_model x num_classes

    def __post_init__(self) -> None:
        d_model = self.w_embed.shape[1]
        if self.pos.shape[1] != d_model:
            raise DimensionMismatch("positional table width must equal d_model")
        if self.wq.shape != self.wk.shape or self.wq.shape[0] != d_model:
            raise DimensionMismatch("Q/K projections must be d_model x d_k")
        if self.wv.shape != (d_model, d_model):
            raise DimensionMismatch("V projection must be d_model x d_model")
        if self.head.shape[0] != d_model:
            raise DimensionMismatch("head must consume d_model features")

    @property
    def d_model(self) -> int:
        return self.w_embed.shape[1]

    @property
    def d_k(self) -> int:
        return self.wq.shape[1]

    @property
    def num_classes(self) -> int:
        return self.head.shape[1]


@dataclass(frozen=True)
class ActionPrediction:
    """Classifier output: class distribution, winning label, traces, saliency."""

    probs: ProbVector
    label: int
    per_frame_scores: tuple[float, ...]
    saliency: np.ndarray  # J x T, nonnegative

    def __post_init__(self) -> None:
        if self.label != self.probs.argmax():
            raise InvalidArgument("label must be the (lowest-index) argmax of probs")
        if (self.saliency < 0).any():
            raise InvalidArgument("saliency must be nonnegative")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax; invariant to constant shifts of the logits."""
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def _check_finite(arr: np.ndarray, where: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteActivation(f"non-finite values in {where}")


def _temporal_mix(h: np.ndarray, window: int) -> np.ndarray:
    """Mean over same-joint features in frames at distance 1..window."""
    t = h.shape[0]
    out = np.zeros_like(h)
    if window == 0 or t == 1:
        return out
    for ti in range(t):
        lo = max(0, ti - window)
        hi = min(t - 1, ti + window)
        count = hi - lo  # neighbors excluding ti itself
        if count == 0:
            continue
        total = h[lo : hi + 1].sum(axis=0) - h[ti]
        out[ti] = total / count
    return out


def _active_subgraph(graph: SkeletonGraph, active: np.ndarray) -> tuple[np.ndarray, ...]:
    """Restrict raw partitions to active joints and renormalize."""
    idx = np.flatnonzero(active)
    return tuple(_renormalize(a[np.ix_(idx, idx)]) for a in graph.partitions)


def _gcn_hidden(
    x: PoseSequence, graph: SkeletonGraph, weights: GraphWeights
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the stacked layers; returns (H_final, active joint index, frame mask)."""
    if x.j != graph.num_joints:
        raise DimensionMismatch(f"pose has {x.j} joints, graph expects {graph.num_joints}")
    if x.c != weights.layers[0].in_width:
        raise DimensionMismatch(
            f"pose features ({x.c}) do not match first layer width ({weights.layers[0].in_width})"
        )
    for layer in weights.layers:
        if len(layer.partitions) != graph.num_partitions:
            raise DimensionMismatch(
                f"layer has {len(layer.partitions)} partition matrices, graph has {graph.num_partitions}"
            )

    active = x.valid.any(axis=0)
    idx = np.flatnonzero(active)
    norms = _active_subgraph(graph, active)
    mask = x.valid[:, idx].astype(np.float64)  # T x J_active

    h = x.frames[:, idx, :] * mask[:, :, None]
    for layer in weights.layers:
        h = h * mask[:, :, None]  # invalid positions contribute zero to aggregation
        agg = np.zeros((h.shape[0], h.shape[1], layer.out_width))
        for name, a_norm, w in zip(PARTITIONS, norms, layer.partitions):
            mixed = _temporal_mix(h, graph.temporal_window) if name == "temporal" else h
            agg += np.einsum("ij,tjf->tif", a_norm, mixed) @ w
        h = np.maximum(agg, 0.0) if layer.activation == "relu" else agg
        _check_finite(h, "graph-conv layer output")
    return h, idx, mask


def _pool_and_classify(
    h: np.ndarray, mask: np.ndarray, head: np.ndarray
) -> tuple[ProbVector, int, tuple[float, ...]]:
    """Masked global average pool, class head, and the per-frame score trace."""
    n_valid = mask.sum()
    if n_valid > 0:
        pooled = (h * mask[:, :, None]).sum(axis=(0, 1)) / n_valid
    else:
        pooled = np.zeros(h.shape[2])
    probs_arr = softmax(pooled @ head)
    probs = ProbVector(probs_arr.tolist())
    label = probs.argmax()

    scores = []
    for t in range(h.shape[0]):
        n_t = mask[t].sum()
        pooled_t = (h[t] * mask[t][:, None]).sum(axis=0) / n_t if n_t > 0 else np.zeros(h.shape[2])
        scores.append(float(softmax(pooled_t @ head)[label]))
    return probs, label, tuple(scores)


def gcn_forward(x: PoseSequence, graph: SkeletonGraph, weights: GraphWeights) -> ActionPrediction:
    """Partitioned graph-convolution forward pass with softmax head.

    Saliency is the L2 norm of the final-layer features per (joint, frame),
    zero at masked positions and at joints absent from every frame.
    """
    h, idx, mask = _gcn_hidden(x, graph, weights)
    probs, label, scores = _pool_and_classify(h, mask, weights.head)

    saliency = np.zeros((x.j, x.t))
    norms = np.sqrt((h * h).sum(axis=2)) * mask  # T x J_active
    saliency[idx, :] = norms.T
    saliency.setflags(write=False)
    return ActionPrediction(probs=probs, label=label, per_frame_scores=scores, saliency=saliency)


def attention_forward(
    x: PoseSequence, weights: AttentionWeights
) -> tuple[ActionPrediction, np.ndarray]:
    """Single-head scaled dot-product attention over frame tokens.

    Returns the prediction plus the T x T attention matrix whose rows lie
    on the simplex. Saliency spreads each frame's received attention
    (column mean) across joints by input magnitude.
    """
    flat_width = x.j * x.c
    if weights.w_embed.shape[0] != flat_width:
        raise DimensionMismatch(
            f"embedding expects {weights.w_embed.shape[0]} inputs, pose provides {flat_width}"
        )
    if x.t > weights.pos.shape[0]:
        raise DimensionMismatch(
            f"sequence of {x.t} frames exceeds positional table of {weights.pos.shape[0]}"
        )

    masked = x.frames * x.valid[:, :, None]
    tokens = masked.reshape(x.t, flat_width) @ weights.w_embed + weights.pos[: x.t]
    _check_finite(tokens, "token embedding")

    q = tokens @ weights.wq
    k = tokens @ weights.wk
    v = tokens @ weights.wv
    scores = q @ k.T / math.sqrt(weights.d_k)
    attn = np.vstack([softmax(row) for row in scores])
    out = attn @ v
    _check_finite(out, "attention output")

    pooled = out.mean(axis=0)
    probs_arr = softmax(pooled @ weights.head)
    probs = ProbVector(probs_arr.tolist())
    label = probs.argmax()
    frame_scores = tuple(float(softmax(out[t] @ weights.head)[label]) for t in range(x.t))

    frame_weight = attn.mean(axis=0)  # attention received by each frame
    magnitude = np.sqrt((masked * masked).sum(axis=2))  # T x J
    saliency = (magnitude * frame_weight[:, None]).T
    saliency = np.ascontiguousarray(saliency)
    saliency.setflags(write=False)
    attn.setflags(write=False)
    prediction = ActionPrediction(
        probs=probs, label=label, per_frame_scores=frame_scores, saliency=saliency
    )
    return prediction, attn


def saliency_gradcam(
    activations: Sequence[np.ndarray], gradients: Sequence[np.ndarray]
) -> np.ndarray:
    """ReLU of gradient-weighted feature maps.

    Each channel weight is the mean of that channel's gradient map; the
    heatmap is ReLU(sum_k alpha_k A^k), so only positive influences remain.
    """
    if len(activations) != len(gradients):
        raise ShapeMismatch(
            f"{len(activations)} activation maps vs {len(gradients)} gradient maps"
        )
    if not activations:
        raise ShapeMismatch("need at least one feature map")
    shape = np.asarray(activations[0]).shape
    heatmap = np.zeros(shape)
    for a, g in zip(activations, gradients):
        a = np.asarray(a, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if a.shape != shape or g.shape != shape:
            raise ShapeMismatch("all feature/gradient maps must share one shape")
        heatmap += g.mean() * a
    return np.maximum(heatmap, 0.0)


def gradcam_maps(
    x: PoseSequence,
    graph: SkeletonGraph,
    weights: GraphWeights,
    class_idx: int | None = None,
    step: float = 1e-4,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Final-layer activation maps and finite-difference class-logit gradients.

    One J x T map per final-layer feature channel; gradients are central
    differences of the pooled class logit, so no autodiff dependency.
    """
    h, idx, mask = _gcn_hidden(x, graph, weights)
    if class_idx is None:
        probs, class_idx, _ = _pool_and_classify(h, mask, weights.head)

    def class_logit(hidden: np.ndarray) -> float:
        n_valid = mask.sum()
        if n_valid == 0:
            return 0.0
        pooled = (hidden * mask[:, :, None]).sum(axis=(0, 1)) / n_valid
        return float((pooled @ weights.head)[class_idx])

    n_channels = h.shape[2]
    activations: list[np.ndarray] = []
    gradients: list[np.ndarray] = []
    for ch in range(n_channels):
        act = np.zeros((x.j, x.t))
        act[idx, :] = h[:, :, ch].T
        activations.append(act)

        grad = np.zeros((x.j, x.t))
        for pos, joint in enumerate(idx):
            for t in range(x.t):
                bumped = h.copy()
                bumped[t, pos, ch] += step
                up = class_logit(bumped)
                bumped[t, pos, ch] -= 2 * step
                down = class_logit(bumped)
                grad[joint, t] = (up - down) / (2 * step)
        gradients.append(grad)
    return activations, gradients


def joint_heatmap(weights: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Per-joint time-averaged attention/saliency: H(j) = (1/T) sum_t w[j, t].

    ``mask`` may be per-joint (J,) or per-frame (T, J); masked entries
    contribute zero and fully masked joints map to exactly 0.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2:
        raise ShapeMismatch(f"expected a J x T matrix, got shape {w.shape}")
    if (w < 0).any():
        raise InvalidArgument("joint heatmap input must be nonnegative")
    j, t = w.shape
    if mask is None:
        return w.sum(axis=1) / t
    m = np.asarray(mask, dtype=bool)
    if m.shape == (j,):
        out = w.sum(axis=1) / t
        out[~m] = 0.0
        return out
    if m.shape == (t, j):
        out = (w * m.T).sum(axis=1) / t
        out[~m.any(axis=0)] = 0.0
        return out
    raise ShapeMismatch(f"mask shape {m.shape} matches neither (J,) nor (T, J)")
