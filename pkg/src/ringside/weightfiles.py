"""Versioned binary container for recognition weight fixtures.

Byte layout (all integers little-endian unsigned 32-bit unless noted):

========  =======================================================
offset    field
========  =======================================================
0         magic ``b"SKWB"``
4         format version (currently 1)
8         kind: u8, 0 = graph-conv bundle, 1 = attention bundle
9..11     reserved, zero
========  =======================================================

Graph-conv payload (kind 0)::

    u32 num_layers L, u32 num_partitions K, u32 num_classes
    u32 width[L+1]                 # feature width chain
    u8  activation[L]              # 0 = identity, 1 = relu
    f64 W[l][k]  (width[l] x width[l+1], row-major)   for l in 0..L-1, k in 0..K-1
    f64 head     (width[L] x num_classes, row-major)

Attention payload (kind 1)::

    u32 input_width, u32 d_model, u32 d_k, u32 num_classes, u32 max_frames
    f64 w_embed (input_width x d_model)
    f64 pos     (max_frames x d_model)
    f64 wq, wk  (d_model x d_k)
    f64 wv      (d_model x d_model)
    f64 head    (d_model x num_classes)

All floats are IEEE-754 binary64, little-endian, row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import MalformedInput
from .recognition import AttentionWeights, GraphWeights, LayerWeights

MAGIC = b"SKWB"
VERSION = 1
KIND_GRAPH = 0
KIND_ATTENTION = 1

_ACT_CODES = {"identity": 0, "relu": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


def _write_matrix(out: bytearray, m: np.ndarray) -> None:
    out += np.ascontiguousarray(m, dtype="<f8").tobytes()


class _Reader:
    def __init__(self, data: bytes, path: str) -> None:
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise MalformedInput(f"{self.path}: truncated weight file")
        chunk = self.data[self.off : self.off + n]
        self.off += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        raw = self.take(rows * cols * 8)
        return np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()


def write_graph_weights(path: str | Path, weights: GraphWeights) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<B3x", KIND_GRAPH)
    layers = weights.layers
    k = len(layers[0].partitions)
    out += struct.pack("<III", len(layers), k, weights.num_classes)
    widths = [layers[0].in_width] + [layer.out_width for layer in layers]
    out += struct.pack(f"<{len(widths)}I", *widths)
    out += bytes(_ACT_CODES[layer.activation] for layer in layers)
    for layer in layers:
        for w in layer.partitions:
            _write_matrix(out, w)
    _write_matrix(out, weights.head)
    Path(path).write_bytes(bytes(out))


def write_attention_weights(path: str | Path, weights: AttentionWeights) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<B3x", KIND_ATTENTION)
    out += struct.pack(
        "<IIIII",
        weights.w_embed.shape[0],
        weights.d_model,
        weights.d_k,
        weights.num_classes,
        weights.pos.shape[0],
    )
    for m in (weights.w_embed, weights.pos, weights.wq, weights.wk, weights.wv, weights.head):
        _write_matrix(out, m)
    Path(path).write_bytes(bytes(out))


def _read_header(reader: _Reader) -> int:
    if reader.take(4) != MAGIC:
        raise MalformedInput(f"{reader.path}: bad magic, not a weight fixture")
    version = reader.u32()
    if version != VERSION:
        raise MalformedInput(f"{reader.path}: unsupported weight format version {version}")
    kind = struct.unpack("<B3x", reader.take(4))[0]
    return kind


def read_weights(path: str | Path) -> GraphWeights | AttentionWeights:
    """Read either bundle kind; dispatch on the header's kind byte."""
    reader = _Reader(Path(path).read_bytes(), str(path))
    kind = _read_header(reader)
    if kind == KIND_GRAPH:
        return _read_graph(reader)
    if kind == KIND_ATTENTION:
        return _read_attention(reader)
    raise MalformedInput(f"{path}: unknown weight bundle kind {kind}")


def read_graph_weights(path: str | Path) -> GraphWeights:
    weights = read_weights(path)
    if not isinstance(weights, GraphWeights):
        raise MalformedInput(f"{path}: expected a graph-conv bundle")
    return weights


def read_attention_weights(path: str | Path) -> AttentionWeights:
    weights = read_weights(path)
    if not isinstance(weights, AttentionWeights):
        raise MalformedInput(f"{path}: expected an attention bundle")
    return weights


def _read_graph(reader: _Reader) -> GraphWeights:
    n_layers, n_partitions, n_classes = (reader.u32() for _ in range(3))
    if n_layers < 1 or n_partitions < 1 or n_classes < 1:
        raise MalformedInput(f"{reader.path}: degenerate graph bundle header")
    widths = [reader.u32() for _ in range(n_layers + 1)]
    act_codes = reader.take(n_layers)
    layers = []
    for l in range(n_layers):
        code = act_codes[l]
        if code not in _ACT_NAMES:
            raise MalformedInput(f"{reader.path}: unknown activation code {code}")
        mats = tuple(reader.matrix(widths[l], widths[l + 1]) for _ in range(n_partitions))
        layers.append(LayerWeights(partitions=mats, activation=_ACT_NAMES[code]))
    head = reader.matrix(widths[-1], n_classes)
    return GraphWeights(layers=tuple(layers), head=head)


def _read_attention(reader: _Reader) -> AttentionWeights:
    input_width, d_model, d_k, n_classes, max_frames = (reader.u32() for _ in range(5))
    if min(input_width, d_model, d_k, n_classes, max_frames) < 1:
        raise MalformedInput(f"{reader.path}: degenerate attention bundle header")
    return AttentionWeights(
        w_embed=reader.matrix(input_width, d_model),
        pos=reader.matrix(max_frames, d_model),
        wq=reader.matrix(d_model, d_k),
        wk=reader.matrix(d_model, d_k),
        wv=reader.matrix(d_model, d_model),
        head=reader.matrix(d_model, n_classes),
    )
