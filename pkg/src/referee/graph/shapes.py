"""Static shape inference over validated graphs.

Every value gets exactly one shape. Broadcasting is permitted only on
size-1 dimensions for Add/Sub/Mul; Conv2d output spatial dims follow
floor((in + 2*pad - kernel)/stride) + 1. Expand reads its target shape
from a constant-evaluable second input.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError
from .ir import MAX_RANK, ComputationGraph, GraphNode

Shape = tuple[int, ...]


def _broadcast_pair(a: Shape, b: Shape, node: GraphNode) -> Shape:
    if len(a) != len(b):
        raise ShapeError(f"rank mismatch {a} vs {b} (broadcast only on size-1 dims)", node.id)
    out = []
    for da, db in zip(a, b):
        if da == db or db == 1:
            out.append(da)
        elif da == 1:
            out.append(db)
        else:
            raise ShapeError(f"incompatible dims {a} vs {b}", node.id)
    return tuple(out)


def _pair_attr(node: GraphNode, key: str, default: int) -> tuple[int, int]:
    val = node.attrs.get(key, default)
    if isinstance(val, (list, tuple)):
        if len(val) != 2:
            raise ShapeError(f"{key} must be an int or a pair, got {val}", node.id)
        return int(val[0]), int(val[1])
    return int(val), int(val)


def _gemm_shape(shapes: list[Shape], node: GraphNode) -> Shape:
    a, b = shapes[0], shapes[1]
    if len(a) != 2 or len(b) != 2:
        raise ShapeError(f"Gemm operands must be rank-2, got {a} and {b}", node.id)
    if node.attrs.get("trans_a"):
        a = (a[1], a[0])
    if node.attrs.get("trans_b"):
        b = (b[1], b[0])
    if a[1] != b[0]:
        raise ShapeError(f"Gemm inner dims differ: {a} x {b}", node.id)
    out = (a[0], b[1])
    if len(shapes) == 3:
        c = shapes[2]
        if len(c) > 2:
            raise ShapeError(f"Gemm bias rank must be <= 2, got {c}", node.id)
        padded = (1,) * (2 - len(c)) + c
        for dc, do in zip(padded, out):
            if dc != 1 and dc != do:
                raise ShapeError(f"Gemm bias {c} not broadcastable to {out}", node.id)
    return out


def _conv2d_shape(shapes: list[Shape], node: GraphNode) -> Shape:
    x, w = shapes[0], shapes[1]
    if len(x) != 4 or len(w) != 4:
        raise ShapeError(f"Conv2d expects rank-4 input and weight, got {x} and {w}", node.id)
    n, c, h, wd = x
    o, ci, kh, kw = w
    if ci != c:
        raise ShapeError(f"Conv2d channel mismatch: input {c} vs weight {ci}", node.id)
    sh, sw = _pair_attr(node, "stride", 1)
    ph, pw = _pair_attr(node, "padding", 0)
    if sh < 1 or sw < 1 or ph < 0 or pw < 0:
        raise ShapeError(f"bad stride/padding ({sh},{sw})/({ph},{pw})", node.id)
    hout = (h + 2 * ph - kh) // sh + 1
    wout = (wd + 2 * pw - kw) // sw + 1
    if hout < 1 or wout < 1:
        raise ShapeError(f"kernel {kh}x{kw} does not fit input {h}x{wd} with padding ({ph},{pw})", node.id)
    if len(shapes) == 3 and shapes[2] != (o,):
        raise ShapeError(f"Conv2d bias must have shape ({o},), got {shapes[2]}", node.id)
    return (n, o, hout, wout)


def _reshape_shape(shapes: list[Shape], node: GraphNode) -> Shape:
    target = [int(d) for d in node.attrs["shape"]]
    if target.count(-1) > 1:
        raise ShapeError(f"at most one -1 allowed in reshape target {target}", node.id)
    size = math.prod(shapes[0])
    if -1 in target:
        rest = math.prod(d for d in target if d != -1)
        if rest <= 0 or size % rest != 0:
            raise ShapeError(f"cannot infer -1 in {target} for {size} elements", node.id)
        target[target.index(-1)] = size // rest
    if any(d < 1 for d in target) or not 1 <= len(target) <= MAX_RANK:
        raise ShapeError(f"bad reshape target {target}", node.id)
    if math.prod(target) != size:
        raise ShapeError(f"reshape {shapes[0]} -> {target} changes element count", node.id)
    return tuple(target)


def _concat_shape(shapes: list[Shape], node: GraphNode) -> Shape:
    rank = len(shapes[0])
    if any(len(s) != rank for s in shapes):
        raise ShapeError(f"Concat inputs must share rank, got {shapes}", node.id)
    axis = int(node.attrs["axis"])
    if axis < 0:
        axis += rank
    if not 0 <= axis < rank:
        raise ShapeError(f"Concat axis {node.attrs['axis']} out of range for rank {rank}", node.id)
    for s in shapes[1:]:
        if any(i != axis and s[i] != shapes[0][i] for i in range(rank)):
            raise ShapeError(f"Concat non-axis dims differ: {shapes}", node.id)
    out = list(shapes[0])
    out[axis] = sum(s[axis] for s in shapes)
    return tuple(out)


def _slice_shape(shapes: list[Shape], node: GraphNode) -> Shape:
    x = shapes[0]
    axes = [int(a) for a in node.attrs["axes"]]
    starts = [int(s) for s in node.attrs["starts"]]
    ends = [int(e) for e in node.attrs["ends"]]
    if not len(axes) == len(starts) == len(ends):
        raise ShapeError("Slice axes/starts/ends must have equal length", node.id)
    out = list(x)
    for axis, start, end in zip(axes, starts, ends):
        if axis < 0:
            axis += len(x)
        if not 0 <= axis < len(x):
            raise ShapeError(f"Slice axis out of range for shape {x}", node.id)
        lo, hi, _ = slice(start, end).indices(x[axis])
        if hi <= lo:
            raise ShapeError(f"empty slice [{start}:{end}] on axis {axis} of {x}", node.id)
        out[axis] = hi - lo
    return tuple(out)


def _gather_shape(shapes: list[Shape], node: GraphNode) -> Shape:
    data, idx = shapes
    axis = int(node.attrs.get("axis", 0))
    if axis < 0:
        axis += len(data)
    if not 0 <= axis < len(data):
        raise ShapeError(f"Gather axis out of range for shape {data}", node.id)
    out = data[:axis] + idx + data[axis + 1:]
    if not 1 <= len(out) <= MAX_RANK:
        raise ShapeError(f"Gather result rank {len(out)} outside 1-{MAX_RANK}", node.id)
    return out


def _expandable(src: Shape, target: Shape, node: GraphNode) -> Shape:
    if len(target) < len(src) or not 1 <= len(target) <= MAX_RANK:
        raise ShapeError(f"cannot expand {src} to {target}", node.id)
    padded = (1,) * (len(target) - len(src)) + src
    for ds, dt in zip(padded, target):
        if ds != 1 and ds != dt:
            raise ShapeError(f"cannot expand {src} to {target}", node.id)
    return target


def infer_shapes(graph: ComputationGraph) -> dict[str, Shape]:
    """Map every value name to its (static) shape; raises ShapeError with node id."""
    shapes: dict[str, Shape] = {}
    for spec in graph.inputs:
        shapes[spec.name] = spec.shape
    for spec in graph.initializers:
        shapes[spec.name] = spec.shape

    const_memo: dict[str, np.ndarray | None] = {t.name: t.data for t in graph.initializers}

    def const_value(name: str) -> np.ndarray | None:
        # Values derivable statically: initializer data, Shape of any
        # static value, and anything computed from those.
        if name in const_memo:
            return const_memo[name]
        producer = graph.producer_map.get(name)
        if producer is None:
            const_memo[name] = None
            return None
        if producer.op_kind == "Shape":
            const_memo[name] = np.asarray(shapes[producer.inputs[0]], dtype=np.float64)
            return const_memo[name]
        ins = [const_value(v) for v in producer.inputs]
        if any(v is None for v in ins):
            const_memo[name] = None
            return None
        from .interp import eval_node

        const_memo[name] = eval_node(producer, ins)
        return const_memo[name]

    for node in graph.nodes:
        ins = [shapes[v] for v in node.inputs]
        kind = node.op_kind
        if kind in ("Add", "Sub", "Mul"):
            out = _broadcast_pair(ins[0], ins[1], node)
        elif kind == "Gemm":
            out = _gemm_shape(ins, node)
        elif kind == "Conv2d":
            out = _conv2d_shape(ins, node)
        elif kind in ("ReLU", "Sigmoid", "Softmax"):
            out = ins[0]
        elif kind == "Reshape":
            out = _reshape_shape(ins, node)
        elif kind == "Concat":
            out = _concat_shape(ins, node)
        elif kind == "Slice":
            out = _slice_shape(ins, node)
        elif kind == "Gather":
            out = _gather_shape(ins, node)
        elif kind == "Shape":
            out = (len(ins[0]),)
        elif kind == "Expand":
            if len(ins[1]) != 1:
                raise ShapeError(f"Expand target shape must be a 1-D tensor, got {ins[1]}", node.id)
            target_val = const_value(node.inputs[1])
            if target_val is None:
                raise ShapeError("Expand target shape must be constant-evaluable", node.id)
            target = tuple(int(round(float(d))) for d in target_val.ravel())
            if any(d < 1 for d in target):
                raise ShapeError(f"Expand target {target} has dims < 1", node.id)
            out = _expandable(ins[0], target, node)
        elif kind == "WeightedMerge":
            if any(s != ins[0] for s in ins):
                raise ShapeError(f"WeightedMerge inputs must share one shape, got {ins}", node.id)
            out = ins[0]
        else:  # pragma: no cover - op vocabulary is closed in GraphNode.check
            raise ShapeError(f"no shape rule for {kind}", node.id)
        shapes[node.output] = out
    return shapes
