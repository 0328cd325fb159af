"""Reference interpreter: deterministic float64 evaluation of a graph.

Used for inference against hidden test bundles and as the equivalence
oracle for optimizer passes. Pure function of (graph, inputs); no shared
mutable state.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from ..errors import NumericError, ShapeError, UnknownOpKind, ValidationError
from .ir import ComputationGraph, GraphNode


def _gemm(node: GraphNode, a: np.ndarray, b: np.ndarray, c: np.ndarray | None) -> np.ndarray:
    if node.attrs.get("trans_a"):
        a = a.T
    if node.attrs.get("trans_b"):
        b = b.T
    out = a @ b
    if c is not None:
        out = out + c
    return out


def _conv2d(node: GraphNode, x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    from .shapes import _pair_attr

    n, c, h, wd = x.shape
    o, ci, kh, kw = w.shape
    if ci != c:
        raise ShapeError(f"Conv2d channel mismatch: input {c} vs weight {ci}", node.id)
    sh, sw = _pair_attr(node, "stride", 1)
    ph, pw = _pair_attr(node, "padding", 0)
    hout = (h + 2 * ph - kh) // sh + 1
    wout = (wd + 2 * pw - kw) // sw + 1
    if hout < 1 or wout < 1:
        raise ShapeError(f"kernel {kh}x{kw} does not fit input {h}x{wd}", node.id)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.zeros((n, o, hout, wout), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + sh * hout:sh, j:j + sw * wout:sw]
            out += np.einsum("nchw,oc->nohw", patch, w[:, :, i, j])
    if b is not None:
        out += b.reshape(1, -1, 1, 1)
    return out


def _softmax(x: np.ndarray) -> np.ndarray:
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _resolve_reshape(x: np.ndarray, target: Sequence[int], node: GraphNode) -> np.ndarray:
    dims = [int(d) for d in target]
    if -1 in dims:
        rest = 1
        for d in dims:
            if d != -1:
                rest *= d
        if rest <= 0 or x.size % rest != 0:
            raise ShapeError(f"cannot infer -1 in reshape target {dims}", node.id)
        dims[dims.index(-1)] = x.size // rest
    try:
        return x.reshape(dims)
    except ValueError as exc:
        raise ShapeError(str(exc), node.id) from exc


def _indices(arr: np.ndarray, node: GraphNode) -> np.ndarray:
    idx = np.rint(arr).astype(np.int64)
    if not np.allclose(arr, idx, atol=1e-9):
        raise ShapeError("Gather indices must be exact integers", node.id)
    return idx


def eval_node(node: GraphNode, inputs: Sequence[np.ndarray]) -> np.ndarray:
    """Evaluate one node on concrete float64 arrays."""
    kind = node.op_kind
    with np.errstate(all="ignore"):
        if kind == "Add":
            return inputs[0] + inputs[1]
        if kind == "Sub":
            return inputs[0] - inputs[1]
        if kind == "Mul":
            return inputs[0] * inputs[1]
        if kind == "Gemm":
            return _gemm(node, inputs[0], inputs[1], inputs[2] if len(inputs) == 3 else None)
        if kind == "Conv2d":
            return _conv2d(node, inputs[0], inputs[1], inputs[2] if len(inputs) == 3 else None)
        if kind == "ReLU":
            return np.maximum(inputs[0], 0.0)
        if kind == "Sigmoid":
            return expit(inputs[0])
        if kind == "Softmax":
            return _softmax(inputs[0])
        if kind == "Reshape":
            return _resolve_reshape(inputs[0], node.attrs["shape"], node)
        if kind == "Concat":
            axis = int(node.attrs["axis"])
            return np.concatenate(inputs, axis=axis)
        if kind == "Slice":
            sel: list[slice] = [slice(None)] * inputs[0].ndim
            for axis, start, end in zip(node.attrs["axes"], node.attrs["starts"], node.attrs["ends"]):
                sel[int(axis)] = slice(int(start), int(end))
            return inputs[0][tuple(sel)]
        if kind == "Gather":
            axis = int(node.attrs.get("axis", 0))
            idx = _indices(inputs[1], node)
            if idx.size and (idx.min() < -inputs[0].shape[axis] or idx.max() >= inputs[0].shape[axis]):
                raise ShapeError(f"Gather index out of range for dim {inputs[0].shape[axis]}", node.id)
            return np.take(inputs[0], idx, axis=axis)
        if kind == "Shape":
            return np.asarray(inputs[0].shape, dtype=np.float64)
        if kind == "Expand":
            target = tuple(int(round(float(d))) for d in inputs[1].ravel())
            try:
                return np.broadcast_to(inputs[0], target).copy()
            except ValueError as exc:
                raise ShapeError(str(exc), node.id) from exc
        if kind == "WeightedMerge":
            out = np.zeros_like(inputs[0])
            for w, x in zip(node.attrs["weights"], inputs):
                out += float(w) * x
            return out
    raise UnknownOpKind(f"no kernel for op kind {kind!r}")


def run_capturing(graph: ComputationGraph, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Evaluate the whole graph and return every value, intermediates included."""
    values: dict[str, np.ndarray] = {}
    for spec in graph.inputs:
        if spec.name not in inputs:
            raise ValidationError(f"missing graph input {spec.name!r}")
        arr = np.asarray(inputs[spec.name], dtype=np.float64)
        if arr.shape != spec.shape:
            raise ShapeError(f"input {spec.name!r}: expected shape {spec.shape}, got {arr.shape}")
        values[spec.name] = arr
    extra = set(inputs) - set(values)
    if extra:
        raise ValidationError(f"unknown inputs supplied: {sorted(extra)}")
    for spec in graph.initializers:
        values[spec.name] = spec.data

    for node in graph.nodes:
        out = eval_node(node, [values[v] for v in node.inputs])
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite value produced", node.id)
        values[node.output] = out
    return values


def execute(graph: ComputationGraph, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Run inference; returns the declared outputs, keyed by name."""
    values = run_capturing(graph, inputs)
    return {name: values[name] for name in graph.outputs}
