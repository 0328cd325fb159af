"""Compile-stage optimizer passes.

Three semantics-preserving rewrites, each pure graph-to-graph and applied
to fixpoint: constant folding of initializer-only subgraphs, absorption of
per-channel subtract/multiply preprocessing into a following convolution,
and absorption of a constant multiplier into an adjacent fully connected
layer (either side).

Fusions fire only when the intermediate values have no other consumers,
so no duplication analysis is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import NumericError, UnknownPass
from ..graph.interp import eval_node
from ..graph.ir import ComputationGraph, GraphNode, TensorSpec, validate_graph


@dataclass
class PassReport:
    """Evidence trail for one pass application."""

    pass_name: str
    nodes_before: int
    nodes_after: int
    rewrites: list[tuple[list[str], str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pass_name": self.pass_name,
            "nodes_before": self.nodes_before,
            "nodes_after": self.nodes_after,
            "rewrites": [{"removed": list(r), "replacement": rep} for r, rep in self.rewrites],
        }


def prune_dead_initializers(graph: ComputationGraph) -> ComputationGraph:
    used = set(graph.outputs)
    for node in graph.nodes:
        used.update(node.inputs)
    return replace(graph, initializers=tuple(t for t in graph.initializers if t.name in used))


def fresh_name(base: str, taken: set[str]) -> str:
    name = base
    k = 1
    while name in taken:
        name = f"{base}.{k}"
        k += 1
    taken.add(name)
    return name


def all_value_names(graph: ComputationGraph) -> set[str]:
    names = {t.name for t in graph.inputs} | {t.name for t in graph.initializers}
    names |= {n.output for n in graph.nodes} | {n.id for n in graph.nodes}
    return names


def constant_fold(graph: ComputationGraph) -> tuple[ComputationGraph, PassReport]:
    """Evaluate every node whose inputs are all constants into an initializer.

    A single topological walk reaches the fixpoint: the constant set grows
    as folded outputs become constants themselves. Intermediate constants
    with no remaining consumers are pruned, so a maximal constant subgraph
    collapses to a single initializer per live output.
    """
    const_values: dict[str, np.ndarray] = {t.name: t.data for t in graph.initializers}
    kept_nodes: list[GraphNode] = []
    rewrites: list[tuple[list[str], str]] = []
    new_inits: list[TensorSpec] = list(graph.initializers)

    for node in graph.nodes:
        if all(name in const_values for name in node.inputs):
            value = eval_node(node, [const_values[name] for name in node.inputs])
            if not np.all(np.isfinite(value)):
                raise NumericError("non-finite value produced during folding", node.id)
            const_values[node.output] = value
            new_inits.append(TensorSpec(name=node.output, shape=value.shape, data=value))
            rewrites.append(([node.id], node.output))
        else:
            kept_nodes.append(node)

    out = prune_dead_initializers(
        replace(graph, nodes=tuple(kept_nodes), initializers=tuple(new_inits))
    )
    validate_graph(out)
    return out, PassReport("constant_fold", len(graph.nodes), len(out.nodes), rewrites)


def _const_per_channel(graph: ComputationGraph, name: str, channels: int) -> np.ndarray | None:
    spec = graph.initializer_map.get(name)
    if spec is None or spec.shape != (1, channels, 1, 1):
        return None
    return spec.data.reshape(channels)


def _single_consumer(graph: ComputationGraph, value: str, consumer: GraphNode) -> bool:
    if value in graph.outputs:
        return False
    users = graph.consumers_of(value)
    return len(users) == 1 and users[0] is consumer


def _fuse_norm_conv_once(graph: ComputationGraph) -> tuple[ComputationGraph, list[tuple[list[str], str]]]:
    for conv in graph.nodes:
        if conv.op_kind != "Conv2d":
            continue
        mul = graph.producer_map.get(conv.inputs[0])
        if mul is None or mul.op_kind != "Mul" or not _single_consumer(graph, mul.output, conv):
            continue
        w_spec = graph.initializer_map.get(conv.inputs[1])
        if w_spec is None:
            continue
        channels = w_spec.shape[1]

        sub, scale = None, None
        for a, b in ((mul.inputs[0], mul.inputs[1]), (mul.inputs[1], mul.inputs[0])):
            cand = graph.producer_map.get(a)
            s_vec = _const_per_channel(graph, b, channels)
            if cand is not None and cand.op_kind == "Sub" and s_vec is not None:
                sub, scale = cand, s_vec
                break
        if sub is None or not _single_consumer(graph, sub.output, mul):
            continue
        m_vec = _const_per_channel(graph, sub.inputs[1], channels)
        if m_vec is None:
            continue

        # Zero padding lives in the normalized domain; absorbing the
        # subtraction is only exact when nothing is padded or m is zero.
        from ..graph.shapes import _pair_attr

        ph, pw = _pair_attr(conv, "padding", 0)
        if (ph or pw) and np.any(m_vec != 0.0):
            continue

        w = w_spec.data
        b_vec = graph.initializer_map[conv.inputs[2]].data if len(conv.inputs) == 3 else np.zeros(w.shape[0])
        new_w = w * scale[None, :, None, None]
        new_b = b_vec - np.einsum("ochw,c->o", w, scale * m_vec)

        taken = all_value_names(graph)
        w_name = fresh_name(f"{conv.id}_w_fused", taken)
        b_name = fresh_name(f"{conv.id}_b_fused", taken)
        fused = GraphNode(
            id=conv.id,
            op_kind="Conv2d",
            inputs=(sub.inputs[0], w_name, b_name),
            output=conv.output,
            attrs=dict(conv.attrs),
        )
        nodes = tuple(
            fused if n is conv else n
            for n in graph.nodes
            if n is not sub and n is not mul
        )
        inits = graph.initializers + (
            TensorSpec(w_name, new_w.shape, new_w),
            TensorSpec(b_name, new_b.shape, new_b),
        )
        out = prune_dead_initializers(replace(graph, nodes=nodes, initializers=inits))
        return out, [([sub.id, mul.id], conv.id)]
    return graph, []


def fuse_normalization_into_conv(graph: ComputationGraph) -> tuple[ComputationGraph, PassReport]:
    """Rewrite Conv2d(Mul(Sub(x, m), s)) into one Conv2d.

    W'[o,c,:,:] = W[o,c,:,:] * s[c] and b'[o] = b[o] - sum_{c,kh,kw}
    W[o,c,kh,kw] * s[c] * m[c], with per-channel constants m and s of shape
    (1,C,1,1). Non-matching patterns are left untouched.
    """
    before = len(graph.nodes)
    rewrites: list[tuple[list[str], str]] = []
    while True:
        graph, found = _fuse_norm_conv_once(graph)
        if not found:
            break
        rewrites.extend(found)
    validate_graph(graph)
    return graph, PassReport("fuse_normalization_into_conv", before, len(graph.nodes), rewrites)


def _gemm_weight_bias(graph: ComputationGraph, gemm: GraphNode):
    w_spec = graph.initializer_map.get(gemm.inputs[1])
    if w_spec is None:
        return None, None
    b_spec = graph.initializer_map.get(gemm.inputs[2]) if len(gemm.inputs) == 3 else None
    if len(gemm.inputs) == 3 and b_spec is None:
        return None, None
    return w_spec, b_spec


def _scale_vector(graph: ComputationGraph, name: str, dim: int) -> np.ndarray | None:
    """Constant of shape (1,1) or (1,dim), as a length-1-or-dim vector."""
    spec = graph.initializer_map.get(name)
    if spec is None or spec.shape not in ((1, 1), (1, dim)):
        return None
    return spec.data.reshape(-1)


def _fuse_scale_gemm_once(graph: ComputationGraph) -> tuple[ComputationGraph, list[tuple[list[str], str]]]:
    # Direction 1: Mul(Gemm(x, W, b), alpha) -> scale output columns of W and b.
    for mul in graph.nodes:
        if mul.op_kind != "Mul":
            continue
        for gemm_val, alpha_name in ((mul.inputs[0], mul.inputs[1]), (mul.inputs[1], mul.inputs[0])):
            gemm = graph.producer_map.get(gemm_val)
            if gemm is None or gemm.op_kind != "Gemm" or not _single_consumer(graph, gemm.output, mul):
                continue
            w_spec, b_spec = _gemm_weight_bias(graph, gemm)
            if w_spec is None:
                continue
            n_out = w_spec.shape[0] if gemm.attrs.get("trans_b") else w_spec.shape[1]
            alpha = _scale_vector(graph, alpha_name, n_out)
            if alpha is None:
                continue
            w = w_spec.data
            new_w = w * alpha[:, None] if gemm.attrs.get("trans_b") else w * alpha[None, :]
            taken = all_value_names(graph)
            w_name = fresh_name(f"{gemm.id}_w_scaled", taken)
            new_inputs = [gemm.inputs[0], w_name]
            extra = [TensorSpec(w_name, new_w.shape, new_w)]
            if b_spec is not None:
                a_row = alpha.reshape((1,) * (b_spec.data.ndim - 1) + (-1,))
                new_b = b_spec.data * a_row
                b_name = fresh_name(f"{gemm.id}_b_scaled", taken)
                new_inputs.append(b_name)
                extra.append(TensorSpec(b_name, new_b.shape, new_b))
            fused = GraphNode(gemm.id, "Gemm", tuple(new_inputs), mul.output, dict(gemm.attrs))
            nodes = tuple(fused if n is gemm else n for n in graph.nodes if n is not mul)
            out = prune_dead_initializers(
                replace(graph, nodes=nodes, initializers=graph.initializers + tuple(extra))
            )
            return out, [([mul.id], gemm.id)]

    # Direction 2: Gemm(Mul(x, alpha), W, b) -> scale input rows of W.
    for gemm in graph.nodes:
        if gemm.op_kind != "Gemm" or gemm.attrs.get("trans_a"):
            continue
        mul = graph.producer_map.get(gemm.inputs[0])
        if mul is None or mul.op_kind != "Mul" or not _single_consumer(graph, mul.output, gemm):
            continue
        w_spec, b_spec = _gemm_weight_bias(graph, gemm)
        if w_spec is None:
            continue
        n_in = w_spec.shape[1] if gemm.attrs.get("trans_b") else w_spec.shape[0]
        for x_name, alpha_name in ((mul.inputs[0], mul.inputs[1]), (mul.inputs[1], mul.inputs[0])):
            if graph.initializer_map.get(alpha_name) is None:
                continue
            alpha = _scale_vector(graph, alpha_name, n_in)
            if alpha is None:
                continue
            w = w_spec.data
            new_w = w * alpha[None, :] if gemm.attrs.get("trans_b") else w * alpha[:, None]
            taken = all_value_names(graph)
            w_name = fresh_name(f"{gemm.id}_w_scaled", taken)
            new_inputs = [x_name, w_name] + list(gemm.inputs[2:])
            fused = GraphNode(gemm.id, "Gemm", tuple(new_inputs), gemm.output, dict(gemm.attrs))
            nodes = tuple(fused if n is gemm else n for n in graph.nodes if n is not mul)
            inits = graph.initializers + (TensorSpec(w_name, new_w.shape, new_w),)
            out = prune_dead_initializers(replace(graph, nodes=nodes, initializers=inits))
            return out, [([mul.id], gemm.id)]
    return graph, []


def fuse_scale_into_gemm(graph: ComputationGraph) -> tuple[ComputationGraph, PassReport]:
    """Absorb a constant multiplier into an adjacent fully connected layer.

    Post-scale Mul(Gemm(x,W,b), a) becomes Gemm(x, W*a, b*a); pre-scale
    Gemm(Mul(x,a), W, b) becomes Gemm(x, row-scaled W, b). The multiplier
    must be a (1,1) scalar or a per-column/per-feature (1,N) constant.
    """
    before = len(graph.nodes)
    rewrites: list[tuple[list[str], str]] = []
    while True:
        graph, found = _fuse_scale_gemm_once(graph)
        if not found:
            break
        rewrites.extend(found)
    validate_graph(graph)
    return graph, PassReport("fuse_scale_into_gemm", before, len(graph.nodes), rewrites)


PASSES = {
    "constant_fold": constant_fold,
    "fuse_normalization_into_conv": fuse_normalization_into_conv,
    "fuse_scale_into_gemm": fuse_scale_into_gemm,
}

# Short names accepted on the CLI surface.
PASS_ALIASES = {
    "fuse_norm_conv": "fuse_normalization_into_conv",
    "fuse_scale_gemm": "fuse_scale_into_gemm",
}

DEFAULT_PASSES = ["constant_fold", "fuse_normalization_into_conv", "fuse_scale_into_gemm"]


def optimize(graph: ComputationGraph, passes: list[str] | None = None) -> tuple[ComputationGraph, list[PassReport]]:
    """Apply the named passes in order, each to fixpoint."""
    reports: list[PassReport] = []
    for name in passes if passes is not None else DEFAULT_PASSES:
        canonical = PASS_ALIASES.get(name, name)
        fn = PASSES.get(canonical)
        if fn is None:
            raise UnknownPass(f"unknown pass {name!r}; known: {sorted(PASSES) + sorted(PASS_ALIASES)}")
        graph, report = fn(graph)
        reports.append(report)
    return graph, reports
