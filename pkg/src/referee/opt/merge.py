"""Layer merging with symmetric outer-emphasis weights, plus the
imitation-error measurement used to judge a merge.

Only the measurement is provided here; gradient-based minimization of the
imitation objective is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DegenerateRange, EmptySet, IncompatibleLayers, ShapeError, ValidationError
from ..graph.interp import run_capturing
from ..graph.ir import ComputationGraph, GraphNode, TensorSpec, validate_graph
from .passes import PassReport, all_value_names, fresh_name, prune_dead_initializers

MERGEABLE_KINDS = ("Gemm", "Conv2d")


@dataclass(frozen=True)
class MergeSpec:
    """Weight assignment for merging layers i..j around center c = (i+j)/2."""

    start_index: int
    end_index: int
    center: float
    weights: tuple[float, ...]


def merge_weights(i: int, j: int) -> MergeSpec:
    """Weights w_k = |k - c| / sum_l |l - c| for k in [i..j], c = (i+j)/2.

    Emphasizes the outermost layers of the range; the central layer of an
    odd-length window gets weight exactly zero.
    """
    if j <= i:
        raise DegenerateRange(f"need j > i, got i={i}, j={j}")
    c = (i + j) / 2
    raw = [abs(k - c) for k in range(i, j + 1)]
    total = sum(raw)
    return MergeSpec(start_index=i, end_index=j, center=c, weights=tuple(w / total for w in raw))


def merge_layers(graph: ComputationGraph, layer_ids: list[str]) -> tuple[ComputationGraph, PassReport]:
    """Replace a chain of same-kind, same-shape layers with one layer whose
    parameters are the merge-weighted elementwise sums of the originals."""
    if len(layer_ids) < 2:
        raise DegenerateRange(f"need at least 2 layers, got {len(layer_ids)}")
    try:
        chain = [graph.node_map[i] for i in layer_ids]
    except KeyError as exc:
        raise ValidationError(f"unknown node id {exc}") from exc

    kind = chain[0].op_kind
    if kind not in MERGEABLE_KINDS:
        raise IncompatibleLayers(f"cannot merge {kind} layers")
    if any(n.op_kind != kind for n in chain):
        raise IncompatibleLayers(f"mixed op kinds {[n.op_kind for n in chain]}")
    if any(dict(n.attrs) != dict(chain[0].attrs) for n in chain):
        raise IncompatibleLayers("layer attrs differ across the chain")
    if any(len(n.inputs) != len(chain[0].inputs) for n in chain):
        raise IncompatibleLayers("inconsistent parameter counts across the chain")

    for prev, nxt in zip(chain, chain[1:]):
        if nxt.inputs[0] != prev.output:
            raise IncompatibleLayers(f"{nxt.id} does not consume {prev.id}; not a chain")
        users = graph.consumers_of(prev.output)
        if len(users) != 1 or prev.output in graph.outputs:
            raise IncompatibleLayers(f"intermediate value {prev.output!r} has other consumers")

    params: list[list[np.ndarray]] = []
    for node in chain:
        tensors = []
        for name in node.inputs[1:]:
            spec = graph.initializer_map.get(name)
            if spec is None:
                raise IncompatibleLayers(f"parameter {name!r} of {node.id} is not an initializer")
            tensors.append(spec.data)
        params.append(tensors)
    for tensors in params[1:]:
        if [t.shape for t in tensors] != [t.shape for t in params[0]]:
            raise IncompatibleLayers("parameter shapes differ across the chain")

    spec = merge_weights(1, len(chain))
    merged_params = [
        sum(w * tensors[slot] for w, tensors in zip(spec.weights, params))
        for slot in range(len(params[0]))
    ]

    taken = all_value_names(graph)
    merged_id = fresh_name(f"{chain[0].id}_merged", taken)
    param_names = [fresh_name(f"{merged_id}_p{slot}", taken) for slot in range(len(merged_params))]
    merged = GraphNode(
        id=merged_id,
        op_kind=kind,
        inputs=(chain[0].inputs[0], *param_names),
        output=chain[-1].output,
        attrs=dict(chain[0].attrs),
    )
    removed = {n.id for n in chain}
    nodes = []
    for node in graph.nodes:
        if node.id == chain[-1].id:
            nodes.append(merged)
        elif node.id not in removed:
            nodes.append(node)
    inits = graph.initializers + tuple(
        TensorSpec(name, arr.shape, arr) for name, arr in zip(param_names, merged_params)
    )
    out = prune_dead_initializers(replace(graph, nodes=tuple(nodes), initializers=inits))
    validate_graph(out)
    report = PassReport("merge_layers", len(graph.nodes), len(out.nodes), [(list(layer_ids), merged_id)])
    return out, report


def imitation_error(
    original: ComputationGraph,
    merged: ComputationGraph,
    probe_name: str,
    calibration_inputs: list[dict[str, np.ndarray]],
) -> float:
    """Mean over calibration inputs of the elementwise MSE between the probe
    value in the original graph and in the merged graph."""
    if not calibration_inputs:
        raise EmptySet("calibration set is empty")
    for g, label in ((original, "original"), (merged, "merged")):
        known = {t.name for t in g.inputs} | {t.name for t in g.initializers} | {n.output for n in g.nodes}
        if probe_name not in known:
            raise ValidationError(f"probe {probe_name!r} not resolvable in {label} graph")

    total = 0.0
    for inputs in calibration_inputs:
        a = run_capturing(original, inputs)[probe_name]
        b = run_capturing(merged, inputs)[probe_name]
        if a.shape != b.shape:
            raise ShapeError(f"probe {probe_name!r} shapes differ: {a.shape} vs {b.shape}")
        total += float(np.mean((a - b) ** 2))
    return total / len(calibration_inputs)
