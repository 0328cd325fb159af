"""Portable computation-graph model format.

A graph is the unit of submission for the whole platform: typed nodes over
named values, graph inputs without data, and constant initializers with
data. All tensor data is 64-bit float, including shape-carrying tensors
(whose values are exact small integers).

The wire format is a UTF-8 JSON document with top-level fields ``name``,
``inputs``, ``outputs``, ``nodes``, and ``initializers``. Unknown fields are
rejected at every level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping

import numpy as np

from ..errors import GraphSyntaxError, ValidationError

OP_KINDS = frozenset({
    "Add", "Sub", "Mul", "Gemm", "Conv2d", "ReLU", "Sigmoid", "Softmax",
    "Reshape", "Concat", "Slice", "Gather", "Shape", "Expand", "WeightedMerge",
})

ELEMENTWISE_BINARY = frozenset({"Add", "Sub", "Mul"})
DATA_MOVEMENT = frozenset({"Reshape", "Concat", "Slice", "Gather", "Shape", "Expand"})

# op kind -> (min inputs, max inputs)
_ARITY: dict[str, tuple[int, int]] = {
    "Add": (2, 2), "Sub": (2, 2), "Mul": (2, 2),
    "Gemm": (2, 3), "Conv2d": (2, 3),
    "ReLU": (1, 1), "Sigmoid": (1, 1), "Softmax": (1, 1),
    "Reshape": (1, 1), "Concat": (1, 64), "Slice": (1, 1),
    "Gather": (2, 2), "Shape": (1, 1), "Expand": (2, 2),
    "WeightedMerge": (1, 64),
}

# op kind -> (allowed attr keys, required attr keys)
_ATTRS: dict[str, tuple[frozenset[str], frozenset[str]]] = {
    "Add": (frozenset(), frozenset()),
    "Sub": (frozenset(), frozenset()),
    "Mul": (frozenset(), frozenset()),
    "Gemm": (frozenset({"trans_a", "trans_b"}), frozenset()),
    "Conv2d": (frozenset({"stride", "padding"}), frozenset()),
    "ReLU": (frozenset(), frozenset()),
    "Sigmoid": (frozenset(), frozenset()),
    "Softmax": (frozenset(), frozenset()),
    "Reshape": (frozenset({"shape"}), frozenset({"shape"})),
    "Concat": (frozenset({"axis"}), frozenset({"axis"})),
    "Slice": (frozenset({"axes", "starts", "ends"}), frozenset({"axes", "starts", "ends"})),
    "Gather": (frozenset({"axis"}), frozenset()),
    "Shape": (frozenset(), frozenset()),
    "Expand": (frozenset(), frozenset()),
    "WeightedMerge": (frozenset({"weights"}), frozenset({"weights"})),
}

MAX_RANK = 4


@dataclass(frozen=True)
class TensorSpec:
    """A named tensor: graph input (no data) or constant initializer (with data).

    ``data`` is a read-only float64 array in row-major order.
    """

    name: str
    shape: tuple[int, ...]
    data: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if self.data is not None:
            arr = np.asarray(self.data, dtype=np.float64).ravel()
            if arr.size == math.prod(self.shape):
                arr = np.ascontiguousarray(arr.reshape(self.shape))
            arr.flags.writeable = False
            object.__setattr__(self, "data", arr)

    def check(self) -> None:
        if not self.name or not isinstance(self.name, str):
            raise ValidationError(f"tensor name must be a non-empty string, got {self.name!r}")
        if not 1 <= len(self.shape) <= MAX_RANK:
            raise ValidationError(f"tensor {self.name!r}: shape must have 1-{MAX_RANK} dimensions, got {self.shape}")
        if any(d < 1 for d in self.shape):
            raise ValidationError(f"tensor {self.name!r}: every dimension must be >= 1, got {self.shape}")
        if self.data is not None and self.data.size != math.prod(self.shape):
            raise ValidationError(
                f"tensor {self.name!r}: data length {self.data.size} != product of shape {self.shape}"
            )


@dataclass(frozen=True)
class GraphNode:
    """One typed operation: ordered input value names and a single output name."""

    id: str
    op_kind: str
    inputs: tuple[str, ...]
    output: str
    attrs: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "attrs", dict(self.attrs))

    def check(self) -> None:
        if not self.id or not isinstance(self.id, str):
            raise ValidationError(f"node id must be a non-empty string, got {self.id!r}")
        if self.op_kind not in OP_KINDS:
            raise ValidationError(f"unsupported op kind {self.op_kind!r}", node_id=self.id)
        lo, hi = _ARITY[self.op_kind]
        if not lo <= len(self.inputs) <= hi:
            raise ValidationError(
                f"{self.op_kind} takes {lo}" + (f"-{hi}" if hi != lo else "") +
                f" inputs, got {len(self.inputs)}", node_id=self.id)
        allowed, required = _ATTRS[self.op_kind]
        unknown = set(self.attrs) - allowed
        if unknown:
            raise ValidationError(
                f"unknown attrs {sorted(unknown)} for {self.op_kind}", node_id=self.id)
        missing = required - set(self.attrs)
        if missing:
            raise ValidationError(
                f"missing required attrs {sorted(missing)} for {self.op_kind}", node_id=self.id)
        if self.op_kind == "WeightedMerge" and len(self.attrs["weights"]) != len(self.inputs):
            raise ValidationError(
                f"WeightedMerge has {len(self.inputs)} inputs but {len(self.attrs['weights'])} weights",
                node_id=self.id)


@dataclass(frozen=True)
class ComputationGraph:
    """A validated, immutable dataflow graph; safe to share across threads."""

    name: str
    inputs: tuple[TensorSpec, ...]
    outputs: tuple[str, ...]
    nodes: tuple[GraphNode, ...]
    initializers: tuple[TensorSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "initializers", tuple(self.initializers))

    @cached_property
    def initializer_map(self) -> dict[str, TensorSpec]:
        return {t.name: t for t in self.initializers}

    @cached_property
    def input_map(self) -> dict[str, TensorSpec]:
        return {t.name: t for t in self.inputs}

    @cached_property
    def producer_map(self) -> dict[str, GraphNode]:
        return {n.output: n for n in self.nodes}

    @cached_property
    def node_map(self) -> dict[str, GraphNode]:
        return {n.id: n for n in self.nodes}

    def consumers_of(self, value: str) -> list[GraphNode]:
        return [n for n in self.nodes if value in n.inputs]


def toposort(nodes: Iterable[GraphNode], known_values: set[str]) -> tuple[GraphNode, ...]:
    """Stable topological sort; raises ValidationError on a cycle.

    ``known_values`` are the names available before any node runs (graph
    inputs and initializers). Ready nodes are emitted in original list order.
    """
    pending = list(nodes)
    available = set(known_values)
    ordered: list[GraphNode] = []
    while pending:
        emitted = False
        rest: list[GraphNode] = []
        for node in pending:
            if all(name in available for name in node.inputs):
                ordered.append(node)
                available.add(node.output)
                emitted = True
            else:
                rest.append(node)
        if not emitted:
            raise ValidationError(
                f"cycle or unresolvable inputs involving nodes {[n.id for n in rest]}",
                node_id=rest[0].id)
        pending = rest
    return tuple(ordered)


def validate_graph(graph: ComputationGraph) -> dict[str, tuple[int, ...]]:
    """Check every structural invariant, then infer and check shapes.

    Returns the full value-name -> shape map. Raises ValidationError or
    ShapeError (with the offending node id) on the first violation.
    """
    if not graph.name or not isinstance(graph.name, str):
        raise ValidationError(f"graph name must be a non-empty string, got {graph.name!r}")

    for spec in graph.inputs:
        spec.check()
        if spec.data is not None:
            raise ValidationError(f"graph input {spec.name!r} must not carry data")
    for spec in graph.initializers:
        spec.check()
        if spec.data is None:
            raise ValidationError(f"initializer {spec.name!r} must carry data")

    seen: set[str] = set()
    for spec in list(graph.inputs) + list(graph.initializers):
        if spec.name in seen:
            raise ValidationError(f"duplicate value name {spec.name!r}")
        seen.add(spec.name)

    ids: set[str] = set()
    for node in graph.nodes:
        node.check()
        if node.id in ids:
            raise ValidationError(f"duplicate node id {node.id!r}")
        ids.add(node.id)
        if node.output in seen:
            raise ValidationError(f"output value {node.output!r} already defined", node_id=node.id)
        seen.add(node.output)

    base = {t.name for t in graph.inputs} | {t.name for t in graph.initializers}
    defined = set(base)
    for node in graph.nodes:
        for name in node.inputs:
            if name not in seen:
                raise ValidationError(f"undefined value {name!r}", node_id=node.id)
        defined.add(node.output)

    # Confirms the declared node order is a valid topological order.
    available = set(base)
    for node in graph.nodes:
        for name in node.inputs:
            if name not in available:
                raise ValidationError(
                    f"value {name!r} used before it is produced (node order is not topological)",
                    node_id=node.id)
        available.add(node.output)

    for name in graph.outputs:
        if name not in defined:
            raise ValidationError(f"declared output {name!r} is not produced by any node or input")
    if len(set(graph.outputs)) != len(graph.outputs):
        raise ValidationError("duplicate names in graph outputs")

    from .shapes import infer_shapes

    return infer_shapes(graph)


# --- portable JSON format ---------------------------------------------------

_TOP_FIELDS = {"name", "inputs", "outputs", "nodes", "initializers"}
_NODE_FIELDS = {"id", "op", "inputs", "output", "attrs"}


def _reject_unknown(obj: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise GraphSyntaxError(f"unknown fields {sorted(unknown)} in {where}")


def _tensor_from_obj(obj: Any, where: str, with_data: bool) -> TensorSpec:
    if not isinstance(obj, Mapping):
        raise GraphSyntaxError(f"{where} entries must be objects")
    allowed = {"name", "shape", "data"} if with_data else {"name", "shape"}
    _reject_unknown(obj, allowed, where)
    try:
        return TensorSpec(
            name=obj["name"],
            shape=tuple(obj["shape"]),
            data=np.asarray(obj["data"], dtype=np.float64) if with_data else None,
        )
    except KeyError as exc:
        raise GraphSyntaxError(f"{where} entry missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise GraphSyntaxError(f"malformed {where} entry: {exc}") from exc


def graph_from_dict(doc: Mapping[str, Any]) -> ComputationGraph:
    """Build and validate a graph from an already-parsed JSON object."""
    if not isinstance(doc, Mapping):
        raise GraphSyntaxError("graph document must be a JSON object")
    _reject_unknown(doc, _TOP_FIELDS, "graph document")
    for key in ("name", "inputs", "outputs", "nodes"):
        if key not in doc:
            raise GraphSyntaxError(f"graph document missing field {key!r}")

    nodes = []
    for obj in doc["nodes"]:
        if not isinstance(obj, Mapping):
            raise GraphSyntaxError("nodes entries must be objects")
        _reject_unknown(obj, _NODE_FIELDS, "node")
        try:
            nodes.append(GraphNode(
                id=obj["id"],
                op_kind=obj["op"],
                inputs=tuple(obj["inputs"]),
                output=obj["output"],
                attrs=dict(obj.get("attrs", {})),
            ))
        except KeyError as exc:
            raise GraphSyntaxError(f"node entry missing field {exc}") from exc

    graph = ComputationGraph(
        name=doc["name"],
        inputs=tuple(_tensor_from_obj(o, "inputs", with_data=False) for o in doc["inputs"]),
        outputs=tuple(doc["outputs"]),
        nodes=tuple(nodes),
        initializers=tuple(
            _tensor_from_obj(o, "initializers", with_data=True)
            for o in doc.get("initializers", [])
        ),
    )
    base = {t.name for t in graph.inputs} | {t.name for t in graph.initializers}
    defined = base | {n.output for n in graph.nodes}
    for node in graph.nodes:
        for name in node.inputs:
            if name not in defined:
                raise ValidationError(f"undefined value {name!r}", node_id=node.id)
    graph = ComputationGraph(
        name=graph.name,
        inputs=graph.inputs,
        outputs=graph.outputs,
        nodes=toposort(graph.nodes, base),
        initializers=graph.initializers,
    )
    validate_graph(graph)
    return graph


def parse_graph(document: str | bytes) -> ComputationGraph:
    """Parse the portable JSON text into a validated ComputationGraph."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise GraphSyntaxError(f"not valid JSON: {exc}") from exc
    return graph_from_dict(doc)


def graph_to_dict(graph: ComputationGraph) -> dict[str, Any]:
    return {
        "name": graph.name,
        "inputs": [{"name": t.name, "shape": list(t.shape)} for t in graph.inputs],
        "outputs": list(graph.outputs),
        "nodes": [
            {
                "id": n.id,
                "op": n.op_kind,
                "inputs": list(n.inputs),
                "output": n.output,
                "attrs": dict(n.attrs),
            }
            for n in graph.nodes
        ],
        "initializers": [
            {"name": t.name, "shape": list(t.shape), "data": [float(x) for x in t.data.ravel()]}
            for t in graph.initializers
        ],
    }


def serialize_graph(graph: ComputationGraph) -> str:
    """Inverse of parse_graph; float repr round-trips exactly."""
    return json.dumps(graph_to_dict(graph), indent=1)
