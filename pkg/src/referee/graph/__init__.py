from .ir import (
    OP_KINDS,
    ComputationGraph,
    GraphNode,
    TensorSpec,
    graph_from_dict,
    graph_to_dict,
    parse_graph,
    serialize_graph,
    toposort,
    validate_graph,
)
from .interp import execute, run_capturing
from .shapes import infer_shapes

__all__ = [
    "OP_KINDS",
    "ComputationGraph",
    "GraphNode",
    "TensorSpec",
    "execute",
    "graph_from_dict",
    "graph_to_dict",
    "infer_shapes",
    "parse_graph",
    "run_capturing",
    "serialize_graph",
    "toposort",
    "validate_graph",
]
