"""Deterministic device latency simulator.

Assigns a latency to a graph from a configurable per-op cost model:
per-node overhead (the price constant ops pay), a per-kiloflop rate per op
kind, and a per-kilo-element memory rate. Stands in for on-device
profiling of named hardware targets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UnknownOpKind, ValidationError
from .graph.ir import ComputationGraph, GraphNode
from .graph.shapes import infer_shapes

# Ops whose flop count is the element count of their output.
_ELEMENTWISE = frozenset({"Add", "Sub", "Mul", "ReLU", "Sigmoid", "Softmax", "WeightedMerge"})
# Pure data movement: zero flops, cost comes from overhead + memory traffic.
_MOVEMENT = frozenset({"Reshape", "Concat", "Slice", "Gather", "Shape", "Expand"})


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    per_node_overhead_us: float = 0.0
    flop_cost_us: dict[str, float] = field(default_factory=dict)
    memory_cost_us: float = 0.0
    jitter_seed: int | None = None

    def check(self) -> None:
        coeffs = [self.per_node_overhead_us, self.memory_cost_us, *self.flop_cost_us.values()]
        if any(not math.isfinite(c) or c < 0 for c in coeffs):
            raise ValidationError(f"device profile {self.name!r} has negative or non-finite coefficients")


@dataclass(frozen=True)
class LatencyReport:
    total_ms: float
    per_node_us: dict[str, float]
    runs: int


def node_flops(node: GraphNode, shapes: dict[str, tuple[int, ...]]) -> float:
    kind = node.op_kind
    out = shapes[node.output]
    if kind == "Conv2d":
        _, cin, kh, kw = shapes[node.inputs[1]]
        return 2.0 * math.prod(out) * cin * kh * kw
    if kind == "Gemm":
        a = shapes[node.inputs[0]]
        k = a[0] if node.attrs.get("trans_a") else a[1]
        return 2.0 * out[0] * k * out[1]
    if kind in _ELEMENTWISE:
        return float(math.prod(out))
    if kind in _MOVEMENT:
        return 0.0
    raise UnknownOpKind(f"op kind {kind!r} has no cost rule")


def node_cost(node: GraphNode, shapes: dict[str, tuple[int, ...]], device: DeviceProfile) -> float:
    """Simulated microseconds for one node.

    cost = overhead + flop_rate[kind] * kflops + memory_rate * kilo-elements
    where the element traffic counts all inputs plus the output.
    """
    flops = node_flops(node, shapes)
    moved = math.prod(shapes[node.output]) + sum(math.prod(shapes[v]) for v in node.inputs)
    rate = device.flop_cost_us.get(node.op_kind, 0.0)
    return device.per_node_overhead_us + rate * (flops / 1000.0) + device.memory_cost_us * (moved / 1000.0)


def profile(graph: ComputationGraph, device: DeviceProfile, runs: int = 1) -> LatencyReport:
    """Simulate latency; deterministic given (graph, device, runs).

    With a jitter seed, each run scales the graph total by a seeded factor
    in [0.98, 1.02] and the report carries the mean across runs (per-node
    figures are scaled alike so the report stays additive).
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    device.check()
    shapes = infer_shapes(graph)
    per_node = {node.id: node_cost(node, shapes, device) for node in graph.nodes}
    factor = 1.0
    if device.jitter_seed is not None:
        rng = np.random.default_rng(device.jitter_seed)
        factor = float(np.mean(rng.uniform(0.98, 1.02, size=runs)))
        per_node = {k: v * factor for k, v in per_node.items()}
    total_ms = math.fsum(per_node.values()) / 1000.0
    return LatencyReport(total_ms=total_ms, per_node_us=per_node, runs=runs)


# Shipped profiles: one tuned so a baseline-sized toy classifier lands in
# the sub-10 ms regime, one scaled so small multimodal graphs land in the
# sub-1 s regime.
BUILTIN_PROFILES: dict[str, DeviceProfile] = {
    "sd8-elite-sim": DeviceProfile(
        name="sd8-elite-sim",
        per_node_overhead_us=50.0,
        flop_cost_us={"Conv2d": 3.0, "Gemm": 3.0, "Add": 1.0, "Sub": 1.0, "Mul": 1.0,
                      "ReLU": 0.5, "Sigmoid": 2.0, "Softmax": 2.0, "WeightedMerge": 1.0},
        memory_cost_us=0.5,
    ),
    "sdx-elite-sim": DeviceProfile(
        name="sdx-elite-sim",
        per_node_overhead_us=25000.0,
        flop_cost_us={"Conv2d": 50.0, "Gemm": 50.0, "Add": 15.0, "Sub": 15.0, "Mul": 15.0,
                      "ReLU": 8.0, "Sigmoid": 30.0, "Softmax": 30.0, "WeightedMerge": 15.0},
        memory_cost_us=10.0,
    ),
}

_PROFILE_FIELDS = {"name", "per_node_overhead_us", "flop_cost_us", "memory_cost_us", "jitter_seed"}


def profile_from_dict(doc: dict) -> DeviceProfile:
    unknown = set(doc) - _PROFILE_FIELDS
    if unknown:
        raise ValidationError(f"unknown device profile fields {sorted(unknown)}")
    if "name" not in doc:
        raise ValidationError("device profile missing 'name'")
    dp = DeviceProfile(
        name=doc["name"],
        per_node_overhead_us=float(doc.get("per_node_overhead_us", 0.0)),
        flop_cost_us={str(k): float(v) for k, v in doc.get("flop_cost_us", {}).items()},
        memory_cost_us=float(doc.get("memory_cost_us", 0.0)),
        jitter_seed=doc.get("jitter_seed"),
    )
    dp.check()
    return dp


def load_device_profile(name_or_path: str) -> DeviceProfile:
    """Resolve a builtin profile name or load a profile JSON file."""
    if name_or_path in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name_or_path]
    path = Path(name_or_path)
    if not path.exists():
        raise ValidationError(
            f"unknown device profile {name_or_path!r}; builtins: {sorted(BUILTIN_PROFILES)}")
    return profile_from_dict(json.loads(path.read_text()))
