"""Deterministic synthetic test bundles, the desk-scale stand-in for the
hidden per-track datasets.

Given a seed, the generator produces byte-identical bundle directories:
classification items whose labels come from a hidden reference classifier,
segmentation items with analytic disc masks, and depth scenes with
analytic tilted-plane geometry. ``baseline_graph`` returns a companion
submission that solves the same seed's bundle perfectly, which makes
gate/score pipelines exercisable end to end.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core.bundles import save_bundle
from .graph.ir import ComputationGraph, graph_from_dict
from .metrics.config import CameraIntrinsics

N_CLASSES = 64
CLS_SHAPE = (1, 3, 32, 32)
SEG_IMAGE_SHAPE = (1, 3, 64, 64)
SEG_MASK_SHAPE = (64, 64)
PROMPT_SHAPE = (1, 16)
DEPTH_IMAGE_SHAPE = (1, 3, 48, 64)
DEPTH_MAP_SHAPE = (48, 64)
DEPTH_INTRINSICS = CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=24.0)
DEPTH_TAU_M = 0.05


def _reference_classifier(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed ^ 0xC1A55)
    return rng.normal(size=(int(np.prod(CLS_SHAPE)), N_CLASSES)) * 0.1


def _disc_mask(rng: np.random.Generator) -> np.ndarray:
    h, w = SEG_MASK_SHAPE
    cu = rng.uniform(w * 0.25, w * 0.75)
    cv = rng.uniform(h * 0.25, h * 0.75)
    r = rng.uniform(6.0, 18.0)
    v, u = np.mgrid[0:h, 0:w]
    return (((u - cu) ** 2 + (v - cv) ** 2) <= r * r).astype(np.float64)


def _plane_depth(rng: np.random.Generator) -> np.ndarray:
    h, w = DEPTH_MAP_SHAPE
    v, u = np.mgrid[0:h, 0:w]
    a = rng.uniform(2.0, 4.0)
    b = rng.uniform(-0.5, 0.5)
    c = rng.uniform(-0.5, 0.5)
    depth = a + b * (u / w) + c * (v / h)
    # a gaussian bump so scenes are not purely planar
    u0, v0 = rng.uniform(0, w), rng.uniform(0, h)
    depth = depth + rng.uniform(0.1, 0.4) * np.exp(-((u - u0) ** 2 + (v - v0) ** 2) / (2 * 12.0 ** 2))
    return depth


def _norm01(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    return (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)


def generate_items(track: int, n_items: int, seed: int) -> list[dict]:
    """Pure item generation; the image channel 0 carries the signal a
    perfect desk-scale model can extract."""
    rng = np.random.default_rng(seed)
    items = []
    if track == 1:
        w_ref = _reference_classifier(seed)
        for k in range(n_items):
            x = rng.normal(size=CLS_SHAPE)
            label = int(np.argmax(x.ravel() @ w_ref))
            items.append({"id": f"item-{k:03d}", "inputs": [x], "label": label})
    elif track == 2:
        for k in range(n_items):
            mask = _disc_mask(rng)
            image = np.stack([mask, rng.random(SEG_MASK_SHAPE), rng.random(SEG_MASK_SHAPE)])
            prompt = rng.normal(size=PROMPT_SHAPE)
            items.append({
                "id": f"item-{k:03d}",
                "inputs": [image[None, :, :, :], prompt],
                "mask": mask,
            })
    elif track == 3:
        for k in range(n_items):
            depth = _plane_depth(rng)
            image = np.stack([_norm01(depth), rng.random(DEPTH_MAP_SHAPE), rng.random(DEPTH_MAP_SHAPE)])
            items.append({"id": f"item-{k:03d}", "inputs": [image[None, :, :, :]], "depth": depth})
    else:
        raise ValueError(f"track must be 1, 2, or 3, got {track}")
    return items


def write_bundle(out_dir: str | Path, track: int, n_items: int, seed: int) -> Path:
    items = generate_items(track, n_items, seed)
    kwargs = {}
    if track == 3:
        kwargs = {"tau_m": DEPTH_TAU_M, "intrinsics": DEPTH_INTRINSICS}
    return save_bundle(Path(out_dir), track, items, **kwargs)


def baseline_graph(track: int, seed: int) -> ComputationGraph:
    """A submission that scores perfectly on the same seed's bundle."""
    if track == 1:
        w_ref = _reference_classifier(seed)
        doc = {
            "name": f"baseline-cls-{seed}",
            "inputs": [{"name": "image", "shape": list(CLS_SHAPE)}],
            "outputs": ["scores"],
            "nodes": [
                {"id": "flatten", "op": "Reshape", "inputs": ["image"], "output": "flat",
                 "attrs": {"shape": [1, int(np.prod(CLS_SHAPE))]}},
                {"id": "classify", "op": "Gemm", "inputs": ["flat", "w"], "output": "scores",
                 "attrs": {}},
            ],
            "initializers": [
                {"name": "w", "shape": list(w_ref.shape), "data": w_ref.ravel().tolist()},
            ],
        }
    elif track == 2:
        h, w = SEG_MASK_SHAPE
        doc = {
            "name": f"baseline-seg-{seed}",
            "inputs": [
                {"name": "image", "shape": list(SEG_IMAGE_SHAPE)},
                {"name": "prompt", "shape": list(PROMPT_SHAPE)},
            ],
            "outputs": ["mask"],
            "nodes": [
                {"id": "pick", "op": "Slice", "inputs": ["image"], "output": "chan",
                 "attrs": {"axes": [1], "starts": [0], "ends": [1]}},
                {"id": "flatten", "op": "Reshape", "inputs": ["chan"], "output": "mask",
                 "attrs": {"shape": [h, w]}},
            ],
            "initializers": [],
        }
    elif track == 3:
        h, w = DEPTH_MAP_SHAPE
        doc = {
            "name": f"baseline-depth-{seed}",
            "inputs": [{"name": "image", "shape": list(DEPTH_IMAGE_SHAPE)}],
            "outputs": ["depth"],
            "nodes": [
                {"id": "pick", "op": "Slice", "inputs": ["image"], "output": "chan",
                 "attrs": {"axes": [1], "starts": [0], "ends": [1]}},
                {"id": "flatten", "op": "Reshape", "inputs": ["chan"], "output": "depth",
                 "attrs": {"shape": [h, w]}},
            ],
            "initializers": [],
        }
    else:
        raise ValueError(f"track must be 1, 2, or 3, got {track}")
    return graph_from_dict(doc)


def degraded_graph(track: int, seed: int, noise: float = 1.0) -> ComputationGraph:
    """A baseline with perturbed behavior: still gate-legal, scores lower."""
    doc = _to_doc(baseline_graph(track, seed))
    if track == 1:
        rng = np.random.default_rng(seed + 1)
        for init in doc["initializers"]:
            if init["name"] == "w":
                arr = np.asarray(init["data"]) + rng.normal(size=len(init["data"])) * noise * 0.05
                init["data"] = arr.tolist()
    else:
        # read the noise channel instead of the signal channel
        for node in doc["nodes"]:
            if node["id"] == "pick":
                node["attrs"] = {"axes": [1], "starts": [1], "ends": [2]}
    doc["name"] += "-degraded"
    return graph_from_dict(doc)


def padded_graph(track: int, seed: int, pad_nodes: int) -> ComputationGraph:
    """A baseline inflated with metadata nodes so it misses the gate."""
    doc = _to_doc(baseline_graph(track, seed))
    first_input = doc["inputs"][0]["name"]
    for k in range(pad_nodes):
        doc["nodes"].append({
            "id": f"pad{k}", "op": "Shape", "inputs": [first_input],
            "output": f"pad_out{k}", "attrs": {},
        })
    doc["name"] += "-padded"
    return graph_from_dict(doc)


def broken_graph(track: int, seed: int) -> ComputationGraph:
    """A valid, gate-legal graph whose declared input does not match the
    bundle items, so inference fails with a shape error."""
    doc = {
        "name": f"broken-{track}-{seed}",
        "inputs": [{"name": "image", "shape": [1, 4]}],
        "outputs": ["y"],
        "nodes": [{"id": "act", "op": "ReLU", "inputs": ["image"], "output": "y", "attrs": {}}],
        "initializers": [],
    }
    return graph_from_dict(doc)


def _to_doc(graph: ComputationGraph) -> dict:
    from .graph.ir import graph_to_dict

    return graph_to_dict(graph)
