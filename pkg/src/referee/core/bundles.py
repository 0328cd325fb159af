"""Hidden per-track ground-truth bundles.

A bundle is a directory with a manifest.json plus per-item tensor files in
the portable tensor encoding ({name, shape, data}). Items pair an ordered
list of model inputs with the track's target: a class label, a 0/1 mask
tensor, or a metric depth tensor (meters). Bundles live server-side only;
the API never serves their contents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BundleError
from ..metrics.config import CameraIntrinsics


def tensor_to_json(name: str, array: np.ndarray) -> str:
    array = np.asarray(array, dtype=np.float64)
    doc = {"name": name, "shape": list(array.shape), "data": [float(x) for x in array.ravel()]}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def tensor_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    return np.asarray(doc["data"], dtype=np.float64).reshape(doc["shape"])


@dataclass(frozen=True)
class BundleItem:
    id: str
    inputs: tuple[np.ndarray, ...]
    label: int | None = None           # track 1
    mask: np.ndarray | None = None     # track 2
    depth: np.ndarray | None = None    # track 3


@dataclass(frozen=True)
class TestBundle:
    track: int
    items: tuple[BundleItem, ...]
    tau_m: float | None = None
    intrinsics: CameraIntrinsics | None = None


def load_bundle(bundle_dir: str | Path) -> TestBundle:
    bundle_dir = Path(bundle_dir)
    manifest_path = bundle_dir / "manifest.json"
    if not manifest_path.exists():
        raise BundleError(f"no manifest.json under {bundle_dir}")
    manifest = json.loads(manifest_path.read_text())
    track = int(manifest["track"])
    if track not in (1, 2, 3):
        raise BundleError(f"bundle track must be 1, 2, or 3, got {track}")

    intrinsics = None
    if "intrinsics" in manifest:
        k = manifest["intrinsics"]
        intrinsics = CameraIntrinsics(fx=float(k["fx"]), fy=float(k["fy"]),
                                      cx=float(k["cx"]), cy=float(k["cy"]))
        intrinsics.check()
    if track == 3 and intrinsics is None:
        raise BundleError("track 3 bundle requires camera intrinsics")

    def read_tensor(rel: str) -> np.ndarray:
        path = bundle_dir / rel
        if not path.exists():
            raise BundleError(f"bundle item file missing: {rel}")
        return tensor_from_json(path.read_text())

    items = []
    for obj in manifest["items"]:
        inputs = tuple(read_tensor(rel) for rel in obj["inputs"])
        if track == 1:
            if "label" not in obj:
                raise BundleError(f"item {obj.get('id')} missing label")
            items.append(BundleItem(id=obj["id"], inputs=inputs, label=int(obj["label"])))
        elif track == 2:
            items.append(BundleItem(id=obj["id"], inputs=inputs, mask=read_tensor(obj["mask"])))
        else:
            items.append(BundleItem(id=obj["id"], inputs=inputs, depth=read_tensor(obj["depth"])))
    if not items:
        raise BundleError("bundle has no items")
    return TestBundle(
        track=track,
        items=tuple(items),
        tau_m=float(manifest["tau_m"]) if "tau_m" in manifest else None,
        intrinsics=intrinsics,
    )


def save_bundle(bundle_dir: str | Path, track: int, items: list[dict],
                tau_m: float | None = None,
                intrinsics: CameraIntrinsics | None = None) -> Path:
    """Write a bundle directory; deterministic byte-for-byte given the same
    arguments (sorted keys, no timestamps).

    Each item dict: {"id": str, "inputs": [ndarray, ...], "label" | "mask" | "depth": ...}.
    """
    bundle_dir = Path(bundle_dir)
    bundle_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"track": track, "items": []}
    if tau_m is not None:
        manifest["tau_m"] = tau_m
    if intrinsics is not None:
        manifest["intrinsics"] = {"fx": intrinsics.fx, "fy": intrinsics.fy,
                                  "cx": intrinsics.cx, "cy": intrinsics.cy}
    for item in items:
        entry: dict = {"id": item["id"], "inputs": []}
        for k, arr in enumerate(item["inputs"]):
            rel = f"{item['id']}-in{k}.json"
            (bundle_dir / rel).write_text(tensor_to_json(f"in{k}", arr))
            entry["inputs"].append(rel)
        if track == 1:
            entry["label"] = int(item["label"])
        elif track == 2:
            rel = f"{item['id']}-mask.json"
            (bundle_dir / rel).write_text(tensor_to_json("mask", item["mask"]))
            entry["mask"] = rel
        else:
            rel = f"{item['id']}-depth.json"
            (bundle_dir / rel).write_text(tensor_to_json("depth", item["depth"]))
            entry["depth"] = rel
        manifest["items"].append(entry)
    (bundle_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1))
    return bundle_dir
