"""Segmentation-track scoring: per-pair intersection-over-union and its mean."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptySet, ShapeMismatch


@dataclass(frozen=True)
class SegEvalResult:
    per_pair_iou: tuple[float, ...]
    miou: float
    pair_count: int


def binarize_mask(logits: np.ndarray, threshold: float) -> np.ndarray:
    """Pixel is foreground iff value >= threshold (ties count as foreground).
    Already-binary 0/1 tensors pass through unchanged for any threshold in (0,1)."""
    return np.asarray(logits) >= threshold


def iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Pixel-count intersection over union; two empty masks count as a
    perfect 1.0 (a correctly empty prediction)."""
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def miou(pairs: list[tuple[np.ndarray, np.ndarray]]) -> SegEvalResult:
    if not pairs:
        raise EmptySet("no mask pairs to score")
    per_pair = tuple(iou(p, g) for p, g in pairs)
    return SegEvalResult(
        per_pair_iou=per_pair,
        miou=float(np.mean(per_pair)),
        pair_count=len(per_pair),
    )
