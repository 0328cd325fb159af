"""Classification-track scoring: top-1 accuracy and the latency-weighted
final score with its 2 ms floor."""

from __future__ import annotations

from typing import Sequence

from ..errors import EmptySet, LengthMismatch


def top1_accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    if not labels:
        raise EmptySet("no items to score")
    hits = sum(1 for p, g in zip(predictions, labels) if p == g)
    return hits / len(labels)


def track1_score(accuracy: float, latency_ms: float) -> float:
    """accuracy / max(latency/2, 1): accuracy-per-time with a 2 ms floor,
    so sub-2 ms models compete purely on accuracy."""
    return accuracy / max(latency_ms / 2.0, 1.0)
