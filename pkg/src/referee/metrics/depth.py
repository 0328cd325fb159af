"""Depth-track scoring.

The model emits a relative depth map in [0,1]; evaluation rescales it to
metric depth with a per-image least-squares scale and shift, projects both
maps to 3D point clouds through the camera intrinsics, and scores
precision/recall/F under the Euclidean matching threshold tau. Per-pixel
MAE/RMSE/relative error are diagnostic only and never affect ranking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyGroundTruth, NoValidPixels, ShapeMismatch, ValidationError
from .config import CameraIntrinsics, TrackConfig


@dataclass(frozen=True)
class DepthEvalResult:
    precision: float
    recall: float
    f_score: float          # 0-100 scale
    mae_m: float
    rmse_m: float
    abs_rel: float
    scale: float
    shift: float


def _valid_gt(gt: np.ndarray) -> np.ndarray:
    return np.isfinite(gt) & (gt > 0)


def align_depth(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, tuple[float, float]]:
    """Least-squares (s, t) minimizing sum over valid gt pixels of
    (s*pred + t - gt)^2; returns (s*pred + t, (s, t)).

    Degenerate prediction (variance < 1e-12) falls back to s=1 and a pure
    mean shift so the output stays finite.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"depth shapes differ: {pred.shape} vs {gt.shape}")
    valid = _valid_gt(gt)
    if not valid.any():
        raise NoValidPixels("ground truth has no finite, positive pixel")
    p = pred[valid]
    g = gt[valid]
    var = float(np.var(p))
    if var < 1e-12:
        s, t = 1.0, float(np.mean(g) - np.mean(p))
    else:
        s = float(np.mean((p - p.mean()) * (g - g.mean())) / var)
        t = float(np.mean(g) - s * np.mean(p))
    return s * pred + t, (s, t)


def depth_to_pointcloud(depth: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole back-projection of each pixel (u=column, v=row) with depth
    d > 0: X=(u-cx)d/fx, Y=(v-cy)d/fy, Z=d. Invalid pixels are skipped;
    result is an (N, 3) array (possibly empty)."""
    intrinsics.check()
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    v, u = np.mgrid[0:h, 0:w]
    keep = np.isfinite(depth) & (depth > 0)
    d = depth[keep]
    x = (u[keep] - intrinsics.cx) * d / intrinsics.fx
    y = (v[keep] - intrinsics.cy) * d / intrinsics.fy
    return np.stack([x, y, d], axis=1) if d.size else np.empty((0, 3))


def pointcloud_prf(pred_cloud: np.ndarray, gt_cloud: np.ndarray, tau_m: float) -> tuple[float, float, float]:
    """Precision = fraction of predicted points within tau of ground truth,
    recall the converse; F on a 0-100 scale, 0 when P+R = 0.

    The tau comparison is inclusive (<=). Matching uses a KD-tree whose
    distances are bit-equal to a brute-force nearest-neighbor scan.
    """
    if not tau_m > 0:
        raise ValidationError(f"tau must be > 0, got {tau_m}")
    pred_cloud = np.asarray(pred_cloud, dtype=np.float64).reshape(-1, 3)
    gt_cloud = np.asarray(gt_cloud, dtype=np.float64).reshape(-1, 3)
    if gt_cloud.shape[0] == 0:
        raise EmptyGroundTruth("ground-truth cloud is empty")
    if pred_cloud.shape[0] == 0:
        return 0.0, 0.0, 0.0
    gt_tree = cKDTree(gt_cloud)
    pred_tree = cKDTree(pred_cloud)
    d_pred, _ = gt_tree.query(pred_cloud)
    d_gt, _ = pred_tree.query(gt_cloud)
    precision = np.count_nonzero(d_pred <= tau_m) / pred_cloud.shape[0]
    recall = np.count_nonzero(d_gt <= tau_m) / gt_cloud.shape[0]
    f = 0.0 if precision + recall == 0 else 100.0 * 2 * precision * recall / (precision + recall)
    return float(precision), float(recall), float(f)


def depth_aux_metrics(pred_aligned: np.ndarray, gt: np.ndarray) -> tuple[float, float, float]:
    """(MAE, RMSE, AbsRel) in meters over valid gt pixels; diagnostic only."""
    pred_aligned = np.asarray(pred_aligned, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred_aligned.shape != gt.shape:
        raise ShapeMismatch(f"depth shapes differ: {pred_aligned.shape} vs {gt.shape}")
    valid = _valid_gt(gt)
    if not valid.any():
        raise NoValidPixels("ground truth has no finite, positive pixel")
    delta = pred_aligned[valid] - gt[valid]
    mae = float(np.mean(np.abs(delta)))
    rmse = float(np.sqrt(np.mean(delta ** 2)))
    abs_rel = float(np.mean(np.abs(delta) / gt[valid]))
    return mae, rmse, abs_rel


def evaluate_depth(
    pred: np.ndarray,
    gt: np.ndarray,
    intrinsics: CameraIntrinsics,
    config: TrackConfig,
) -> DepthEvalResult:
    """Full depth pipeline: align, back-project both maps, match under tau,
    attach the diagnostic errors."""
    aligned, (s, t) = align_depth(pred, gt)
    pred_cloud = depth_to_pointcloud(aligned, intrinsics)
    gt_cloud = depth_to_pointcloud(np.where(_valid_gt(gt), gt, 0.0), intrinsics)
    precision, recall, f = pointcloud_prf(pred_cloud, gt_cloud, config.tau_m)
    mae, rmse, abs_rel = depth_aux_metrics(aligned, gt)
    return DepthEvalResult(
        precision=precision, recall=recall, f_score=f,
        mae_m=mae, rmse_m=rmse, abs_rel=abs_rel, scale=s, shift=t,
    )
