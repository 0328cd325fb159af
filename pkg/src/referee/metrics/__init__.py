from .classification import top1_accuracy, track1_score
from .config import CameraIntrinsics, TrackConfig, default_track_config, latency_gate
from .depth import (
    DepthEvalResult,
    align_depth,
    depth_aux_metrics,
    depth_to_pointcloud,
    evaluate_depth,
    pointcloud_prf,
)
from .segmentation import SegEvalResult, binarize_mask, iou, miou

__all__ = [
    "CameraIntrinsics",
    "DepthEvalResult",
    "SegEvalResult",
    "TrackConfig",
    "align_depth",
    "binarize_mask",
    "default_track_config",
    "depth_aux_metrics",
    "depth_to_pointcloud",
    "evaluate_depth",
    "iou",
    "latency_gate",
    "miou",
    "pointcloud_prf",
    "top1_accuracy",
    "track1_score",
]
