from .merge import MergeSpec, imitation_error, merge_layers, merge_weights
from .passes import (
    DEFAULT_PASSES,
    PASS_ALIASES,
    PassReport,
    constant_fold,
    fuse_normalization_into_conv,
    fuse_scale_into_gemm,
    optimize,
)

__all__ = [
    "DEFAULT_PASSES",
    "MergeSpec",
    "PASS_ALIASES",
    "PassReport",
    "constant_fold",
    "fuse_normalization_into_conv",
    "fuse_scale_into_gemm",
    "imitation_error",
    "merge_layers",
    "merge_weights",
    "optimize",
]
