"""Per-track evaluation configuration and the latency gates."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import UnknownTrack, ValidationError

# Hard per-track wall-clock limits in milliseconds: a submission must beat
# its track's limit before any accuracy metric is computed.
GATE_LIMITS_MS = {1: 10.0, 2: 1000.0, 3: 34.0}


@dataclass(frozen=True)
class TrackConfig:
    track: int
    latency_limit_ms: float
    tau_m: float = 0.05
    mask_threshold: float = 0.5

    def check(self) -> None:
        if self.track not in (1, 2, 3):
            raise UnknownTrack(f"track must be 1, 2, or 3, got {self.track}")
        if not self.tau_m > 0:
            raise ValidationError(f"tau_m must be > 0, got {self.tau_m}")
        if not 0 < self.mask_threshold < 1:
            raise ValidationError(f"mask_threshold must be in (0,1), got {self.mask_threshold}")


def default_track_config(track: int, **overrides) -> TrackConfig:
    if track not in GATE_LIMITS_MS:
        raise UnknownTrack(f"track must be 1, 2, or 3, got {track}")
    cfg = TrackConfig(track=track, latency_limit_ms=GATE_LIMITS_MS[track], **overrides)
    cfg.check()
    return cfg


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def check(self) -> None:
        if not (math.isfinite(self.fx) and math.isfinite(self.fy) and self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be finite and positive, got fx={self.fx}, fy={self.fy}")


def latency_gate(config: TrackConfig, latency_ms: float) -> bool:
    """True iff the submission beats its track's limit (strict <)."""
    if latency_ms < 0:
        raise ValidationError(f"latency must be >= 0, got {latency_ms}")
    return latency_ms < config.latency_limit_ms
