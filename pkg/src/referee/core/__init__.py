from .bundles import BundleItem, TestBundle, load_bundle, save_bundle
from .engine import BatchReport, RefereeEngine
from .models import (
    LeaderboardEntry,
    ScoreHistory,
    ScoreRecord,
    Submission,
    SubmissionStatus,
)
from .store import Store

__all__ = [
    "BatchReport",
    "BundleItem",
    "LeaderboardEntry",
    "RefereeEngine",
    "ScoreHistory",
    "ScoreRecord",
    "Store",
    "Submission",
    "SubmissionStatus",
    "TestBundle",
    "load_bundle",
    "save_bundle",
]
