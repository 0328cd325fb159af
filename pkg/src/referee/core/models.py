"""Submission lifecycle records and leaderboard views.

The state machine is strict: Submitted -> Compiling -> Profiling ->
{LatencyRejected | Inferring}; Inferring -> Scoring -> Scored; any
pre-terminal state may move to Failed. LatencyRejected, Scored, and
Failed are terminal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..errors import StateConflict
from ..graph.ir import ComputationGraph, graph_from_dict, graph_to_dict


class SubmissionStatus(str, Enum):
    SUBMITTED = "Submitted"
    COMPILING = "Compiling"
    PROFILING = "Profiling"
    LATENCY_REJECTED = "LatencyRejected"
    INFERRING = "Inferring"
    SCORING = "Scoring"
    SCORED = "Scored"
    FAILED = "Failed"


S = SubmissionStatus

ALLOWED_TRANSITIONS: dict[SubmissionStatus, frozenset[SubmissionStatus]] = {
    S.SUBMITTED: frozenset({S.COMPILING, S.FAILED}),
    S.COMPILING: frozenset({S.PROFILING, S.FAILED}),
    S.PROFILING: frozenset({S.LATENCY_REJECTED, S.INFERRING, S.FAILED}),
    S.INFERRING: frozenset({S.SCORING, S.FAILED}),
    S.SCORING: frozenset({S.SCORED, S.FAILED}),
    S.LATENCY_REJECTED: frozenset(),
    S.SCORED: frozenset(),
    S.FAILED: frozenset(),
}

TERMINAL_STATES = frozenset({S.LATENCY_REJECTED, S.SCORED, S.FAILED})


@dataclass
class Submission:
    id: str
    team: str
    track: int
    graph: ComputationGraph
    submitted_at: str
    status: SubmissionStatus = S.SUBMITTED
    failure_reason: str | None = None

    def transition_to(self, new_status: SubmissionStatus) -> None:
        if new_status not in ALLOWED_TRANSITIONS[self.status]:
            raise StateConflict(
                f"submission {self.id}: illegal transition {self.status.value} -> {new_status.value}")
        self.status = new_status

    @property
    def is_terminal(self) -> bool:
        return self.status in TERMINAL_STATES

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "team": self.team,
            "track": self.track,
            "graph": graph_to_dict(self.graph),
            "submitted_at": self.submitted_at,
            "status": self.status.value,
            "failure_reason": self.failure_reason,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Submission":
        return cls(
            id=doc["id"],
            team=doc["team"],
            track=int(doc["track"]),
            graph=graph_from_dict(doc["graph"]),
            submitted_at=doc["submitted_at"],
            status=SubmissionStatus(doc["status"]),
            failure_reason=doc.get("failure_reason"),
        )


@dataclass
class ScoreRecord:
    """One evaluation outcome. Records exist only for gate-decided runs:
    gate pass implies scores present, gate fail implies scores absent."""

    submission_id: str
    team: str
    track: int
    submitted_at: str
    latency_ms: float
    gate_passed: bool
    metric_value: float | None
    final_score: float | None
    details: dict[str, Any] = field(default_factory=dict)
    evaluated_at: str = ""
    eval_run_id: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "submission_id": self.submission_id,
            "team": self.team,
            "track": self.track,
            "submitted_at": self.submitted_at,
            "latency_ms": self.latency_ms,
            "gate": "pass" if self.gate_passed else "fail",
            "metric_value": self.metric_value,
            "final_score": self.final_score,
            "details": self.details,
            "evaluated_at": self.evaluated_at,
            "eval_run_id": self.eval_run_id,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ScoreRecord":
        return cls(
            submission_id=doc["submission_id"],
            team=doc["team"],
            track=int(doc["track"]),
            submitted_at=doc["submitted_at"],
            latency_ms=float(doc["latency_ms"]),
            gate_passed=doc["gate"] == "pass",
            metric_value=doc["metric_value"],
            final_score=doc["final_score"],
            details=doc.get("details", {}),
            evaluated_at=doc.get("evaluated_at", ""),
            eval_run_id=doc.get("eval_run_id", ""),
        )


@dataclass(frozen=True)
class LeaderboardEntry:
    rank: int
    team: str
    track: int
    best_final_score: float
    best_submission_id: str
    latency_ms: float
    last_improved_at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "rank": self.rank,
            "team": self.team,
            "track": self.track,
            "best_final_score": self.best_final_score,
            "best_submission_id": self.best_submission_id,
            "latency_ms": self.latency_ms,
            "last_improved_at": self.last_improved_at,
        }


@dataclass(frozen=True)
class ScoreHistory:
    team: str
    track: int
    points: tuple[tuple[str, float], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "team": self.team,
            "track": self.track,
            "points": [{"evaluated_at": t, "final_score": s} for t, s in self.points],
        }
