"""Crash-safe persistent store: one JSON file per submission, an
append-only record log grouped by evaluation run.

Only Submitted and terminal statuses ever reach disk (the in-flight
pipeline states are process-local), and every file write is
tmp-write/fsync/rename, so a crash leaves each submission either
terminal-with-record or still pending. All state is rebuildable by
re-reading the directory.
"""

from __future__ import annotations

import json
import os
import threading
from collections import defaultdict
from datetime import datetime, timedelta, timezone
from pathlib import Path

from ..errors import NotFound
from .models import TERMINAL_STATES, ScoreRecord, Submission, SubmissionStatus

_PERSISTED_STATES = frozenset({SubmissionStatus.SUBMITTED}) | TERMINAL_STATES


def _atomic_write(path: Path, text: str, fsync: bool) -> None:
    tmp = path.parent / f".{path.name}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        if fsync:
            fh.flush()
            os.fsync(fh.fileno())
    os.replace(tmp, path)


class Store:
    """Thread-safe store over a data directory.

    Writes are serialized per submission id; reads snapshot the in-memory
    index under the global lock so leaderboard and history folds never see
    a torn record.
    """

    def __init__(self, data_dir: str | Path, fsync: bool = True):
        self.data_dir = Path(data_dir)
        self.fsync = fsync
        self.submissions_dir = self.data_dir / "store" / "submissions"
        self.records_dir = self.data_dir / "store" / "records"
        self.submissions_dir.mkdir(parents=True, exist_ok=True)
        self.records_dir.mkdir(parents=True, exist_ok=True)

        self._mutex = threading.RLock()
        self._sub_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._submissions: dict[str, Submission] = {}
        self._records: list[ScoreRecord] = []
        self._last_dt: datetime | None = None
        self._load()

    # -- time ---------------------------------------------------------------

    def utc_now(self) -> str:
        """Strictly increasing UTC ISO-8601 timestamps (microsecond ticks)."""
        with self._mutex:
            now = datetime.now(timezone.utc)
            if self._last_dt is not None and now <= self._last_dt:
                now = self._last_dt + timedelta(microseconds=1)
            self._last_dt = now
            return now.isoformat(timespec="microseconds")

    # -- loading ------------------------------------------------------------

    def _load(self) -> None:
        for path in sorted(self.submissions_dir.glob("*.json")):
            sub = Submission.from_dict(json.loads(path.read_text()))
            # In-flight states never reach disk; treat anything unexpected
            # as still pending.
            if sub.status not in _PERSISTED_STATES:
                sub.status = SubmissionStatus.SUBMITTED
            self._submissions[sub.id] = sub
        for path in sorted(self.records_dir.glob("*/*.json")):
            self._records.append(ScoreRecord.from_dict(json.loads(path.read_text())))
        self._records.sort(key=lambda r: r.evaluated_at)

    # -- submissions ----------------------------------------------------------

    def _lock_for(self, submission_id: str) -> threading.Lock:
        with self._mutex:
            return self._sub_locks[submission_id]

    def save_submission(self, sub: Submission) -> None:
        if sub.status not in _PERSISTED_STATES:
            raise ValueError(f"refusing to persist in-flight state {sub.status.value}")
        with self._lock_for(sub.id):
            _atomic_write(self.submissions_dir / f"{sub.id}.json",
                          json.dumps(sub.to_dict(), indent=1), self.fsync)
            with self._mutex:
                self._submissions[sub.id] = sub

    def get_submission(self, submission_id: str) -> Submission:
        with self._mutex:
            sub = self._submissions.get(submission_id)
        if sub is None:
            raise NotFound(f"unknown submission {submission_id!r}")
        return sub

    def list_submissions(self, track: int | None = None) -> list[Submission]:
        with self._mutex:
            subs = list(self._submissions.values())
        if track is not None:
            subs = [s for s in subs if s.track == track]
        return sorted(subs, key=lambda s: s.submitted_at)

    def has_team(self, team: str) -> bool:
        with self._mutex:
            return any(s.team == team for s in self._submissions.values())

    # -- records --------------------------------------------------------------

    def append_record(self, record: ScoreRecord) -> None:
        run_dir = self.records_dir / record.eval_run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(run_dir / f"{record.submission_id}.json",
                      json.dumps(record.to_dict(), indent=1), self.fsync)
        with self._mutex:
            self._records.append(record)

    def list_records(self, track: int | None = None) -> list[ScoreRecord]:
        with self._mutex:
            records = list(self._records)
        if track is not None:
            records = [r for r in records if r.track == track]
        return sorted(records, key=lambda r: r.evaluated_at)

    def records_for_submission(self, submission_id: str) -> list[ScoreRecord]:
        with self._mutex:
            return sorted(
                (r for r in self._records if r.submission_id == submission_id),
                key=lambda r: r.evaluated_at,
            )
