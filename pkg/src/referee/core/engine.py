"""The job manager: drives each submission through compile -> profile ->
latency gate -> inference -> scoring, persists outcomes, and folds stored
records into the leaderboard and per-team score history.

Distinct submissions are evaluated concurrently up to the worker count;
each submission's pipeline is sequential and atomic (terminal state plus
record, or prior state intact).
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..device import BUILTIN_PROFILES, DeviceProfile, profile
from ..errors import (
    BundleError,
    NotFound,
    RefereeError,
    ShapeError,
    StateConflict,
    UnknownTrack,
)
from ..graph.interp import execute
from ..graph.ir import ComputationGraph
from ..metrics import (
    TrackConfig,
    binarize_mask,
    default_track_config,
    evaluate_depth,
    latency_gate,
    miou,
    top1_accuracy,
    track1_score,
)
from ..opt import DEFAULT_PASSES, optimize
from .bundles import TestBundle, load_bundle
from .models import (
    LeaderboardEntry,
    ScoreHistory,
    ScoreRecord,
    Submission,
    SubmissionStatus,
)
from .store import Store

S = SubmissionStatus

# Device targets per track: the fast-gate tracks profile against the
# phone-class simulator, the 1 s track against the laptop-class one.
DEFAULT_DEVICES = {1: "sd8-elite-sim", 2: "sdx-elite-sim", 3: "sd8-elite-sim"}


@dataclass
class BatchReport:
    run_id: str
    scored: int = 0
    rejected: int = 0
    failed: int = 0
    skipped: int = 0  # claimed by an overlapping run
    total: int = 0
    finished: bool = False
    track: int | None = None
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "scored": self.scored,
            "rejected": self.rejected,
            "failed": self.failed,
            "skipped": self.skipped,
            "total": self.total,
            "finished": self.finished,
            "track": self.track,
        }


class RefereeEngine:
    def __init__(
        self,
        store: Store,
        bundle_root: str | Path,
        devices: dict[int, DeviceProfile] | None = None,
        configs: dict[int, TrackConfig] | None = None,
        workers: int = 4,
        passes: list[str] | None = None,
        profile_runs: int = 1,
    ):
        self.store = store
        self.bundle_root = Path(bundle_root)
        self.devices = devices or {t: BUILTIN_PROFILES[n] for t, n in DEFAULT_DEVICES.items()}
        self.configs = configs or {t: default_track_config(t) for t in (1, 2, 3)}
        self.workers = workers
        self.passes = list(passes) if passes is not None else list(DEFAULT_PASSES)
        self.profile_runs = profile_runs
        self._bundles: dict[int, TestBundle] = {}
        self._bundle_lock = threading.Lock()
        self._in_flight: set[str] = set()
        self._flight_lock = threading.Lock()
        self._runs: dict[str, BatchReport] = {}

    # -- submission intake ----------------------------------------------------

    def submit(self, team: str, track: int, graph: ComputationGraph) -> str:
        if track not in (1, 2, 3):
            raise UnknownTrack(f"track must be 1, 2, or 3, got {track}")
        if not team or not isinstance(team, str):
            raise RefereeError(f"team must be a non-empty string, got {team!r}")
        sub = Submission(
            id=f"sub-{uuid.uuid4().hex[:12]}",
            team=team,
            track=track,
            graph=graph,
            submitted_at=self.store.utc_now(),
        )
        self.store.save_submission(sub)
        return sub.id

    # -- bundle / config resolution --------------------------------------------

    def bundle_for(self, track: int) -> TestBundle:
        with self._bundle_lock:
            if track not in self._bundles:
                self._bundles[track] = load_bundle(self.bundle_root / str(track))
            return self._bundles[track]

    def _tau_for(self, bundle: TestBundle, config: TrackConfig) -> float:
        return bundle.tau_m if bundle.tau_m is not None else config.tau_m

    # -- the pipeline -----------------------------------------------------------

    def evaluate_submission(
        self,
        submission_id: str,
        device: DeviceProfile | None = None,
        bundle: TestBundle | None = None,
        config: TrackConfig | None = None,
        re_evaluate: bool = False,
        eval_run_id: str | None = None,
    ) -> ScoreRecord | None:
        """Run the full pipeline for one submission.

        Returns the ScoreRecord for gate-decided outcomes (Scored or
        LatencyRejected) and None when the submission Failed. The prior
        state is restored if infrastructure (not the submission) breaks.
        """
        with self._flight_lock:
            if submission_id in self._in_flight:
                raise StateConflict(f"submission {submission_id} is being evaluated")
            self._in_flight.add(submission_id)
        try:
            sub = self.store.get_submission(submission_id)
            if sub.is_terminal and not re_evaluate:
                raise StateConflict(f"submission {submission_id} already {sub.status.value}")
            if not sub.is_terminal and sub.status is not S.SUBMITTED:
                raise StateConflict(f"submission {submission_id} is being evaluated")
            if re_evaluate and sub.is_terminal:
                # Administrative reset: a fresh lifecycle, not a state edge.
                sub.status = S.SUBMITTED
                sub.failure_reason = None
            return self._run_pipeline(sub, device, bundle, config, eval_run_id)
        finally:
            with self._flight_lock:
                self._in_flight.discard(submission_id)

    def _run_pipeline(self, sub, device, bundle, config, eval_run_id) -> ScoreRecord | None:
        prior_status = sub.status
        device = device or self.devices[sub.track]
        config = config or self.configs[sub.track]
        run_id = eval_run_id or f"run-{uuid.uuid4().hex[:8]}"
        try:
            bundle = bundle or self.bundle_for(sub.track)

            sub.transition_to(S.COMPILING)
            optimized, _reports = optimize(sub.graph, self.passes)

            sub.transition_to(S.PROFILING)
            latency_ms = profile(optimized, device, runs=self.profile_runs).total_ms

            if not latency_gate(config, latency_ms):
                record = ScoreRecord(
                    submission_id=sub.id, team=sub.team, track=sub.track,
                    submitted_at=sub.submitted_at, latency_ms=latency_ms,
                    gate_passed=False, metric_value=None, final_score=None,
                    details={"limit_ms": config.latency_limit_ms},
                    evaluated_at=self.store.utc_now(), eval_run_id=run_id,
                )
                self.store.append_record(record)
                sub.transition_to(S.LATENCY_REJECTED)
                self.store.save_submission(sub)
                return record

            sub.transition_to(S.INFERRING)
            outputs = []
            for item in bundle.items:
                if len(item.inputs) != len(sub.graph.inputs):
                    raise ShapeError(
                        f"bundle item {item.id} supplies {len(item.inputs)} inputs, "
                        f"graph declares {len(sub.graph.inputs)}")
                feed = {spec.name: arr for spec, arr in zip(optimized.inputs, item.inputs)}
                outputs.append(execute(optimized, feed)[optimized.outputs[0]])

            sub.transition_to(S.SCORING)
            metric, final, details = self._score(sub.track, bundle, config, outputs, latency_ms)
            record = ScoreRecord(
                submission_id=sub.id, team=sub.team, track=sub.track,
                submitted_at=sub.submitted_at, latency_ms=latency_ms,
                gate_passed=True, metric_value=metric, final_score=final,
                details=details, evaluated_at=self.store.utc_now(), eval_run_id=run_id,
            )
            self.store.append_record(record)
            sub.transition_to(S.SCORED)
            self.store.save_submission(sub)
            return record
        except BundleError:
            sub.status = prior_status  # operator problem, not the submission's
            raise
        except RefereeError as exc:
            sub.transition_to(S.FAILED)
            sub.failure_reason = f"{type(exc).__name__}: {exc}"
            self.store.save_submission(sub)
            return None
        except BaseException:
            sub.status = prior_status  # infrastructure fault: leave state intact
            raise

    def _score(self, track, bundle, config, outputs, latency_ms):
        if track == 1:
            predictions = [int(np.argmax(out.ravel())) for out in outputs]
            labels = [item.label for item in bundle.items]
            accuracy = top1_accuracy(predictions, labels)
            final = track1_score(accuracy, latency_ms)
            # per-item correctness only: the hidden labels never leave the server
            details = {
                "per_item": [
                    {"id": item.id, "predicted": p, "correct": p == l}
                    for item, p, l in zip(bundle.items, predictions, labels)
                ],
            }
            return accuracy, final, details
        if track == 2:
            pairs = []
            for item, out in zip(bundle.items, outputs):
                pred = binarize_mask(_as_map(out, item.mask.shape), config.mask_threshold)
                gt = binarize_mask(item.mask, config.mask_threshold)
                pairs.append((pred, gt))
            result = miou(pairs)
            details = {
                "per_pair_iou": list(result.per_pair_iou),
                "pair_count": result.pair_count,
            }
            return result.miou, result.miou, details
        if track == 3:
            tau = self._tau_for(bundle, config)
            cfg = TrackConfig(track=3, latency_limit_ms=config.latency_limit_ms,
                              tau_m=tau, mask_threshold=config.mask_threshold)
            per_item = []
            for item, out in zip(bundle.items, outputs):
                res = evaluate_depth(_as_map(out, item.depth.shape), item.depth,
                                     bundle.intrinsics, cfg)
                per_item.append(res)
            f_mean = float(np.mean([r.f_score for r in per_item]))
            details = {
                "tau_m": tau,
                "per_item": [
                    {"id": item.id, "f_score": r.f_score, "precision": r.precision,
                     "recall": r.recall, "mae_m": r.mae_m, "rmse_m": r.rmse_m,
                     "abs_rel": r.abs_rel, "scale": r.scale, "shift": r.shift}
                    for item, r in zip(bundle.items, per_item)
                ],
            }
            return f_mean, f_mean, details
        raise UnknownTrack(f"track {track}")

    # -- batches ------------------------------------------------------------------

    def _new_run(self, track: int | None) -> BatchReport:
        report = BatchReport(run_id=f"run-{uuid.uuid4().hex[:8]}", track=track)
        self._runs[report.run_id] = report
        return report

    def run_batch(self, track: int | None = None, report: BatchReport | None = None) -> BatchReport:
        """Evaluate every pending submission (snapshot taken at start).

        Submissions arriving after the snapshot are left for the next run;
        ones claimed by an overlapping run count as skipped.
        """
        report = report or self._new_run(track)
        pending = [s.id for s in self.store.list_submissions(report.track)
                   if s.status is S.SUBMITTED]
        report.total = len(pending)

        def work(sub_id: str) -> None:
            try:
                self.evaluate_submission(sub_id, eval_run_id=report.run_id)
            except StateConflict:
                report.skipped += 1
                return
            except RefereeError as exc:  # pragma: no cover - defensive
                report.errors.append(f"{sub_id}: {exc}")
                return
            status = self.store.get_submission(sub_id).status
            if status is S.SCORED:
                report.scored += 1
            elif status is S.LATENCY_REJECTED:
                report.rejected += 1
            elif status is S.FAILED:
                report.failed += 1

        if pending:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                list(pool.map(work, pending))
        report.finished = True
        return report

    def start_batch(self, track: int | None = None) -> str:
        """Kick off a batch in the background; poll run_report for progress."""
        report = self._new_run(track)
        threading.Thread(
            target=self.run_batch, kwargs={"track": track, "report": report}, daemon=True
        ).start()
        return report.run_id

    def run_report(self, run_id: str) -> BatchReport:
        report = self._runs.get(run_id)
        if report is None:
            raise NotFound(f"unknown run {run_id!r}")
        return report

    # -- leaderboard and history ------------------------------------------------

    def leaderboard(self, track: int) -> list[LeaderboardEntry]:
        """Pure fold over stored passing records: best score per team,
        ties broken by lower latency then earlier submission time."""
        if track not in (1, 2, 3):
            raise UnknownTrack(f"track must be 1, 2, or 3, got {track}")
        passing = [r for r in self.store.list_records(track) if r.gate_passed]
        by_team: dict[str, list[ScoreRecord]] = {}
        for rec in passing:
            by_team.setdefault(rec.team, []).append(rec)

        entries = []
        for team, records in by_team.items():
            best = min(records, key=lambda r: (-r.final_score, r.latency_ms, r.submitted_at))
            running, last_improved = None, records[0].evaluated_at
            for rec in sorted(records, key=lambda r: r.evaluated_at):
                if running is None or rec.final_score > running:
                    running = rec.final_score
                    last_improved = rec.evaluated_at
            entries.append((best, last_improved, team))
        entries.sort(key=lambda e: (-e[0].final_score, e[0].latency_ms, e[0].submitted_at, e[2]))
        return [
            LeaderboardEntry(
                rank=i + 1, team=team, track=track,
                best_final_score=best.final_score,
                best_submission_id=best.submission_id,
                latency_ms=best.latency_ms,
                last_improved_at=last_improved,
            )
            for i, (best, last_improved, team) in enumerate(entries)
        ]

    def score_history(self, team: str, track: int) -> ScoreHistory:
        if track not in (1, 2, 3):
            raise UnknownTrack(f"track must be 1, 2, or 3, got {track}")
        if not self.store.has_team(team):
            raise NotFound(f"unknown team {team!r}")
        points = tuple(
            (r.evaluated_at, r.final_score)
            for r in self.store.list_records(track)
            if r.team == team and r.gate_passed
        )
        return ScoreHistory(team=team, track=track, points=points)


def _as_map(out: np.ndarray, target_shape: tuple[int, ...]) -> np.ndarray:
    """Squeeze leading singleton dims so (1,1,H,W) model output scores
    against an (H,W) ground-truth map."""
    squeezed = np.squeeze(out)
    if squeezed.shape != tuple(target_shape):
        raise ShapeError(f"model output {out.shape} does not match target map {tuple(target_shape)}")
    return squeezed
