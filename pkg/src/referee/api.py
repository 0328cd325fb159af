"""HTTP JSON facade over the referee engine.

Read endpoints serialize the engine's answers byte-stably; all mutation is
delegated to the engine/store, and long-running evaluation happens off the
request path (202 + polling). Hidden bundles are never served.
"""

from __future__ import annotations

import hashlib
import json
import threading
from typing import Any

from fastapi import FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .core.engine import RefereeEngine
from .core.models import SubmissionStatus
from .errors import (
    GraphSyntaxError,
    NotFound,
    RefereeError,
    ShapeError,
    StateConflict,
    UnknownTrack,
    ValidationError,
)
from .graph.ir import graph_from_dict

_BAD_REQUEST = (GraphSyntaxError, ValidationError, ShapeError, UnknownTrack)


def _api_error(code: str, status: int, message: str, detail: Any = None) -> JSONResponse:
    body: dict[str, Any] = {"code": code, "message": message}
    if detail is not None:
        body["detail"] = detail
    return JSONResponse(status_code=status, content=body)


def _error_response(exc: RefereeError) -> JSONResponse:
    detail = None
    node_id = getattr(exc, "node_id", None)
    if node_id is not None:
        detail = {"node_id": node_id}
    if isinstance(exc, _BAD_REQUEST):
        return _api_error("bad_request", 400, str(exc), detail)
    if isinstance(exc, NotFound):
        return _api_error("not_found", 404, str(exc))
    if isinstance(exc, StateConflict):
        return _api_error("conflict", 409, str(exc))
    return _api_error("internal", 500, str(exc))


def create_app(engine: RefereeEngine, admin_token: str = "", static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="referee", docs_url=None, redoc_url=None)
    idempotency: dict[str, tuple[str, str]] = {}
    idempotency_lock = threading.Lock()

    @app.exception_handler(RefereeError)
    async def handle_domain_error(request: Request, exc: RefereeError):
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def handle_request_validation(request: Request, exc: RequestValidationError):
        return _api_error("bad_request", 400, "malformed request", detail=exc.errors())

    @app.get("/api/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/v1/submissions", status_code=201)
    async def submit(request: Request, idempotency_key: str | None = Header(default=None)):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _api_error("bad_request", 400, "body is not valid JSON")
        if not isinstance(body, dict) or not {"team", "track", "graph"} <= set(body):
            return _api_error("bad_request", 400, "body must carry team, track, and graph")

        fingerprint = hashlib.sha256(
            json.dumps(body, sort_keys=True).encode()).hexdigest()
        if idempotency_key is not None:
            with idempotency_lock:
                hit = idempotency.get(idempotency_key)
            if hit is not None:
                prior_fingerprint, prior_id = hit
                if prior_fingerprint != fingerprint:
                    return _api_error("conflict", 409,
                                      f"idempotency key {idempotency_key!r} was used with a different body")
                return JSONResponse(
                    status_code=201,
                    content={"id": prior_id, "status": SubmissionStatus.SUBMITTED.value},
                    headers={"Location": f"/api/v1/submissions/{prior_id}"},
                )

        graph = graph_from_dict(body["graph"])
        track = body["track"]
        if not isinstance(track, int):
            raise UnknownTrack(f"track must be an integer, got {track!r}")
        sub_id = engine.submit(body["team"], track, graph)
        if idempotency_key is not None:
            with idempotency_lock:
                idempotency[idempotency_key] = (fingerprint, sub_id)
        return JSONResponse(
            status_code=201,
            content={"id": sub_id, "status": SubmissionStatus.SUBMITTED.value},
            headers={"Location": f"/api/v1/submissions/{sub_id}"},
        )

    @app.get("/api/v1/submissions/{submission_id}")
    def status(submission_id: str):
        sub = engine.store.get_submission(submission_id)
        body: dict[str, Any] = {
            "submission": {
                "id": sub.id,
                "team": sub.team,
                "track": sub.track,
                "status": sub.status.value,
                "submitted_at": sub.submitted_at,
                "failure_reason": sub.failure_reason,
            }
        }
        records = engine.store.records_for_submission(submission_id)
        if sub.status is SubmissionStatus.SCORED and records:
            body["score_record"] = records[-1].to_dict()
        elif sub.status is SubmissionStatus.LATENCY_REJECTED and records:
            last = records[-1]
            body["submission"]["latency_ms"] = last.latency_ms
            body["submission"]["limit_ms"] = last.details.get("limit_ms")
        return body

    @app.get("/api/v1/leaderboard/{track}")
    def leaderboard(track: int):
        return [entry.to_dict() for entry in engine.leaderboard(_track_or_404(track))]

    @app.get("/api/v1/teams/{team}/history")
    def history(team: str, track: int):
        return engine.score_history(team, _track_or_404(track)).to_dict()

    def _require_admin(token: str | None):
        if not admin_token or token != admin_token:
            return _api_error("unauthorized", 401, "missing or invalid admin token")
        return None

    @app.post("/api/v1/admin/runs", status_code=202)
    async def trigger_run(request: Request, x_admin_token: str | None = Header(default=None)):
        denied = _require_admin(x_admin_token)
        if denied is not None:
            return denied
        track = None
        body_bytes = await request.body()
        if body_bytes:
            body = json.loads(body_bytes)
            track = body.get("track")
            if track is not None:
                track = _track_or_404(int(track))
        run_id = engine.start_batch(track)
        return JSONResponse(status_code=202, content={"run_id": run_id})

    @app.get("/api/v1/admin/runs/{run_id}")
    def run_status(run_id: str, x_admin_token: str | None = Header(default=None)):
        denied = _require_admin(x_admin_token)
        if denied is not None:
            return denied
        return engine.run_report(run_id).to_dict()

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


def _track_or_404(track: int) -> int:
    if track not in (1, 2, 3):
        raise NotFound(f"unknown track {track}")
    return track
