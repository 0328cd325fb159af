"""Operator and participant command-line tool.

Exit codes: 0 success, 1 domain error, 2 usage error. With --json every
command writes line-delimited JSON to stdout.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import bundlegen
from .core.bundles import tensor_from_json
from .core.engine import RefereeEngine
from .core.store import Store
from .device import load_device_profile, profile as profile_graph
from .errors import RefereeError
from .graph.ir import parse_graph, serialize_graph
from .metrics import (
    CameraIntrinsics,
    TrackConfig,
    binarize_mask,
    evaluate_depth,
    iou,
    track1_score,
)
from .opt import optimize


def domain_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RefereeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


def emit(payload: dict, as_json: bool, text: str | None = None):
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(text if text is not None else json.dumps(payload, indent=2))


def offline_engine(data_dir: str, bundles: str | None, workers: int = 4) -> RefereeEngine:
    store = Store(data_dir)
    return RefereeEngine(store, bundles or (Path(data_dir) / "bundles"), workers=workers)


def api_client(url: str):
    import httpx

    return httpx.Client(base_url=url, timeout=60.0)


@click.group()
def main():
    """Referee platform: submit graphs, run evaluations, inspect scores."""


# -- service ------------------------------------------------------------------

@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--data-dir", default="./referee-data", show_default=True)
@click.option("--bundles", default=None, help="Bundle root (default <data-dir>/bundles).")
@click.option("--admin-token", default="", help="Shared secret for admin endpoints.")
@click.option("--workers", default=4, show_default=True, type=int)
@click.option("--static-dir", default=None, help="Serve a built web console from this directory.")
@domain_errors
def serve(host, port, data_dir, bundles, admin_token, workers, static_dir):
    """Run the HTTP service."""
    import uvicorn

    from .api import create_app

    engine = offline_engine(data_dir, bundles, workers)
    app = create_app(engine, admin_token=admin_token, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


# -- participant commands -------------------------------------------------------

@main.command()
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--team", required=True)
@click.option("--track", required=True, type=int)
@click.option("--url", default=None, help="Service base URL (online mode).")
@click.option("--offline", is_flag=True, help="Write directly into a local store.")
@click.option("--data-dir", default="./referee-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def submit(graph_file, team, track, url, offline, data_dir, as_json):
    """Submit a graph for evaluation."""
    text = Path(graph_file).read_text()
    if offline or url is None:
        graph = parse_graph(text)
        engine = offline_engine(data_dir, None)
        sub_id = engine.submit(team, track, graph)
        payload = {"id": sub_id, "status": "Submitted"}
    else:
        with api_client(url) as client:
            resp = client.post("/api/v1/submissions",
                               json={"team": team, "track": track, "graph": json.loads(text)})
            if resp.status_code != 201:
                click.echo(f"error: {resp.status_code} {resp.text}", err=True)
                sys.exit(1)
            payload = resp.json()
    emit(payload, as_json, payload["id"])


@main.command()
@click.argument("submission_id")
@click.option("--url", default=None)
@click.option("--data-dir", default="./referee-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def status(submission_id, url, data_dir, as_json):
    """Show a submission's lifecycle state and scores."""
    if url:
        with api_client(url) as client:
            resp = client.get(f"/api/v1/submissions/{submission_id}")
            if resp.status_code != 200:
                click.echo(f"error: {resp.status_code} {resp.text}", err=True)
                sys.exit(1)
            payload = resp.json()
    else:
        engine = offline_engine(data_dir, None)
        sub = engine.store.get_submission(submission_id)
        payload = {"submission": {
            "id": sub.id, "team": sub.team, "track": sub.track,
            "status": sub.status.value, "submitted_at": sub.submitted_at,
            "failure_reason": sub.failure_reason,
        }}
        records = engine.store.records_for_submission(submission_id)
        if records:
            payload["score_record"] = records[-1].to_dict()
    emit(payload, as_json, payload["submission"]["status"])


@main.command()
@click.option("--track", required=True, type=int)
@click.option("--url", default=None)
@click.option("--data-dir", default="./referee-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def leaderboard(track, url, data_dir, as_json):
    """Print the current standings for a track."""
    if url:
        with api_client(url) as client:
            resp = client.get(f"/api/v1/leaderboard/{track}")
            if resp.status_code != 200:
                click.echo(f"error: {resp.status_code} {resp.text}", err=True)
                sys.exit(1)
            entries = resp.json()
    else:
        engine = offline_engine(data_dir, None)
        entries = [e.to_dict() for e in engine.leaderboard(track)]
    if as_json:
        for entry in entries:
            click.echo(json.dumps(entry, sort_keys=True))
    else:
        for entry in entries:
            click.echo(f"{entry['rank']:>3}  {entry['team']:<20} "
                       f"{entry['best_final_score']:.6f}  {entry['latency_ms']:.3f} ms")


@main.command()
@click.option("--team", required=True)
@click.option("--track", required=True, type=int)
@click.option("--url", default=None)
@click.option("--data-dir", default="./referee-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def history(team, track, url, data_dir, as_json):
    """Print a team's score time series for a track."""
    if url:
        with api_client(url) as client:
            resp = client.get(f"/api/v1/teams/{team}/history", params={"track": track})
            if resp.status_code != 200:
                click.echo(f"error: {resp.status_code} {resp.text}", err=True)
                sys.exit(1)
            payload = resp.json()
    else:
        engine = offline_engine(data_dir, None)
        payload = engine.score_history(team, track).to_dict()
    if as_json:
        for point in payload["points"]:
            click.echo(json.dumps(point, sort_keys=True))
    else:
        for point in payload["points"]:
            click.echo(f"{point['evaluated_at']}  {point['final_score']:.6f}")


@main.command()
@click.option("--track", default=None, type=int, help="Restrict the run to one track.")
@click.option("--url", default=None)
@click.option("--admin-token", default="")
@click.option("--data-dir", default="./referee-data", show_default=True)
@click.option("--bundles", default=None)
@click.option("--workers", default=4, type=int)
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def evaluate(track, url, admin_token, data_dir, bundles, workers, as_json):
    """Evaluate all pending submissions (a "daily" batch)."""
    if url:
        with api_client(url) as client:
            body = {} if track is None else {"track": track}
            resp = client.post("/api/v1/admin/runs", json=body,
                               headers={"X-Admin-Token": admin_token})
            if resp.status_code != 202:
                click.echo(f"error: {resp.status_code} {resp.text}", err=True)
                sys.exit(1)
            payload = resp.json()
            emit(payload, as_json, f"started {payload['run_id']}")
            return
    engine = offline_engine(data_dir, bundles, workers)
    report = engine.run_batch(track)
    payload = report.to_dict()
    emit(payload, as_json,
         f"run {report.run_id}: scored={report.scored} rejected={report.rejected} "
         f"failed={report.failed} total={report.total}")


# -- standalone tools --------------------------------------------------------------

@main.command("optimize")
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--passes", default=None,
              help="Comma-separated pass list (default: full pipeline).")
@click.option("--report", "report_file", default=None, type=click.Path(dir_okay=False),
              help="Write the pass reports as a JSON array.")
@click.option("-o", "--output", default=None, type=click.Path(dir_okay=False),
              help="Write the optimized graph here.")
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def optimize_cmd(graph_file, passes, report_file, output, as_json):
    """Run optimizer passes on a graph file."""
    graph = parse_graph(Path(graph_file).read_text())
    pass_list = passes.split(",") if passes else None
    optimized, reports = optimize(graph, pass_list)
    if output:
        Path(output).write_text(serialize_graph(optimized))
    if report_file:
        Path(report_file).write_text(json.dumps([r.to_dict() for r in reports], indent=1))
    total_rewrites = sum(len(r.rewrites) for r in reports)
    payload = {
        "nodes_before": len(graph.nodes),
        "nodes_after": len(optimized.nodes),
        "rewrites": total_rewrites,
        "passes": [r.to_dict() for r in reports],
    }
    emit(payload, as_json,
         f"nodes {len(graph.nodes)} -> {len(optimized.nodes)}, {total_rewrites} rewrites")


@main.command("profile")
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--device", default="sd8-elite-sim", show_default=True,
              help="Builtin profile name or a profile JSON file.")
@click.option("--runs", default=1, show_default=True, type=int)
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def profile_cmd(graph_file, device, runs, as_json):
    """Simulate a graph's latency on a device profile."""
    graph = parse_graph(Path(graph_file).read_text())
    dev = load_device_profile(device)
    report = profile_graph(graph, dev, runs=runs)
    payload = {"device": dev.name, "total_ms": report.total_ms, "runs": report.runs,
               "per_node_us": report.per_node_us}
    emit(payload, as_json, f"{report.total_ms:.6f} ms on {dev.name}")


@main.command()
@click.option("--track", required=True, type=int)
@click.option("--accuracy", default=None, type=float, help="Track 1: top-1 accuracy.")
@click.option("--latency-ms", default=None, type=float, help="Track 1: measured latency.")
@click.option("--pred", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Tracks 2-3: prediction tensor file.")
@click.option("--gt", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Tracks 2-3: ground-truth tensor file.")
@click.option("--threshold", default=0.5, show_default=True, help="Track 2 binarization.")
@click.option("--tau", default=bundlegen.DEPTH_TAU_M, show_default=True,
              help="Track 3 matching threshold (meters).")
@click.option("--fx", default=bundlegen.DEPTH_INTRINSICS.fx, show_default=True)
@click.option("--fy", default=bundlegen.DEPTH_INTRINSICS.fy, show_default=True)
@click.option("--cx", default=bundlegen.DEPTH_INTRINSICS.cx, show_default=True)
@click.option("--cy", default=bundlegen.DEPTH_INTRINSICS.cy, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def score(track, accuracy, latency_ms, pred, gt, threshold, tau, fx, fy, cx, cy, as_json):
    """Compute track metrics offline, without a service."""
    if track == 1:
        if accuracy is None or latency_ms is None:
            raise click.UsageError("track 1 needs --accuracy and --latency-ms")
        value = track1_score(accuracy, latency_ms)
        emit({"track": 1, "final_score": value}, as_json, f"{value:.6g}")
        return
    if pred is None or gt is None:
        raise click.UsageError("tracks 2 and 3 need --pred and --gt tensor files")
    pred_arr = tensor_from_json(Path(pred).read_text())
    gt_arr = tensor_from_json(Path(gt).read_text())
    if track == 2:
        value = iou(binarize_mask(pred_arr, threshold), binarize_mask(gt_arr, threshold))
        emit({"track": 2, "iou": value}, as_json, f"{value:.6g}")
    elif track == 3:
        cfg = TrackConfig(track=3, latency_limit_ms=34.0, tau_m=tau)
        res = evaluate_depth(pred_arr, gt_arr, CameraIntrinsics(fx, fy, cx, cy), cfg)
        payload = {"track": 3, "f_score": res.f_score, "precision": res.precision,
                   "recall": res.recall, "mae_m": res.mae_m, "rmse_m": res.rmse_m,
                   "abs_rel": res.abs_rel, "scale": res.scale, "shift": res.shift}
        emit(payload, as_json, f"{res.f_score:.6g}")
    else:
        raise click.UsageError(f"unknown track {track}")


@main.command("bundle-make")
@click.option("--track", required=True, type=int)
@click.option("--items", default=8, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--baseline-out", default=None, type=click.Path(dir_okay=False),
              help="Also write a graph that scores perfectly on this bundle.")
@click.option("--json", "as_json", is_flag=True)
@domain_errors
def bundle_make(track, items, seed, out, baseline_out, as_json):
    """Generate a deterministic synthetic test bundle."""
    path = bundlegen.write_bundle(out, track, items, seed)
    if baseline_out:
        Path(baseline_out).write_text(serialize_graph(bundlegen.baseline_graph(track, seed)))
    payload = {"track": track, "items": items, "seed": seed, "out": str(path)}
    emit(payload, as_json, str(path))


if __name__ == "__main__":
    main()
