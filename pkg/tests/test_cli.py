import json
import signal
import socket
import subprocess
import sys
import time

import numpy as np
import pytest
from click.testing import CliRunner

from referee.bundlegen import baseline_graph, write_bundle
from referee.cli import main
from referee.core.bundles import tensor_to_json
from referee.device import BUILTIN_PROFILES, profile
from referee.graph import serialize_graph
from referee.metrics import track1_score

from helpers import norm_conv_graph, build_graph

runner = CliRunner()


def invoke(*args):
    return runner.invoke(main, list(args), catch_exceptions=False)


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def test_score_track1_winner_row():
    result = invoke("score", "--track", "1", "--accuracy", "0.974", "--latency-ms", "1.612")
    assert result.exit_code == 0
    assert result.output.strip() == "0.974"


def test_score_track1_parity_full_precision():
    result = invoke("score", "--track", "1", "--accuracy", "0.8137",
                    "--latency-ms", "7.31", "--json")
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["final_score"] == track1_score(0.8137, 7.31)


def test_score_track2_pair(tmp_path):
    pred = tmp_path / "pred.json"
    gt = tmp_path / "gt.json"
    pred.write_text(tensor_to_json("p", np.array([[1.0, 1.0, 0.0]])))
    gt.write_text(tensor_to_json("g", np.array([[0.0, 1.0, 1.0]])))
    result = invoke("score", "--track", "2", "--pred", str(pred), "--gt", str(gt), "--json")
    assert result.exit_code == 0
    assert json.loads(result.output)["iou"] == pytest.approx(1 / 3)


def test_score_track3_normalized_gt(tmp_path):
    rng = np.random.default_rng(0)
    gt_map = 2.0 + rng.random((24, 32))
    pred_map = (gt_map - gt_map.min()) / (gt_map.max() - gt_map.min())
    pred = tmp_path / "pred.json"
    gt = tmp_path / "gt.json"
    pred.write_text(tensor_to_json("p", pred_map))
    gt.write_text(tensor_to_json("g", gt_map))
    result = invoke("score", "--track", "3", "--pred", str(pred), "--gt", str(gt), "--json")
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["f_score"] == pytest.approx(100.0, abs=1e-6)


def test_score_usage_error_missing_args():
    result = runner.invoke(main, ["score", "--track", "1"])
    assert result.exit_code == 2


def test_unknown_flag_exits_2():
    result = runner.invoke(main, ["score", "--frobnicate"])
    assert result.exit_code == 2


# ---------------------------------------------------------------------------
# optimize / profile
# ---------------------------------------------------------------------------

def test_optimize_reports_zero_rewrites_on_constant_free_graph(tmp_path):
    g = build_graph("plain", [("x", (1, 4))], ["y"], [("n", "ReLU", ["x"], "y", {})])
    path = tmp_path / "g.json"
    path.write_text(serialize_graph(g))
    result = invoke("optimize", str(path), "--passes", "constant_fold", "--json")
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["rewrites"] == 0
    assert payload["nodes_after"] == payload["nodes_before"]


def test_optimize_writes_graph_and_report(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(serialize_graph(norm_conv_graph()))
    out = tmp_path / "opt.json"
    report = tmp_path / "report.json"
    result = invoke("optimize", str(path),
                    "--passes", "constant_fold,fuse_norm_conv,fuse_scale_gemm",
                    "-o", str(out), "--report", str(report))
    assert result.exit_code == 0
    assert out.exists()
    reports = json.loads(report.read_text())
    assert [r["pass_name"] for r in reports] == [
        "constant_fold", "fuse_normalization_into_conv", "fuse_scale_into_gemm"]


def test_optimize_unknown_pass_is_domain_error(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(serialize_graph(norm_conv_graph()))
    result = runner.invoke(main, ["optimize", str(path), "--passes", "despeckle"])
    assert result.exit_code == 1
    assert "despeckle" in result.output


def test_profile_matches_library_call(tmp_path):
    g = baseline_graph(1, seed=3)
    path = tmp_path / "g.json"
    path.write_text(serialize_graph(g))
    result = invoke("profile", str(path), "--device", "sd8-elite-sim", "--json")
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["total_ms"] == profile(g, BUILTIN_PROFILES["sd8-elite-sim"]).total_ms


def test_profile_bad_graph_file_is_domain_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    result = runner.invoke(main, ["profile", str(path)])
    assert result.exit_code == 1


# ---------------------------------------------------------------------------
# bundle-make
# ---------------------------------------------------------------------------

def test_bundle_make_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        result = invoke("bundle-make", "--track", "3", "--items", "8",
                        "--seed", "7", "--out", str(out))
        assert result.exit_code == 0
    files_a = sorted(p.name for p in a.iterdir())
    assert files_a == sorted(p.name for p in b.iterdir())
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_bundle_make_baseline_out(tmp_path):
    out = tmp_path / "bundle"
    base = tmp_path / "baseline.json"
    result = invoke("bundle-make", "--track", "1", "--items", "4", "--seed", "5",
                    "--out", str(out), "--baseline-out", str(base))
    assert result.exit_code == 0
    assert json.loads(base.read_text())["nodes"]


# ---------------------------------------------------------------------------
# offline store workflow
# ---------------------------------------------------------------------------

def test_offline_submit_evaluate_leaderboard_history(tmp_path):
    data = tmp_path / "data"
    for track in (1,):
        invoke("bundle-make", "--track", "1", "--items", "6", "--seed", "7",
               "--out", str(data / "bundles" / "1"))
    graph_path = tmp_path / "model.json"
    graph_path.write_text(serialize_graph(baseline_graph(1, seed=7)))

    result = invoke("submit", str(graph_path), "--team", "cli-team", "--track", "1",
                    "--offline", "--data-dir", str(data), "--json")
    assert result.exit_code == 0
    sub_id = json.loads(result.output)["id"]

    result = invoke("evaluate", "--data-dir", str(data), "--json")
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["scored"] == 1

    result = invoke("status", sub_id, "--data-dir", str(data), "--json")
    payload = json.loads(result.output)
    assert payload["submission"]["status"] == "Scored"
    assert payload["score_record"]["metric_value"] == 1.0

    result = invoke("leaderboard", "--track", "1", "--data-dir", str(data), "--json")
    entry = json.loads(result.output.strip().splitlines()[0])
    assert entry["team"] == "cli-team" and entry["rank"] == 1

    result = invoke("history", "--team", "cli-team", "--track", "1",
                    "--data-dir", str(data), "--json")
    points = [json.loads(line) for line in result.output.strip().splitlines()]
    assert len(points) == 1


def test_status_unknown_submission_offline(tmp_path):
    result = runner.invoke(main, ["status", "sub-nope", "--data-dir", str(tmp_path)])
    assert result.exit_code == 1


# ---------------------------------------------------------------------------
# live service round trip
# ---------------------------------------------------------------------------

def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.mark.slow
def test_serve_online_round_trip(tmp_path):
    import httpx

    data = tmp_path / "data"
    write_bundle(data / "bundles" / "1", 1, 6, seed=7)
    graph_path = tmp_path / "model.json"
    graph_path.write_text(serialize_graph(baseline_graph(1, seed=7)))

    port = _free_port()
    url = f"http://127.0.0.1:{port}"
    proc = subprocess.Popen(
        [sys.executable, "-m", "referee.cli", "serve", "--port", str(port),
         "--data-dir", str(data), "--admin-token", "tok"],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    try:
        for _ in range(100):
            try:
                if httpx.get(f"{url}/api/v1/health", timeout=1.0).status_code == 200:
                    break
            except httpx.TransportError:
                time.sleep(0.1)
        else:
            pytest.fail("service did not come up")

        result = invoke("submit", str(graph_path), "--team", "net-team", "--track", "1",
                        "--url", url, "--json")
        assert result.exit_code == 0
        sub_id = json.loads(result.output)["id"]

        result = invoke("evaluate", "--url", url, "--admin-token", "tok", "--json")
        assert result.exit_code == 0
        run_id = json.loads(result.output)["run_id"]

        for _ in range(100):
            report = httpx.get(f"{url}/api/v1/admin/runs/{run_id}",
                               headers={"X-Admin-Token": "tok"}).json()
            if report["finished"]:
                break
            time.sleep(0.1)
        assert report["scored"] == 1

        result = invoke("status", sub_id, "--url", url, "--json")
        assert json.loads(result.output)["submission"]["status"] == "Scored"

        result = invoke("leaderboard", "--track", "1", "--url", url, "--json")
        entry = json.loads(result.output.strip().splitlines()[0])
        assert entry["team"] == "net-team"
    finally:
        proc.send_signal(signal.SIGTERM)
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
