import base64
import json
import os

import numpy as np
import pytest
from fastapi.testclient import TestClient

from surfseg.cli import main
from surfseg.graph import GraphParams
from surfseg.mesh import read_obj
from surfseg.service import create_app, replay_session

PARAMS = GraphParams(smoothness=2, inter_surface_max=20, inter_object_max=60,
                     column_size=31, node_spacing=0.2)


@pytest.fixture(scope="module")
def data_root(tmp_path_factory):
    root = str(tmp_path_factory.mktemp("svc-data"))
    cfg = os.path.join(root, "small.cfg")
    with open(cfg, "w") as f:
        f.write("phantom.dims = 48, 48, 48\n"
                "phantom.mesh_subdivisions = 2\n")
    assert main(["--seed", "51", "--data-root", root, "--config", cfg,
                 "phantom", "gen", "--name", "p0"]) == 0
    return root


@pytest.fixture(scope="module")
def client(data_root):
    app = create_app(data_root=data_root, graph_params=PARAMS)
    return TestClient(app)


@pytest.fixture(scope="module")
def session(client):
    r = client.post("/sessions", json={"volume": "p0", "mode": "gradient"})
    assert r.status_code == 200, r.text
    return r.json()


def test_create_session_payload(session):
    assert session["dims"] == [48, 48, 48]
    assert session["sequence"] == 0
    assert len(session["surfaces"]) == 4
    assert all(s["columns"] > 0 for s in session["surfaces"])


def test_slice_pixels_and_contours(client, session):
    sid = session["id"]
    index, _pts = _slice_through(client, sid, (0, 0))
    r = client.get(f"/sessions/{sid}/slice", params={"axis": "z",
                                                     "index": index})
    assert r.status_code == 200
    body = r.json()
    shape = body["shape"]
    raw = base64.b64decode(body["pixels_b64"])
    assert len(raw) == shape[0] * shape[1]
    img = np.frombuffer(raw, dtype=np.uint8)
    assert img.min() == 0 and img.max() >= 250
    assert body["sequence"] == session["sequence"]
    plane = body["plane_mm"]
    seen = 0
    for c in body["contours"]:
        if not c["points_world"]:
            continue
        seen += 1
        pts = np.asarray(c["points_world"])
        assert np.all(np.abs(pts[:, 2] - plane) <= 0.25 + 1e-9)
        px = np.asarray(c["points_px"])
        # pixel coordinates match the world points through the volume grid
        want = (pts[:, :2] - np.asarray(body["origin"])[:2]) \
            / np.asarray(body["spacing"])[:2]
        assert np.allclose(px, want, atol=1e-9)
    assert seen >= 1


def test_slice_errors(client, session):
    sid = session["id"]
    r = client.get(f"/sessions/{sid}/slice", params={"axis": "z",
                                                     "index": 99})
    assert r.status_code == 422
    body = r.json()
    assert set(body) == {"code", "stage", "message"}
    r = client.get(f"/sessions/{sid}/slice", params={"axis": "w",
                                                     "index": 0})
    assert r.status_code == 422
    r = client.get("/sessions/nope/slice", params={"axis": "z", "index": 0})
    assert r.status_code == 404


def test_learned_mode_requires_model(client):
    r = client.post("/sessions", json={"volume": "p0", "mode": "learned"})
    assert r.status_code == 412
    assert r.json()["code"] == "failed-precondition"
    r = client.post("/sessions", json={"volume": "p0", "mode": "learned",
                                       "rf_model": "missing.sseg"})
    assert r.status_code == 412


def test_unknown_volume_404(client):
    r = client.post("/sessions", json={"volume": "ghost"})
    assert r.status_code == 404
    assert r.json()["code"] == "not-found"


def _contour_points(client, sid, axis, index, key):
    r = client.get(f"/sessions/{sid}/slice", params={"axis": axis,
                                                     "index": index})
    for c in r.json()["contours"]:
        if (c["object"], c["surface"]) == key and c["points_world"]:
            return np.asarray(c["points_world"])
    return None


def _slice_through(client, sid, key):
    """First z index whose slice crosses the given (object, surface)."""
    for index in range(4, 44):
        pts = _contour_points(client, sid, "z", index, key)
        if pts is not None and len(pts) >= 4:
            return index, pts
    raise AssertionError(f"no z slice crosses surface {key}")


def test_nudge_undo_cycle(client, session):
    sid = session["id"]
    index, pts = _slice_through(client, sid, (0, 1))
    # push the contour outward by 0.6 mm in-plane
    center = pts[:, :2].mean(axis=0)
    moved = pts.copy()
    d = moved[:, :2] - center
    moved[:, :2] += 0.6 * d / np.linalg.norm(d, axis=1, keepdims=True)
    r0 = client.get(f"/sessions/{sid}/status")
    seq0 = r0.json()["sequence"]
    obj0 = r0.json()["objective"]
    r = client.post(f"/sessions/{sid}/nudge", json={
        "object_id": 0, "surface_id": 1, "axis": "z", "slice_index": index,
        "points": moved.tolist()})
    assert r.status_code == 200, r.text
    body = r.json()
    assert body["sequence"] == seq0 + 1
    assert body["edits"] > 0
    assert body["resolve_ms"] >= 0
    assert body["contours"]
    r = client.post(f"/sessions/{sid}/undo", json={"axis": "z",
                                                   "index": index})
    assert r.status_code == 200
    u = r.json()
    assert u["sequence"] == seq0 + 2
    assert abs(u["objective"] - obj0) < 1e-9
    assert "contours" in u


def test_nudge_validation_errors(client, session):
    sid = session["id"]
    r = client.post(f"/sessions/{sid}/nudge", json={
        "object_id": 0, "surface_id": 1, "axis": "z", "slice_index": 24,
        "points": []})
    assert r.status_code == 422
    # points far from the stated plane
    r = client.post(f"/sessions/{sid}/nudge", json={
        "object_id": 0, "surface_id": 1, "axis": "z", "slice_index": 24,
        "points": [[10.0, 10.0, 2.0]]})
    assert r.status_code == 422
    # miss: valid plane but nowhere near any column
    r = client.post(f"/sessions/{sid}/nudge", json={
        "object_id": 0, "surface_id": 1, "axis": "z", "slice_index": 0,
        "points": [[0.1, 0.1, 0.0]]})
    assert r.status_code == 422
    assert r.json()["code"] in ("nudge-miss", "invalid-argument")


def test_undo_empty_history_412(client):
    r = client.post("/sessions", json={"volume": "p0", "mode": "gradient"})
    sid = r.json()["id"]
    r = client.post(f"/sessions/{sid}/undo")
    assert r.status_code == 412


def test_export_writes_objs(client, session, tmp_path):
    sid = session["id"]
    out = str(tmp_path / "export")
    r = client.post(f"/sessions/{sid}/export", json={"out_dir": out})
    assert r.status_code == 200
    files = r.json()["files"]
    assert len(files) == 4
    for f in files:
        assert len(read_obj(f).vertices) > 0
    r = client.post(f"/sessions/{sid}/export", json={})
    assert r.status_code == 422


def test_replay_log_reproduces_session(client, data_root, session):
    sid = session["id"]
    index, pts = _slice_through(client, sid, (1, 1))
    r = client.post(f"/sessions/{sid}/nudge", json={
        "object_id": 1, "surface_id": 1, "axis": "z", "slice_index": index,
        "points": pts.tolist()})
    assert r.status_code == 200, r.text
    live = client.app.state.sessions[sid]
    log_file = os.path.join(data_root, "sessions", f"{sid}.log")
    with open(log_file) as f:
        records = [json.loads(line) for line in f]
    assert records[0]["op"] == "create"
    assert any(rec["op"] == "nudge" for rec in records)
    replayed = replay_session(data_root, PARAMS, log_file)
    assert np.array_equal(replayed.solution.x, live.solution.x)
    assert replayed.solution.objective_q == live.solution.objective_q
    assert replayed.sequence == live.sequence
