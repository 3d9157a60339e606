import io
import json
import zipfile

import numpy as np
import pytest
from fastapi.testclient import TestClient

from scribbletex import PipelineConfig, load_mesh
from scribbletex.service import create_app

FRONT = "t+000_p000.0"


@pytest.fixture()
def client(tmp_path):
    cfg = PipelineConfig(resolution=128, gen_size=64, seed=42)
    app = create_app(tmp_path / "root", default_config=cfg)
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def sid(client, asset_dir):
    with open(asset_dir / "cube.obj", "rb") as mesh, \
            open(asset_dir / "checker.png", "rb") as atlas:
        resp = client.post("/sessions", files={"mesh": ("cube.obj", mesh),
                                               "atlas": ("atlas.png", atlas)})
    assert resp.status_code == 201
    return resp.json()["id"]


def post_strokes(client, sid, points=((58, 58), (70, 70)),
                 color=(255, 40, 40)):
    body = {"strokes": [{"view_id": FRONT, "color": list(color),
                         "radius": 5, "points": [list(p) for p in points]}]}
    resp = client.post(f"/sessions/{sid}/regions", json=body)
    assert resp.status_code == 201
    return resp.json()["regions"]


def test_create_session_returns_views(client, sid):
    info = client.get(f"/sessions/{sid}").json()
    assert info["id"] == sid
    assert FRONT in info["views"]
    assert info["regions"] == {}
    assert info["config"]["resolution"] == 128


def test_unknown_session_404(client):
    assert client.get("/sessions/nope").status_code == 404


def test_corrupt_mesh_rejected(client, asset_dir):
    with open(asset_dir / "checker.png", "rb") as atlas:
        resp = client.post("/sessions", files={
            "mesh": ("bad.obj", io.BytesIO(b"not an obj\n")),
            "atlas": ("atlas.png", atlas)})
    assert resp.status_code == 422


def test_view_png_round_trip(client, sid):
    resp = client.get(f"/sessions/{sid}/views/{FRONT}/color.png")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    geo = client.get(f"/sessions/{sid}/views/{FRONT}/geometry.png")
    assert geo.status_code == 200
    assert client.get(f"/sessions/{sid}/views/{FRONT}/nope.png").status_code == 404
    assert client.get(f"/sessions/{sid}/views/bogus/color.png").status_code == 404


def test_add_regions_and_states(client, sid):
    rids = post_strokes(client, sid)
    assert len(rids) == 1
    info = client.get(f"/sessions/{sid}").json()
    assert info["regions"] == {rids[0]: "scribbled"}


def test_empty_strokes_rejected(client, sid):
    assert client.post(f"/sessions/{sid}/regions",
                       json={"strokes": []}).status_code == 422


def test_background_only_stroke_is_domain_error(client, sid):
    resp = client.post(f"/sessions/{sid}/regions", json={
        "strokes": [{"view_id": FRONT, "color": [255, 0, 0], "radius": 2,
                     "points": [[2, 2]]}]})   # corner pixel: background
    assert resp.status_code == 422
    assert resp.json()["error"] == "EmptyScribble"


def test_refine_endpoint(client, sid):
    rid, = post_strokes(client, sid)
    resp = client.post(f"/sessions/{sid}/regions/{rid}/refine")
    assert resp.status_code == 200
    body = resp.json()
    assert body["state"] == "refined" and body["texels"] > 0
    mask = client.get(body["mask_url"])
    assert mask.status_code == 200


def test_intents_endpoint(client, sid):
    rid, = post_strokes(client, sid)
    resp = client.get(f"/sessions/{sid}/regions/{rid}/intents")
    preds = resp.json()["intents"]
    assert [p["rank"] for p in preds] == [1, 2, 3, 4]
    assert all(p["semantic"] for p in preds)


def test_run_region_full(client, sid):
    rid, = post_strokes(client, sid)
    resp = client.post(f"/sessions/{sid}/regions/{rid}/run", json={})
    assert resp.status_code == 200
    report = resp.json()
    assert [s["stage"] for s in report["stages"]] == [
        "refine", "intent", "patch", "stamp", "integrate"]
    atlas = client.get(report["atlas_url"])
    assert atlas.status_code == 200
    info = client.get(f"/sessions/{sid}").json()
    assert info["regions"][rid] == "integrated"


def test_run_with_intent_rank(client, sid):
    rid, = post_strokes(client, sid)
    report = client.post(f"/sessions/{sid}/regions/{rid}/run",
                         json={"intent_rank": 3}).json()
    assert report["chosen_intent"]["rank"] == 3


def test_run_multi_endpoint(client, sid):
    rids = []
    rids += post_strokes(client, sid, points=[(45, 45)], color=(255, 0, 0))
    rids += post_strokes(client, sid, points=[(85, 85)], color=(0, 0, 255))
    resp = client.post(f"/sessions/{sid}/run-multi",
                       json={"region_ids": rids})
    assert resp.status_code == 200
    assert resp.json()["failures"] == {}
    resp = client.post(f"/sessions/{sid}/run-multi", json={"region_ids": []})
    assert resp.status_code == 422


def test_overlapping_regions_domain_error(client, sid):
    a = post_strokes(client, sid, color=(255, 0, 0))
    b = post_strokes(client, sid, color=(0, 255, 0))
    resp = client.post(f"/sessions/{sid}/run-multi",
                       json={"region_ids": a + b})
    assert resp.status_code == 422
    assert resp.json()["error"] == "OverlappingRegions"


def test_events_sse(client, sid):
    rid, = post_strokes(client, sid)
    client.post(f"/sessions/{sid}/regions/{rid}/run", json={})
    resp = client.get(f"/sessions/{sid}/events")
    assert resp.headers["content-type"].startswith("text/event-stream")
    payloads = [json.loads(line[len("data: "):])
                for line in resp.text.splitlines()
                if line.startswith("data: ")]
    started = [e["stage"] for e in payloads if e["status"] == "started"]
    assert started == ["refine", "intent", "patch", "stamp", "integrate"]
    # reconnect with Last-Event-ID resumes after the delivered events
    last = payloads[-1]["index"]
    resume = client.get(f"/sessions/{sid}/events",
                        headers={"Last-Event-ID": str(last)})
    assert "data: " not in resume.text


def test_artifact_path_traversal_blocked(client, sid):
    resp = client.get(f"/sessions/{sid}/artifacts/../{sid}/session.json")
    assert resp.status_code in (404, 422)
    assert client.get(f"/sessions/{sid}/artifacts/missing.png").status_code == 404


def test_export_zip(client, sid, tmp_path):
    rid, = post_strokes(client, sid)
    client.post(f"/sessions/{sid}/regions/{rid}/run", json={})
    resp = client.get(f"/sessions/{sid}/export")
    assert resp.status_code == 200
    with zipfile.ZipFile(io.BytesIO(resp.content)) as zf:
        assert sorted(zf.namelist()) == ["atlas.png", "mesh.obj"]
        zf.extractall(tmp_path / "x")
    mesh = load_mesh(tmp_path / "x" / "mesh.obj", tmp_path / "x" / "atlas.png")
    assert mesh.n_triangles == 12
    atlas_resp = client.get(f"/sessions/{sid}/artifacts/atlas_current.png")
    from scribbletex import images
    served = images.load_png(io.BytesIO(atlas_resp.content), "RGBA")
    np.testing.assert_array_equal(mesh.atlas, served)
