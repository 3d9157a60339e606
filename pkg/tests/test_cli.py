import json
import os

import numpy as np
import pytest

from scribbletex import load_mesh
from scribbletex.cli import main

FRONT = "t+000_p000.0"


def write_strokes(path, strokes=None, hint=None):
    strokes = strokes if strokes is not None else [
        {"view_id": FRONT, "color": [255, 40, 40], "radius": 5,
         "points": [[58, 58], [70, 70]]}]
    body = {"strokes": strokes}
    if hint:
        body["hint"] = hint
    path.write_text(json.dumps(body))
    return path


def write_config(path, **kw):
    lines = [f"resolution = {kw.pop('resolution', 128)}",
             f"gen_size = {kw.pop('gen_size', 64)}",
             f"seed = {kw.pop('seed', 42)}"]
    lines += [f"{k} = {v}" for k, v in kw.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def run(asset_dir, tmp_path, *extra, strokes=None, hint=None):
    out = tmp_path / "out"
    args = ["--mesh", str(asset_dir / "cube.obj"),
            "--atlas", str(asset_dir / "checker.png"),
            "--strokes", str(write_strokes(tmp_path / "strokes.json",
                                           strokes, hint)),
            "--config", str(write_config(tmp_path / "cfg.toml")),
            "--out", str(out), *extra]
    return main(args), out


def test_success_writes_outputs(asset_dir, tmp_path, capsys):
    code, out = run(asset_dir, tmp_path)
    assert code == 0
    mesh = load_mesh(out / "mesh.obj", out / "atlas.png")
    assert mesh.n_triangles == 12
    report = json.loads((out / "report.json").read_text())
    assert [s["stage"] for s in report["stages"]] == [
        "refine", "intent", "patch", "stamp", "integrate"]
    captured = capsys.readouterr()
    assert "report.json" in captured.out
    assert not (out / "stages").exists()


def test_dump_stages_keeps_artifacts(asset_dir, tmp_path):
    code, out = run(asset_dir, tmp_path, "--dump-stages")
    assert code == 0
    stages = out / "stages"
    assert (stages / "regions" / "r000" / "texel_mask.png").exists()
    assert (stages / "regions" / "r000" / "patch.png").exists()
    assert (stages / "transcript.jsonl").exists()


def test_deterministic_across_runs(asset_dir, tmp_path):
    from scribbletex import images
    atlases = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        code, out = run(asset_dir, d)
        assert code == 0
        atlases.append(images.load_png(out / "atlas.png", "RGBA"))
    np.testing.assert_array_equal(atlases[0], atlases[1])


def test_missing_mesh_exit_1(asset_dir, tmp_path, capsys):
    code = main(["--mesh", str(tmp_path / "nope.obj"),
                 "--atlas", str(asset_dir / "checker.png"),
                 "--strokes", str(write_strokes(tmp_path / "s.json")),
                 "--out", str(tmp_path / "out")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_corrupt_atlas_exit_1(asset_dir, tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"junk")
    code = main(["--mesh", str(asset_dir / "cube.obj"),
                 "--atlas", str(bad),
                 "--strokes", str(write_strokes(tmp_path / "s.json")),
                 "--out", str(tmp_path / "out")])
    assert code == 1


def test_malformed_strokes_exit_2(asset_dir, tmp_path, capsys):
    bad = tmp_path / "s.json"
    bad.write_text("{broken json")
    code = main(["--mesh", str(asset_dir / "cube.obj"),
                 "--atlas", str(asset_dir / "checker.png"),
                 "--strokes", str(bad), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "malformed" in capsys.readouterr().err


def test_empty_strokes_exit_2(asset_dir, tmp_path):
    code, _ = run(asset_dir, tmp_path, strokes=[])
    assert code == 2


def test_background_scribble_exit_2(asset_dir, tmp_path):
    code, _ = run(asset_dir, tmp_path, strokes=[
        {"view_id": FRONT, "color": [255, 0, 0], "radius": 2,
         "points": [[2, 2]]}])
    assert code == 2


def test_bad_intent_rank_exit_4(asset_dir, tmp_path):
    code, _ = run(asset_dir, tmp_path, "--intent-rank", "99")
    assert code == 4


def test_bad_config_exit_2(asset_dir, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("n_intents = 0\n")
    code = main(["--mesh", str(asset_dir / "cube.obj"),
                 "--atlas", str(asset_dir / "checker.png"),
                 "--strokes", str(write_strokes(tmp_path / "s.json")),
                 "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == 2


def test_missing_config_exit_1(asset_dir, tmp_path):
    code = main(["--mesh", str(asset_dir / "cube.obj"),
                 "--atlas", str(asset_dir / "checker.png"),
                 "--strokes", str(write_strokes(tmp_path / "s.json")),
                 "--config", str(tmp_path / "nope.toml"),
                 "--out", str(tmp_path / "out")])
    assert code == 1


def test_multi_region_strokes(asset_dir, tmp_path):
    code, out = run(asset_dir, tmp_path, strokes=[
        {"view_id": FRONT, "color": [255, 0, 0], "radius": 4,
         "points": [[45, 45]]},
        {"view_id": FRONT, "color": [0, 0, 255], "radius": 4,
         "points": [[85, 85]]}])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["failures"] == {}
    assert len(report["regions"]) == 2


def test_seed_override_changes_config(asset_dir, tmp_path, monkeypatch):
    # --seed beats both the config file and the environment
    code, out = run(asset_dir, tmp_path, "--seed", "7", "--dump-stages")
    assert code == 0
    state = json.loads((out / "stages" / "session.json").read_text())
    assert state["config"]["seed"] == 7
