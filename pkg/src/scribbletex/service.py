"""HTTP service around editing sessions.

Endpoints mirror the library API one-to-one: create a session by uploading
a mesh and atlas, post strokes to define regions, run the pipeline per
region (or over several regions at once), and download the edited result.
Progress is pushed as server-sent events; every on-disk session artifact
is also reachable as a static file.
"""

from __future__ import annotations

import io
import json
import os
import shutil
import tempfile
import uuid
import zipfile
from typing import Optional

from fastapi import FastAPI, Form, HTTPException, Request, UploadFile
from fastapi.responses import (FileResponse, JSONResponse, Response,
                               StreamingResponse)

from . import images
from .errors import ScribbleTexError
from .pipeline import (PipelineConfig, STATES, Session, export_session,
                       run_edit, run_multi)
from .render import RenderMode
from .scribble import Stroke


def _event_log_path(session: Session) -> str:
    return os.path.join(session.dir, "events.jsonl")


def _append_event(session: Session, region: Optional[str], stage: str,
                  status: str, data: dict) -> None:
    path = _event_log_path(session)
    index = 0
    if os.path.exists(path):
        with open(path) as fh:
            index = sum(1 for _ in fh)
    entry = {"index": index, "region": region, "stage": stage,
             "status": status, "data": data}
    with open(path, "a") as fh:
        fh.write(json.dumps(entry) + "\n")


def _read_events(session: Session, since: int) -> list:
    path = _event_log_path(session)
    if not os.path.exists(path):
        return []
    with open(path) as fh:
        events = [json.loads(line) for line in fh if line.strip()]
    return [e for e in events if e["index"] >= since]


def create_app(root_dir, default_config: Optional[PipelineConfig] = None):
    os.makedirs(root_dir, exist_ok=True)
    app = FastAPI(title="scribbletex")
    app.state.root = str(root_dir)
    app.state.default_config = default_config or PipelineConfig()

    def get_session(sid: str) -> Session:
        sdir = os.path.join(app.state.root, sid)
        if not os.path.exists(os.path.join(sdir, "session.json")):
            raise HTTPException(404, f"no session {sid}")
        return Session.open(sdir)

    @app.exception_handler(ScribbleTexError)
    async def _domain_error(request: Request, exc: ScribbleTexError):
        return JSONResponse(status_code=422,
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    # --- sessions --------------------------------------------------------

    @app.post("/sessions", status_code=201)
    async def create_session(mesh: UploadFile, atlas: UploadFile,
                             config: Optional[str] = Form(None)):
        cfg = (PipelineConfig.from_json(json.loads(config)) if config
               else app.state.default_config)
        sid = uuid.uuid4().hex[:12]
        sdir = os.path.join(app.state.root, sid)
        with tempfile.TemporaryDirectory() as tmp:
            mpath = os.path.join(tmp, "mesh.obj")
            apath = os.path.join(tmp, "atlas.png")
            for upload, path in ((mesh, mpath), (atlas, apath)):
                with open(path, "wb") as fh:
                    shutil.copyfileobj(upload.file, fh)
            try:
                session = Session.create(sdir, mpath, apath, cfg)
                session.mesh          # validate upload eagerly
            except ScribbleTexError as exc:
                shutil.rmtree(sdir, ignore_errors=True)
                raise HTTPException(422, f"{type(exc).__name__}: {exc}")
        return {"id": sid, "views": [s.name() for s in session.view_presets()]}

    @app.get("/sessions/{sid}")
    async def session_info(sid: str):
        session = get_session(sid)
        state = session._read_state()
        return {"id": sid, "regions": state["regions"],
                "states": list(STATES),
                "views": [s.name() for s in session.view_presets()],
                "config": session.config.to_json()}

    # --- views -----------------------------------------------------------

    @app.get("/sessions/{sid}/views/{view}/{kind}.png")
    async def view_image(sid: str, view: str, kind: str):
        session = get_session(sid)
        if kind not in ("color", "geometry"):
            raise HTTPException(404, "kind must be color or geometry")
        try:
            spec = session.find_view(view)
        except KeyError:
            raise HTTPException(404, f"unknown view {view}")
        mode = RenderMode.TEXTURED if kind == "color" else RenderMode.GEOMETRY
        frame = session.frame(spec, mode)
        buf = io.BytesIO()
        images.save_png(buf, frame.color)
        return Response(buf.getvalue(), media_type="image/png")

    # --- regions ---------------------------------------------------------

    @app.post("/sessions/{sid}/regions", status_code=201)
    async def add_regions(sid: str, body: dict):
        session = get_session(sid)
        strokes = [Stroke.from_dict(d) for d in body.get("strokes", [])]
        if not strokes:
            raise HTTPException(422, "no strokes supplied")
        try:
            rids = session.add_strokes(strokes, hint=body.get("hint"))
        except KeyError as exc:
            raise HTTPException(404, str(exc))
        return {"regions": rids}

    def get_region(session: Session, rid: str) -> None:
        if rid not in session._read_state()["regions"]:
            raise HTTPException(404, f"no region {rid}")

    @app.post("/sessions/{sid}/regions/{rid}/refine")
    async def refine(sid: str, rid: str):
        from .pipeline import refine_stage
        session = get_session(sid)
        get_region(session, rid)
        tmask = refine_stage(session, rid)
        return {"region": rid, "state": session.region_state(rid),
                "texels": int(tmask.sum()),
                "mask_url": f"/sessions/{sid}/artifacts/regions/{rid}/texel_mask.png"}

    @app.get("/sessions/{sid}/regions/{rid}/intents")
    async def intents(sid: str, rid: str):
        from dataclasses import asdict
        from .pipeline import intent_stage, refine_stage
        session = get_session(sid)
        get_region(session, rid)
        refine_stage(session, rid)
        preds = intent_stage(session, rid)
        return {"region": rid, "intents": [asdict(p) for p in preds]}

    @app.post("/sessions/{sid}/regions/{rid}/run")
    async def run_region(sid: str, rid: str, body: Optional[dict] = None):
        session = get_session(sid)
        get_region(session, rid)
        rank = (body or {}).get("intent_rank")

        def on_event(stage, status, data):
            _append_event(session, rid, stage, status, data)

        _, report = run_edit(session, rid, chosen_intent_rank=rank,
                             on_event=on_event)
        report["atlas_url"] = f"/sessions/{sid}/artifacts/atlas_current.png"
        return report

    @app.post("/sessions/{sid}/run-multi")
    async def run_regions(sid: str, body: dict):
        session = get_session(sid)
        rids = body.get("region_ids", [])
        for rid in rids:
            get_region(session, rid)
        if not rids:
            raise HTTPException(422, "region_ids required")

        def on_event(stage, status, data):
            _append_event(session, None, stage, status, data)

        _, report = run_multi(session, rids, on_event=on_event)
        report["atlas_url"] = f"/sessions/{sid}/artifacts/atlas_current.png"
        return report

    # --- export / artifacts / events -------------------------------------

    @app.get("/sessions/{sid}/export")
    async def export(sid: str):
        session = get_session(sid)
        out = os.path.join(session.dir, "export")
        obj, png = export_session(session, out)
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w") as zf:
            zf.write(obj, "mesh.obj")
            zf.write(png, "atlas.png")
        return Response(buf.getvalue(), media_type="application/zip",
                        headers={"Content-Disposition":
                                 f'attachment; filename="{sid}.zip"'})

    @app.get("/sessions/{sid}/artifacts/{path:path}")
    async def artifact(sid: str, path: str):
        session = get_session(sid)
        base = os.path.realpath(session.dir)
        full = os.path.realpath(os.path.join(base, path))
        if not full.startswith(base + os.sep) or not os.path.isfile(full):
            raise HTTPException(404, f"no artifact {path}")
        return FileResponse(full)

    @app.get("/sessions/{sid}/events")
    async def events(sid: str, request: Request, since: int = 0):
        session = get_session(sid)
        last = request.headers.get("Last-Event-ID")
        if last is not None:
            since = int(last) + 1

        def stream():
            for e in _read_events(session, since):
                yield (f"id: {e['index']}\nevent: {e['stage']}\n"
                       f"data: {json.dumps(e)}\n\n")

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def main(argv=None):                                    # pragma: no cover
    import argparse
    import uvicorn

    parser = argparse.ArgumentParser(description="scribbletex HTTP service")
    parser.add_argument("--root", default="./sessions",
                        help="directory holding session state")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--config", help="TOML pipeline config")
    args = parser.parse_args(argv)
    cfg = PipelineConfig.from_toml(args.config) if args.config else None
    uvicorn.run(create_app(args.root, cfg), host=args.host, port=args.port)


if __name__ == "__main__":                              # pragma: no cover
    main()
