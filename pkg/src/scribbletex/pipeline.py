"""End-to-end orchestration: sessions, configuration, and the edit pipeline.

A session is a plain directory tree: the uploaded mesh/atlas copies, the
rendered view frames, one subdirectory per scribble region holding every
stage artifact, and a JSONL transcript of backend calls.  Each pipeline
stage persists its artifact before the region's state advances, so a
killed process resumes from the last completed stage without repeating
backend calls.  Source files are never mutated; edits live in session
artifacts until exported.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from . import backends, images, intent, maskmap, texturing
from .backends import (BackendConfig, ChatRequest, GenImageRequest,
                       InpaintRequest, SegmentRequest, Transcript,
                       nearest_color_name)
from .errors import OverlappingRegions, ScribbleTexError
from .geometry import TexturedMesh, load_mesh, save_mesh
from .render import (RenderMode, ViewSpec, coverage_views, intent_views,
                     render)
from .scribble import ScribbleRegion, Stroke, rasterize_strokes

STATES = ("scribbled", "refined", "intent_predicted", "patch_chosen",
          "stamped", "integrated")


@dataclass
class PipelineConfig:
    n_intents: int = 4
    n_global_prompts: int = 4
    guidance_scale: float = backends.DEFAULT_GUIDANCE_SCALE
    refinement_enabled: bool = True
    erosion_radius: int = texturing.DEFAULT_EROSION_RADIUS
    seed: int = 0
    resolution: int = 512
    gen_size: int = backends.DEFAULT_GEN_SIZE
    patch_dims: Optional[tuple] = None     # None: derived per region component
    chat: BackendConfig = field(default_factory=BackendConfig)
    gen: BackendConfig = field(default_factory=BackendConfig)
    inpaint: BackendConfig = field(default_factory=BackendConfig)
    seg: BackendConfig = field(default_factory=BackendConfig)

    def __post_init__(self):
        if self.n_intents < 1 or self.n_global_prompts < 1:
            raise ValueError("n_intents and n_global_prompts must be >= 1")

    def to_json(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        for key in ("chat", "gen", "inpaint", "seg"):
            if key in d and isinstance(d[key], dict):
                d[key] = BackendConfig(**d[key])
        if d.get("patch_dims") is not None:
            d["patch_dims"] = tuple(d["patch_dims"])
        return cls(**d)

    @classmethod
    def from_toml(cls, path) -> "PipelineConfig":
        try:
            import tomllib
        except ModuleNotFoundError:         # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            return cls.from_json(tomllib.load(fh))

    @classmethod
    def from_env(cls, **kw) -> "PipelineConfig":
        return cls(chat=BackendConfig.from_env("CHAT"),
                   gen=BackendConfig.from_env("GEN"),
                   inpaint=BackendConfig.from_env("INPAINT"),
                   seg=BackendConfig.from_env("SEG"), **kw)


def stage_seed(seed: int, *labels) -> int:
    """Stable per-stage seed derived from the config seed."""
    h = hashlib.sha256(("/".join(str(x) for x in labels)).encode())
    return (seed * 1_000_003 + int.from_bytes(h.digest()[:4], "little")) % (2 ** 31)


EventFn = Callable[[str, str, dict], None]


class Session:
    """Directory-backed editing session; all state is plain files."""

    def __init__(self, directory, config: PipelineConfig):
        self.dir = str(directory)
        self.config = config
        self.transcript = Transcript(os.path.join(self.dir, "transcript.jsonl"))
        self._mesh: Optional[TexturedMesh] = None
        self._frames = {}                  # (view_id, mode) -> ViewFrame
        self._mock_chat = backends.MockChatBackend()

    # --- lifecycle -------------------------------------------------------

    @classmethod
    def create(cls, directory, mesh_path, atlas_path,
               config: Optional[PipelineConfig] = None) -> "Session":
        config = config or PipelineConfig()
        os.makedirs(directory, exist_ok=True)
        shutil.copy(mesh_path, os.path.join(directory, "mesh.obj"))
        shutil.copy(atlas_path, os.path.join(directory, "atlas.png"))
        os.makedirs(os.path.join(directory, "regions"), exist_ok=True)
        sess = cls(directory, config)
        sess._write_state({"regions": {}, "config": config.to_json()})
        return sess

    @classmethod
    def open(cls, directory) -> "Session":
        with open(os.path.join(directory, "session.json")) as fh:
            state = json.load(fh)
        return cls(directory, PipelineConfig.from_json(state["config"]))

    def _state_path(self):
        return os.path.join(self.dir, "session.json")

    def _read_state(self) -> dict:
        with open(self._state_path()) as fh:
            return json.load(fh)

    def _write_state(self, state: dict) -> None:
        tmp = self._state_path() + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(state, fh, indent=2)
        os.replace(tmp, self._state_path())

    # --- mesh / frames ---------------------------------------------------

    @property
    def mesh(self) -> TexturedMesh:
        if self._mesh is None:
            self._mesh = load_mesh(os.path.join(self.dir, "mesh.obj"),
                                   os.path.join(self.dir, "atlas.png"))
            cur = os.path.join(self.dir, "atlas_current.png")
            if os.path.exists(cur):
                self._mesh = self._mesh.with_atlas(images.load_png(cur, "RGBA"))
        return self._mesh

    def set_atlas(self, atlas: np.ndarray) -> None:
        images.save_png(os.path.join(self.dir, "atlas_current.png"), atlas)
        self._mesh = self.mesh.with_atlas(atlas)
        self._frames = {k: v for k, v in self._frames.items()
                        if k[1] != RenderMode.TEXTURED}

    def view_presets(self) -> list:
        res = self.config.resolution
        specs = intent_views(resolution=res)
        names = {s.name() for s in specs}
        for s in coverage_views(resolution=res):
            if s.name() not in names:
                specs.append(s)
                names.add(s.name())
        return specs

    def find_view(self, view_id: str) -> ViewSpec:
        for s in self.view_presets():
            if s.name() == view_id:
                return s
        raise KeyError(f"unknown view {view_id!r}")

    def frame(self, spec: ViewSpec, mode: RenderMode = RenderMode.TEXTURED):
        key = (spec.name(), mode)
        if key not in self._frames:
            frame = render(self.mesh, spec, mode)
            self._frames[key] = frame
            vdir = os.path.join(self.dir, "views", spec.name())
            os.makedirs(vdir, exist_ok=True)
            name = "color.png" if mode == RenderMode.TEXTURED else "geometry.png"
            images.save_png(os.path.join(vdir, name), frame.color)
        return self._frames[key]

    # --- regions ---------------------------------------------------------

    def region_dir(self, rid: str) -> str:
        return os.path.join(self.dir, "regions", rid)

    def add_strokes(self, strokes: list, hint: Optional[str] = None) -> list:
        """Rasterize strokes on their view; one region per connected component."""
        view_id = strokes[0].view_id
        frame = self.frame(self.find_view(view_id), RenderMode.TEXTURED)
        regions = rasterize_strokes(strokes, frame, hint=hint)
        state = self._read_state()
        ids = []
        for region in regions:
            rid = f"r{len(state['regions']):03d}"
            rdir = self.region_dir(rid)
            os.makedirs(rdir, exist_ok=True)
            images.save_png(os.path.join(rdir, "screen_mask.png"),
                            images.mask_to_u8(region.screen_mask))
            with open(os.path.join(rdir, "meta.json"), "w") as fh:
                json.dump({"color": list(region.color), "view_id": view_id,
                           "hint": hint}, fh)
            state["regions"][rid] = "scribbled"
            ids.append(rid)
        self._write_state(state)
        return ids

    def region(self, rid: str) -> ScribbleRegion:
        rdir = self.region_dir(rid)
        with open(os.path.join(rdir, "meta.json")) as fh:
            meta = json.load(fh)
        mask = images.u8_to_mask(
            images.load_png(os.path.join(rdir, "screen_mask.png"), "L"))
        return ScribbleRegion(color=tuple(meta["color"]), screen_mask=mask,
                              view_id=meta["view_id"], hint=meta.get("hint"))

    def region_state(self, rid: str) -> str:
        return self._read_state()["regions"][rid]

    def region_ids(self) -> list:
        return sorted(self._read_state()["regions"])

    def _advance(self, rid: str, new_state: str) -> None:
        state = self._read_state()
        if STATES.index(new_state) > STATES.index(state["regions"][rid]):
            state["regions"][rid] = new_state
        self._write_state(state)

    # --- backend bindings ------------------------------------------------

    def chat_fn(self):
        return lambda req: backends.chat(req, self.config.chat,
                                         self.transcript, mock=self._mock_chat)

    def seg_fn(self):
        return lambda req: backends.segment(req, self.config.seg, self.transcript)

    def inpaint_fn(self):
        return lambda req: backends.inpaint(req, self.config.inpaint,
                                            self.transcript)


# --- pipeline stages -----------------------------------------------------

def _scribble_overlay(frame_color: np.ndarray, mask: np.ndarray,
                      color) -> np.ndarray:
    out = frame_color.copy()
    out[mask] = np.asarray(color, dtype=np.uint8)
    return out


def _style_context(mesh: TexturedMesh) -> str:
    mean = mesh.atlas[..., :3].reshape(-1, 3).mean(axis=0)
    return (f"an overall {nearest_color_name(mean)} palette, "
            f"matching the model's existing texture style")


def refine_stage(session: Session, rid: str) -> np.ndarray:
    """Refined texel mask for a region (persisted; loads if already done)."""
    rdir = session.region_dir(rid)
    tpath = os.path.join(rdir, "texel_mask.png")
    if os.path.exists(tpath):
        return images.u8_to_mask(images.load_png(tpath, "L"))
    region = session.region(rid)
    spec = session.find_view(region.view_id)
    if session.config.refinement_enabled:
        specs = [spec] + [s for s in coverage_views(
            resolution=session.config.resolution) if s.name() != spec.name()]
        trace = maskmap.refine_region(session.mesh, region, specs,
                                      session.seg_fn())
        step_dir = os.path.join(rdir, "refine")
        os.makedirs(step_dir, exist_ok=True)
        for i, step in enumerate(trace.steps):
            images.save_png(os.path.join(
                step_dir, f"step_{i:02d}_{step.view_id}.png"),
                images.mask_to_u8(step.texel_mask))
        tmask = trace.final
    else:
        frame = session.frame(spec, RenderMode.TEXTURED)
        tmask = maskmap.bypass_refinement(session.mesh, region, frame)
    images.save_png(tpath, images.mask_to_u8(tmask))
    session._advance(rid, "refined")
    return tmask


def intent_stage(session: Session, rid: str) -> list:
    rdir = session.region_dir(rid)
    ipath = os.path.join(rdir, "intents.json")
    if os.path.exists(ipath):
        with open(ipath) as fh:
            return [intent.IntentPrediction(**d) for d in json.load(fh)]
    region = session.region(rid)
    view_imgs = [session.frame(s, RenderMode.TEXTURED).color
                 for s in intent_views(resolution=session.config.resolution)]
    scribble_frame = session.frame(session.find_view(region.view_id),
                                   RenderMode.TEXTURED)
    overlay = _scribble_overlay(scribble_frame.color, region.screen_mask,
                                region.color)
    images.save_png(os.path.join(rdir, "scribble_overlay.png"), overlay)
    preds = intent.predict_intent(view_imgs, overlay, region.color,
                                  session.config.n_intents, session.chat_fn(),
                                  hint=region.hint)
    with open(ipath, "w") as fh:
        json.dump([asdict(p) for p in preds], fh, indent=2)
    session._advance(rid, "intent_predicted")
    return preds


def patch_stage(session: Session, rid: str, chosen: intent.IntentPrediction,
                tmask: np.ndarray) -> texturing.TexturePatch:
    """Pick the texture patch: original atlas first, generation otherwise."""
    rdir = session.region_dir(rid)
    ppath = os.path.join(rdir, "patch.png")
    jpath = os.path.join(rdir, "patch.json")
    if os.path.exists(ppath) and os.path.exists(jpath):
        with open(jpath) as fh:
            meta = json.load(fh)
        return texturing.TexturePatch(images.load_png(ppath, "RGB"),
                                      meta["source"])
    region = session.region(rid)
    cfg = session.config
    _, _, W, H = texturing.region_bbox(tmask)
    side = texturing.default_patch_side(W, H)
    atlas_rgb = session.mesh.atlas[..., :3]

    # regions of the original texture that already match the scribble color
    # take priority over fresh generation
    atlas_try = intent.exhaustive_patch_search([atlas_rgb], region.color, side)
    atlas_dist = intent.color_distance(
        intent.mean_rgb(atlas_rgb, atlas_try.box), region.color)
    if atlas_dist < intent.ATLAS_MATCH_THRESHOLD:
        choice, source_imgs = atlas_try, [atlas_rgb]
        source = {"kind": "atlas", "box": list(choice.box)}
    else:
        prompts = intent.make_global_prompts(
            chosen, region.color, _style_context(session.mesh),
            cfg.n_global_prompts, session.chat_fn())
        with open(os.path.join(rdir, "prompts.json"), "w") as fh:
            json.dump([asdict(p) for p in prompts], fh, indent=2)
        source_imgs = []
        for i, gp in enumerate(prompts):
            imgs = backends.generate_images(GenImageRequest(
                prompt=gp.text, guidance_scale=cfg.guidance_scale,
                seed=stage_seed(cfg.seed, rid, "gen", i), count=1,
                size=cfg.gen_size), cfg.gen, session.transcript)
            source_imgs.append(imgs[0])
            images.save_png(os.path.join(rdir, f"gen_{i:02d}.png"), imgs[0])
        try:
            choice = intent.choose_patch(source_imgs, chosen.semantic,
                                         region.color, session.chat_fn())
        except ScribbleTexError:
            choice = intent.exhaustive_patch_search(source_imgs, region.color,
                                                    side)
        source = {"kind": "generated", "image_index": choice.image_index,
                  "box": list(choice.box)}

    patch = texturing.crop_resize(source_imgs[choice.image_index], choice.box,
                                  (side, side), source)
    images.save_png(ppath, patch.pixels)
    with open(jpath, "w") as fh:
        json.dump({"source": patch.source, "mean_color": list(patch.mean_color)},
                  fh, indent=2)
    session._advance(rid, "patch_chosen")
    return patch


def stamp_stage(session: Session, rid: str, tmask: np.ndarray,
                patch: texturing.TexturePatch, atlas: np.ndarray):
    """Stamp the patch over every connected component of the region."""
    rdir = session.region_dir(rid)
    apath = os.path.join(rdir, "stamped_atlas.png")
    gpath = os.path.join(rdir, "gap_mask.png")
    if os.path.exists(apath) and os.path.exists(gpath):
        return (images.load_png(apath, "RGBA"),
                images.u8_to_mask(images.load_png(gpath, "L")))
    cfg = session.config
    out = atlas.copy()
    gap = np.zeros(tmask.shape, dtype=bool)
    plans = []
    for comp, plan in texturing.plan_components(tmask, cfg.patch_dims):
        sized = texturing.crop_resize(
            patch.pixels, (0, 0, patch.dims[0], patch.dims[1]),
            plan.patch_dims, patch.source)
        out, comp_gap = texturing.stamp_patches(out, plan, comp, sized,
                                                cfg.erosion_radius)
        gap |= comp_gap
        plans.append(plan.to_json())
    with open(os.path.join(rdir, "plan.json"), "w") as fh:
        json.dump(plans, fh, indent=2)
    images.save_png(apath, out)
    images.save_png(gpath, images.mask_to_u8(gap))
    session._advance(rid, "stamped")
    return out, gap


def integrate_stage(session: Session, rid: str, atlas: np.ndarray,
                    region_mask: np.ndarray, gap: np.ndarray,
                    prompt: str) -> np.ndarray:
    rdir = session.region_dir(rid)
    fpath = os.path.join(rdir, "integrated_atlas.png")
    if os.path.exists(fpath):
        return images.load_png(fpath, "RGBA")
    cfg = session.config
    mesh = session.mesh.with_atlas(atlas)
    final = texturing.integrate(
        mesh, atlas, region_mask, gap, prompt,
        coverage_views(resolution=cfg.resolution), session.inpaint_fn(),
        seed=stage_seed(cfg.seed, rid, "integrate"))
    images.save_png(fpath, final)
    session._advance(rid, "integrated")
    return final


# --- top-level runs ------------------------------------------------------

def run_edit(session: Session, region_id: str,
             chosen_intent_rank: Optional[int] = None,
             on_event: Optional[EventFn] = None):
    """Execute every remaining stage for one region.

    Returns (final_atlas, report).  Stages that already persisted their
    artifacts are loaded, not recomputed, so interrupted runs resume
    without duplicate backend calls.
    """
    report = {"region": region_id, "stages": [], "backend_calls": {},
              "refinement": "enabled" if session.config.refinement_enabled
              else "disabled"}

    def stage(name, fn):
        if on_event:
            on_event(name, "started", {})
        t0 = time.monotonic()
        calls_before = session.transcript.call_count()
        out = fn()
        entry = {"stage": name, "seconds": round(time.monotonic() - t0, 3),
                 "backend_calls": session.transcript.call_count() - calls_before}
        report["stages"].append(entry)
        if on_event:
            on_event(name, "finished", entry)
        return out

    tmask = stage("refine", lambda: refine_stage(session, region_id))
    preds = stage("intent", lambda: intent_stage(session, region_id))
    rank = chosen_intent_rank or 1
    chosen = next((p for p in preds if p.rank == rank), None)
    if chosen is None:
        raise ScribbleTexError(
            f"no intent with rank {rank}; have 1..{len(preds)}")
    report["chosen_intent"] = asdict(chosen)
    patch = stage("patch",
                  lambda: patch_stage(session, region_id, chosen, tmask))
    atlas = session.mesh.atlas
    stamped, gap = stage("stamp", lambda: stamp_stage(session, region_id,
                                                      tmask, patch, atlas))
    final = stage("integrate", lambda: integrate_stage(
        session, region_id, stamped, tmask, gap, chosen.semantic))
    session.set_atlas(final)
    report["backend_calls"] = {
        b: session.transcript.call_count(b)
        for b in ("chat", "gen", "inpaint", "segment")}
    with open(os.path.join(session.region_dir(region_id), "report.json"),
              "w") as fh:
        json.dump(report, fh, indent=2)
    return final, report


def run_multi(session: Session, region_ids: list,
              on_event: Optional[EventFn] = None):
    """Stamp several regions, then blend all their gaps in one shared pass.

    Refined masks must be pairwise disjoint.  A failure in one region's
    chat stages does not abort the others; failures are reported.
    """
    tmasks, failures = {}, {}
    for rid in region_ids:
        tmasks[rid] = refine_stage(session, rid)
    ids = list(region_ids)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if (tmasks[a] & tmasks[b]).any():
                raise OverlappingRegions(f"regions {a} and {b} overlap")

    atlas = session.mesh.atlas.copy()
    union_region = np.zeros(session.mesh.atlas_dims, dtype=bool)
    union_gap = np.zeros(session.mesh.atlas_dims, dtype=bool)
    semantics = []
    for rid in region_ids:
        try:
            preds = intent_stage(session, rid)
            chosen = preds[0]
            patch = patch_stage(session, rid, chosen, tmasks[rid])
            atlas, gap = stamp_stage(session, rid, tmasks[rid], patch, atlas)
            union_region |= tmasks[rid]
            union_gap |= gap
            semantics.append(chosen.semantic)
        except ScribbleTexError as exc:
            failures[rid] = str(exc)

    prompt = "; ".join(semantics)
    mesh = session.mesh.with_atlas(atlas)
    final = texturing.integrate(
        mesh, atlas, union_region, union_gap, prompt,
        coverage_views(resolution=session.config.resolution),
        session.inpaint_fn(),
        seed=stage_seed(session.config.seed, "multi", "integrate"))
    session.set_atlas(final)
    for rid in region_ids:
        if rid not in failures:
            session._advance(rid, "integrated")
    report = {"regions": region_ids, "failures": failures,
              "semantics": semantics}
    with open(os.path.join(session.dir, "report_multi.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    return final, report


def export_session(session: Session, out_dir) -> tuple:
    """Write the edited mesh as an OBJ + PNG pair; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    obj = os.path.join(out_dir, "mesh.obj")
    png = os.path.join(out_dir, "atlas.png")
    save_mesh(session.mesh, obj, png)
    return obj, png
