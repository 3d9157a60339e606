"""Screen <-> texture-space mask mapping and iterative mask refinement.

The G-buffers of a ViewFrame give an exact per-pixel screen->UV map; this
module lifts screen masks into texel masks (with a small morphological
close to fill sampling holes), projects texel masks back onto views, and
runs the multi-view refinement loop that grows a coarse scribble mask into
a geometry-aligned edit region using a segmentation backend on textureless
renders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .backends import SegmentRequest
from .errors import BackendError, EmptyScribble, SegmentationBackendError
from .geometry import TexturedMesh
from .render import RenderMode, ViewFrame, render
from .scribble import ScribbleRegion

CLOSE_KERNEL = np.ones((3, 3), dtype=bool)
MIN_ENCLOSING_COVERAGE = 0.9     # candidate must contain this share of the prompt
MIN_VISIBLE_FRACTION = 0.005     # skip views where the region covers less


def uv_to_texel(uv: np.ndarray, atlas_dims) -> tuple:
    """UV (..., 2) -> (rows, cols) into the atlas; v grows upward, rows down."""
    h, w = atlas_dims
    col = np.clip((uv[..., 0] * w).astype(np.int64), 0, w - 1)
    row = np.clip(((1.0 - uv[..., 1]) * h).astype(np.int64), 0, h - 1)
    return row, col


def close_mask(mask: np.ndarray) -> np.ndarray:
    """3x3 morphological close that does not eat texels at the image border."""
    dil = ndimage.binary_dilation(mask, structure=CLOSE_KERNEL)
    return ndimage.binary_erosion(dil, structure=CLOSE_KERNEL, border_value=1)


def screen_to_texel(mask: np.ndarray, frame: ViewFrame, atlas_dims,
                    *, close: bool = True) -> np.ndarray:
    """Lift a screen mask to the texel mask it covers through the G-buffers."""
    if mask.shape != frame.face_id.shape:
        raise ValueError("mask dimensions != frame resolution")
    sel = mask.astype(bool) & frame.foreground
    tmask = np.zeros(atlas_dims, dtype=bool)
    if sel.any():
        row, col = uv_to_texel(frame.uv[sel], atlas_dims)
        tmask[row, col] = True
        if close:
            tmask = close_mask(tmask)
    return tmask


def texel_to_screen(tmask: np.ndarray, frame: ViewFrame) -> np.ndarray:
    """Screen pixels whose interpolated UV lands on a set texel."""
    fg = frame.foreground
    out = np.zeros_like(fg)
    if fg.any() and tmask.any():
        row, col = uv_to_texel(frame.uv[fg], tmask.shape)
        out[fg] = tmask[row, col]
    return out


def mask_bbox(mask: np.ndarray) -> tuple:
    """(x, y, w, h) bounding box of a nonempty mask."""
    ys, xs = np.nonzero(mask)
    return (int(xs.min()), int(ys.min()),
            int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def select_enclosing_candidate(candidates: list, prompt: np.ndarray) -> np.ndarray:
    """Smallest-area candidate containing >= 90% of the prompt; fall back to
    the largest-overlap candidate when none qualifies."""
    prompt_area = int(prompt.sum())
    best_overlap, fallback = -1, None
    for cand in candidates:               # already sorted by area ascending
        overlap = int((cand.mask & prompt).sum())
        if overlap >= MIN_ENCLOSING_COVERAGE * prompt_area:
            return cand.mask
        if overlap > best_overlap:
            best_overlap, fallback = overlap, cand.mask
    return fallback


@dataclass
class RefinementStep:
    view_id: str
    prompt_mask: np.ndarray       # screen mask sent to the backend
    segment_mask: np.ndarray      # accepted segmentation result
    texel_mask: np.ndarray        # region state after this step


@dataclass
class RefinementTrace:
    steps: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.steps[-1].texel_mask


SegmentFn = Callable[[SegmentRequest], list]


def refine_region(mesh: TexturedMesh, region: ScribbleRegion, views: list,
                  seg: SegmentFn) -> RefinementTrace:
    """Iteratively refine a scribble into a geometry-aligned texel mask.

    The scribble's own view must be first in ``views``.  Each step queries
    the segmentation backend on the textureless (geometry) render, prompts
    it with the current projected mask, and union-lifts the accepted
    segment into the texel region.  Views where the projected region
    covers < 0.5% of the frame contribute no step.
    """
    if not region.screen_mask.any():
        raise EmptyScribble("region has an empty screen mask")
    if views[0].name() != region.view_id:
        raise ValueError("region's source view must be first in the view list")

    atlas_dims = mesh.atlas_dims
    trace = RefinementTrace()
    tmask = None
    for i, spec in enumerate(views):
        frame = render(mesh, spec, RenderMode.GEOMETRY)
        if i == 0:
            prompt = region.screen_mask & frame.foreground
        else:
            prompt = texel_to_screen(tmask, frame)
            if prompt.sum() < MIN_VISIBLE_FRACTION * prompt.size:
                continue
        if not prompt.any():
            continue
        req = SegmentRequest(image=frame.color, prompt_mask=prompt,
                             prompt_box=mask_bbox(prompt))
        try:
            candidates = seg(req)
        except BackendError as exc:
            raise SegmentationBackendError(
                f"segmentation failed at view {spec.name()}: {exc}",
                payload=getattr(exc, "payload", None), trace=trace) from exc
        accepted = select_enclosing_candidate(candidates, prompt)
        lifted = screen_to_texel(accepted, frame, atlas_dims)
        tmask = lifted if tmask is None else (tmask | lifted)
        trace.steps.append(RefinementStep(spec.name(), prompt, accepted,
                                          tmask.copy()))
    if not trace.steps:
        raise EmptyScribble("scribble not visible in any view")
    return trace


def bypass_refinement(mesh: TexturedMesh, region: ScribbleRegion,
                      frame: ViewFrame) -> np.ndarray:
    """Follow the scribble strictly: lift the raw mask with no segmentation."""
    if not region.screen_mask.any():
        raise EmptyScribble("region has an empty screen mask")
    return screen_to_texel(region.screen_mask, frame, mesh.atlas_dims)
