"""Patch placement, stamping with erosion, and multi-view inpainting integration.

Given a refined texel region R, its minimum bounding box B (width W,
height H) is subdivided into a uniform grid of patch positions:

    N_w = floor(W / w),  N_h = floor(H / h)
    dx  = (W - N_w * w) / (N_w + 1),  dy = (H - N_h * h) / (N_h + 1)
    x_i = i * w + (i + 1) * dx,       y_j = j * h + (j + 1) * dy

Positions fully inside R keep the whole patch, positions disjoint from R
are discarded, and boundary positions keep only the intersection with R.
Each stamped footprint is eroded by a disk so inpainting can blend the
seams; remaining gaps are filled view by view with an inpainting backend
and back-projected into the atlas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .backends import InpaintRequest, MockInpaintBackend
from .errors import BackendError, InpaintBackendError, PatchLargerThanRegion
from .geometry import TexturedMesh
from .maskmap import texel_to_screen, uv_to_texel
from .render import RenderMode, face_normals, camera_basis, render

FULL = "full"
PARTIAL = "partial"
DISCARDED = "discarded"

DEFAULT_EROSION_RADIUS = 2
MIN_PATCH_SIDE = 16
MAX_PATCH_SIDE = 256
OVERWRITE_MARGIN = 0.1          # obliquity advantage needed to re-fill a texel
MIN_GAP_FRACTION = 0.002        # skip views where the gap covers less


@dataclass
class TexturePatch:
    pixels: np.ndarray            # (h, w, 3) uint8
    source: dict = field(default_factory=dict)

    @property
    def mean_color(self) -> tuple:
        return tuple(float(v) for v in
                     self.pixels.reshape(-1, 3).mean(axis=0))

    @property
    def dims(self) -> tuple:
        """(w, h) in texels."""
        return self.pixels.shape[1], self.pixels.shape[0]


def crop_resize(image: np.ndarray, box: tuple, dims: tuple,
                source: Optional[dict] = None) -> TexturePatch:
    """Crop (x, y, w, h) out of an image and bilinear-resample to dims=(w, h)."""
    x, y, w, h = box
    crop = image[y:y + h, x:x + w, :3]
    out = PILImage.fromarray(crop).resize(dims, PILImage.BILINEAR)
    return TexturePatch(np.asarray(out, dtype=np.uint8),
                        dict(source or {}, box=list(box)))


def default_patch_side(region_w: int, region_h: int) -> int:
    return int(np.clip(min(region_w, region_h) // 2,
                       MIN_PATCH_SIDE, MAX_PATCH_SIDE))


@dataclass
class PlacementPlan:
    bbox: tuple                   # (x, y, W, H) texel coords of B
    patch_dims: tuple             # (w, h)
    counts: tuple                 # (N_w, N_h)
    spacing: tuple                # (dx, dy), texels, >= 0
    positions: list               # [(x_i, y_j)] float origins relative to B
    kept: list                    # classification per position

    def to_json(self) -> dict:
        return {"bbox": list(self.bbox), "patch_dims": list(self.patch_dims),
                "counts": list(self.counts), "spacing": list(self.spacing),
                "positions": [list(p) for p in self.positions],
                "kept": list(self.kept)}

    def texel_rect(self, index: int) -> tuple:
        """Stamp-time integer rect (x0, y0, w, h) for a planned position."""
        bx, by = self.bbox[0], self.bbox[1]
        px, py = self.positions[index]
        w, h = self.patch_dims
        return bx + int(round(px)), by + int(round(py)), w, h


def region_bbox(region: np.ndarray) -> tuple:
    ys, xs = np.nonzero(region)
    return (int(xs.min()), int(ys.min()),
            int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def plan_placement(region: np.ndarray, patch_dims: tuple) -> PlacementPlan:
    """Subdivide the region's bounding box into uniformly spaced patch slots."""
    if not region.any():
        raise ValueError("empty region")
    w, h = int(patch_dims[0]), int(patch_dims[1])
    if w < 1 or h < 1:
        raise ValueError("patch dims must be >= 1")
    bx, by, W, H = region_bbox(region)
    if w > W or h > H:
        raise PatchLargerThanRegion(f"patch {w}x{h} exceeds region box {W}x{H}")

    n_w, n_h = W // w, H // h
    dx = (W - n_w * w) / (n_w + 1)
    dy = (H - n_h * h) / (n_h + 1)
    positions, kept = [], []
    for j in range(n_h):
        y = j * h + (j + 1) * dy
        for i in range(n_w):
            x = i * w + (i + 1) * dx
            positions.append((x, y))
            x0, y0 = bx + int(round(x)), by + int(round(y))
            cell = region[y0:y0 + h, x0:x0 + w]
            inside = int(cell.sum())
            if inside == w * h:
                kept.append(FULL)
            elif inside == 0:
                kept.append(DISCARDED)
            else:
                kept.append(PARTIAL)
    return PlacementPlan((bx, by, W, H), (w, h), (n_w, n_h), (dx, dy),
                         positions, kept)


def plan_components(region: np.ndarray, patch_dims: Optional[tuple] = None) -> list:
    """Plan placement independently per connected component of R, so patches
    never span disjoint UV charts.  Patch dims shrink to fit slim components.
    Returns [(component_mask, plan)]."""
    labels, count = ndimage.label(region, structure=np.ones((3, 3), dtype=bool))
    out = []
    for lab in range(1, count + 1):
        comp = labels == lab
        _, _, W, H = region_bbox(comp)
        if patch_dims is None:
            side = default_patch_side(W, H)
            dims = (side, side)
        else:
            dims = patch_dims
        dims = (min(dims[0], W), min(dims[1], H))   # shrink-to-fit slivers
        out.append((comp, plan_placement(comp, dims)))
    return out


def disk_structure(radius: int) -> np.ndarray:
    if radius <= 0:
        return np.ones((1, 1), dtype=bool)
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (yy * yy + xx * xx) <= r * r


def stamp_patches(atlas: np.ndarray, plan: PlacementPlan, region: np.ndarray,
                  patch: TexturePatch,
                  erosion_radius: int = DEFAULT_EROSION_RADIUS):
    """Copy the patch into every kept slot, eroded to leave blending gaps.

    Returns (atlas', gap_mask) where gap_mask = R minus the stamped texels.
    Texels outside R are never written.
    """
    w, h = plan.patch_dims
    if patch.dims != (w, h):
        raise ValueError(f"patch dims {patch.dims} != planned {plan.patch_dims}")
    ah, aw = region.shape
    out = atlas.copy()
    stamped = np.zeros_like(region)
    structure = disk_structure(erosion_radius)
    for idx, cls in enumerate(plan.kept):
        if cls == DISCARDED:
            continue
        x0, y0, _, _ = plan.texel_rect(idx)
        x1, y1 = min(x0 + w, aw), min(y0 + h, ah)
        if x1 <= x0 or y1 <= y0:
            continue
        footprint = np.zeros_like(region)
        footprint[y0:y1, x0:x1] = region[y0:y1, x0:x1]   # rect ∩ R
        if erosion_radius > 0:
            footprint = ndimage.binary_erosion(footprint, structure=structure)
        if not footprint.any():
            continue
        rows, cols = np.nonzero(footprint)
        out[rows, cols, :3] = patch.pixels[rows - y0, cols - x0]
        if out.shape[2] == 4:
            out[rows, cols, 3] = 255
        stamped |= footprint
    return out, (region & ~stamped)


InpaintFn = Callable[[InpaintRequest], np.ndarray]


def diffusion_fill(image_rgb: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Texture-space fallback fill for gap texels visible in no view."""
    return MockInpaintBackend().inpaint(
        InpaintRequest(image=image_rgb, mask=mask, prompt="", seed=0))


def integrate(mesh: TexturedMesh, atlas: np.ndarray, region: np.ndarray,
              gap_mask: np.ndarray, prompt: str, views: list,
              inpaint_fn: InpaintFn, seed: int = 0,
              save_pass: Optional[Callable] = None) -> np.ndarray:
    """Fill the inter-patch gaps view by view with an inpainting backend.

    Each view renders the current atlas, inpaints the on-screen gap
    footprint, and back-projects the result; texels are written at most
    once per pass, weighted by viewing obliquity so frontal views win over
    grazing ones.  Gaps visible in no view fall back to a texture-space
    diffusion fill.  Never touches a texel outside R.
    """
    if not gap_mask.any():
        return atlas.copy()
    work = atlas.copy()
    residual = gap_mask.copy() & region
    weights = np.zeros(region.shape, dtype=np.float64)
    normals = face_normals(mesh)

    for view_index, spec in enumerate(views):
        working_mesh = mesh.with_atlas(work)
        frame = render(working_mesh, spec, RenderMode.TEXTURED)
        screen_gap = texel_to_screen(gap_mask, frame)
        if screen_gap.sum() < MIN_GAP_FRACTION * screen_gap.size:
            continue
        try:
            filled = inpaint_fn(InpaintRequest(
                image=frame.color, mask=screen_gap, prompt=prompt,
                seed=seed + view_index))
        except BackendError as exc:
            raise InpaintBackendError(
                f"inpainting failed at view {spec.name()}: {exc}",
                payload=getattr(exc, "payload", None)) from exc

        _, _, _, forward = camera_basis(spec)
        ys, xs = np.nonzero(screen_gap)
        rows, cols = uv_to_texel(frame.uv[ys, xs], region.shape)
        tri = frame.face_id[ys, xs]
        oblique = np.abs(normals[tri] @ forward)
        # one write per texel per pass: keep the highest-obliquity pixel
        order = np.lexsort((oblique,))
        flat = rows * region.shape[1] + cols
        best = {}
        for k in order:       # ascending: later (higher) wins
            best[flat[k]] = k
        for f, k in best.items():
            r, c = divmod(f, region.shape[1])
            if not region[r, c]:
                continue
            wgt = oblique[k]
            if weights[r, c] == 0.0 or wgt > weights[r, c] + OVERWRITE_MARGIN:
                work[r, c, :3] = filled[ys[k], xs[k]]
                if work.shape[2] == 4:
                    work[r, c, 3] = 255
                weights[r, c] = max(weights[r, c], wgt)
                residual[r, c] = False
        if save_pass:
            save_pass(view_index, spec, work.copy())

    if residual.any():
        rgb = diffusion_fill(work[..., :3], residual)
        rows, cols = np.nonzero(residual)
        work[rows, cols, :3] = rgb[rows, cols]
        if work.shape[2] == 4:
            work[rows, cols, 3] = 255
    return work
