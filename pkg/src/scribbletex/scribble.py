"""Scribble capture: turn brush strokes on a rendered view into edit regions.

A stroke is a polyline swept with a disk brush.  Strokes get stamped into
the view, clipped to the on-object (foreground) pixels, and split into
regions by 8-connected components; each region carries the area-dominant
stroke color.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import EmptyMask, EmptyScribble
from .render import ViewFrame

EIGHT_CONN = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Stroke:
    view_id: str
    points: tuple             # ((x, y), ...) pixel coordinates
    radius: float             # brush radius, pixels, >= 1
    color: tuple              # (r, g, b)

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValueError("stroke needs at least one point")
        if self.radius < 1:
            raise ValueError("brush radius must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "Stroke":
        return cls(view_id=str(d["view_id"]),
                   points=tuple((float(x), float(y)) for x, y in d["points"]),
                   radius=float(d["radius"]),
                   color=tuple(int(c) for c in d["color"]))

    def to_dict(self) -> dict:
        return {"view_id": self.view_id,
                "color": [int(c) for c in self.color],
                "radius": self.radius,
                "points": [[float(x), float(y)] for x, y in self.points]}


@dataclass
class ScribbleRegion:
    color: tuple              # dominant (r, g, b)
    screen_mask: np.ndarray   # bool (H, W)
    view_id: str
    hint: Optional[str] = None


def stamp_stroke(stroke: Stroke, height: int, width: int) -> np.ndarray:
    """Rasterize one stroke as a union of capsules (disk swept per segment)."""
    mask = np.zeros((height, width), dtype=bool)
    pts = np.asarray(stroke.points, dtype=np.float64)
    r = float(stroke.radius)
    segments = zip(pts[:-1], pts[1:]) if len(pts) > 1 else [(pts[0], pts[0])]
    for a, b in segments:
        x0 = max(int(np.floor(min(a[0], b[0]) - r)), 0)
        x1 = min(int(np.ceil(max(a[0], b[0]) + r)), width - 1)
        y0 = max(int(np.floor(min(a[1], b[1]) - r)), 0)
        y1 = min(int(np.ceil(max(a[1], b[1]) + r)), height - 1)
        if x1 < x0 or y1 < y0:
            continue
        gx, gy = np.meshgrid(np.arange(x0, x1 + 1, dtype=np.float64),
                             np.arange(y0, y1 + 1, dtype=np.float64))
        ab = b - a
        denom = ab @ ab
        if denom == 0:
            dist2 = (gx - a[0]) ** 2 + (gy - a[1]) ** 2
        else:
            t = np.clip(((gx - a[0]) * ab[0] + (gy - a[1]) * ab[1]) / denom, 0, 1)
            dist2 = (gx - (a[0] + t * ab[0])) ** 2 + (gy - (a[1] + t * ab[1])) ** 2
        mask[y0:y1 + 1, x0:x1 + 1] |= dist2 <= r * r
    return mask


def rasterize_strokes(strokes: list, view: ViewFrame,
                      hint: Optional[str] = None) -> list:
    """Stamp strokes onto a view and split into per-component ScribbleRegions.

    Pixels landing on background are dropped; if nothing lands on the
    object, raises EmptyScribble.  Each region's color is the stroke color
    covering the largest area inside that component.
    """
    h, w = view.face_id.shape
    view_id = getattr(view.spec, "name", lambda: "")()
    for s in strokes:
        if s.view_id != view_id:
            raise ValueError(f"stroke view {s.view_id!r} != frame view {view_id!r}")

    stamped = [stamp_stroke(s, h, w) & view.foreground for s in strokes]
    union = np.zeros((h, w), dtype=bool)
    for m in stamped:
        union |= m
    if not union.any():
        raise EmptyScribble("all stamped pixels fell on background")

    labels, count = ndimage.label(union, structure=EIGHT_CONN)
    regions = []
    for lab in range(1, count + 1):
        comp = labels == lab
        counts = {}
        for s, m in zip(strokes, stamped):
            counts[s.color] = counts.get(s.color, 0) + int((m & comp).sum())
        color = max(sorted(counts), key=lambda c: counts[c])
        regions.append(ScribbleRegion(color=color, screen_mask=comp,
                                      view_id=view_id, hint=hint))
    return regions


def dominant_color(mask: np.ndarray, overlay: np.ndarray) -> tuple:
    """Modal quantized color (32 levels/channel) of masked overlay pixels,
    reported as the mean of the winning bucket's members."""
    if mask.shape != overlay.shape[:2]:
        raise ValueError("mask and overlay dimensions differ")
    sel = overlay[mask.astype(bool)][:, :3].astype(np.int64)
    if len(sel) == 0:
        raise EmptyMask("no masked pixels")
    buckets = sel // 8
    keys = buckets[:, 0] * 32 * 32 + buckets[:, 1] * 32 + buckets[:, 2]
    uniq, counts = np.unique(keys, return_counts=True)
    winner = uniq[np.argmax(counts)]
    members = sel[keys == winner]
    return tuple(int(round(v)) for v in members.mean(axis=0))


def region_from_overlay(overlay_rgba: np.ndarray, view: ViewFrame,
                        hint: Optional[str] = None) -> ScribbleRegion:
    """Import a scribble painted in an external tool: non-transparent pixels
    are the scribble."""
    mask = (overlay_rgba[..., 3] > 0) & view.foreground
    if not mask.any():
        raise EmptyScribble("overlay has no on-object opaque pixels")
    color = dominant_color(mask, overlay_rgba[..., :3])
    view_id = view.spec.name()
    return ScribbleRegion(color=color, screen_mask=mask, view_id=view_id, hint=hint)
