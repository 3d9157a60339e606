"""Deterministic software rasterizer with per-pixel correspondence G-buffers.

Renders a TexturedMesh from fixed orbital view presets into a ViewFrame:
an RGB color image plus face-id / barycentric / UV / depth buffers that
give exact screen<->texture correspondence per pixel.  Two shading modes:
Textured samples the atlas (nearest neighbor, unlit); Geometry ignores the
atlas and shades Lambertian gray with the light at the camera.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict
from enum import Enum

import numpy as np

from . import images
from .geometry import TexturedMesh

SENTINEL_BACKGROUND = -1

DEFAULT_RESOLUTION = 512
DEFAULT_FOV = 45.0
DEFAULT_DISTANCE = 2.8


class RenderMode(str, Enum):
    TEXTURED = "textured"
    GEOMETRY = "geometry"


@dataclass(frozen=True)
class ViewSpec:
    theta: float                      # elevation, degrees, [-90, 90]
    phi: float                        # azimuth, degrees, [0, 360)
    fov: float = DEFAULT_FOV          # vertical field of view, degrees
    distance: float = DEFAULT_DISTANCE
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if not -90.0 <= self.theta <= 90.0:
            raise ValueError(f"theta {self.theta} outside [-90, 90]")
        if not 0.0 <= self.phi < 360.0:
            raise ValueError(f"phi {self.phi} outside [0, 360)")
        if not 0.0 < self.fov < 180.0:
            raise ValueError(f"fov {self.fov} outside (0, 180)")
        if self.distance <= 0:
            raise ValueError("distance must be positive")

    def name(self) -> str:
        return f"t{self.theta:+04.0f}_p{self.phi:05.1f}"


@dataclass
class ViewFrame:
    spec: ViewSpec
    color: np.ndarray     # (R, R, 3) uint8
    face_id: np.ndarray   # (R, R) int32, SENTINEL_BACKGROUND where empty
    bary: np.ndarray      # (R, R, 3) float32, perspective-correct
    uv: np.ndarray        # (R, R, 2) float32
    depth: np.ndarray     # (R, R) float32, +inf at background

    @property
    def foreground(self) -> np.ndarray:
        return self.face_id != SENTINEL_BACKGROUND


def camera_basis(spec: ViewSpec):
    """Camera position + orthonormal (right, up, forward) for an orbit view."""
    th, ph = np.radians(spec.theta), np.radians(spec.phi)
    eye = spec.distance * np.array(
        [np.cos(th) * np.sin(ph), np.sin(th), np.cos(th) * np.cos(ph)])
    forward = -eye / np.linalg.norm(eye)
    if abs(np.cos(th)) < 1e-6:
        up_hint = np.array([np.sin(ph), 0.0, np.cos(ph)])  # poles: horizon up
    else:
        up_hint = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, up_hint)
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    return eye, right, up, forward


def project_points(points: np.ndarray, spec: ViewSpec):
    """World points -> (pixel xy, eye depth).  Pixel y grows downward."""
    eye, right, up, forward = camera_basis(spec)
    rel = points - eye
    x = rel @ right
    y = rel @ up
    d = rel @ forward                      # positive in front of camera
    f = 1.0 / np.tan(np.radians(spec.fov) / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc_x = np.where(d > 0, f * x / d, np.nan)
        ndc_y = np.where(d > 0, f * y / d, np.nan)
    px = (ndc_x * 0.5 + 0.5) * spec.resolution
    py = (0.5 - ndc_y * 0.5) * spec.resolution
    return np.stack([px, py], axis=-1), d


def sample_atlas_nearest(atlas: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Nearest-neighbor atlas lookup.  uv: (..., 2) in [0,1], v up."""
    h, w = atlas.shape[0], atlas.shape[1]
    col = np.clip((uv[..., 0] * w).astype(np.int64), 0, w - 1)
    row = np.clip(((1.0 - uv[..., 1]) * h).astype(np.int64), 0, h - 1)
    return atlas[row, col, :3]


def face_normals(mesh: TexturedMesh) -> np.ndarray:
    tri = mesh.vertices[mesh.faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return n / norm


def render(mesh: TexturedMesh, spec: ViewSpec,
           mode: RenderMode = RenderMode.TEXTURED) -> ViewFrame:
    """Depth-tested perspective rasterization, no culling, no anti-aliasing."""
    res = spec.resolution
    color = np.zeros((res, res, 3), dtype=np.uint8)
    face_id = np.full((res, res), SENTINEL_BACKGROUND, dtype=np.int32)
    bary = np.zeros((res, res, 3), dtype=np.float32)
    uv_buf = np.zeros((res, res, 2), dtype=np.float32)
    depth = np.full((res, res), np.inf, dtype=np.float32)

    if mesh.n_triangles == 0:
        return ViewFrame(spec, color, face_id, bary, uv_buf, depth)

    pix, d = project_points(mesh.vertices, spec)
    normals = face_normals(mesh) if mode == RenderMode.GEOMETRY else None
    eye, _, _, forward = camera_basis(spec)

    for t in range(mesh.n_triangles):
        vidx = mesh.faces[t]
        dz = d[vidx]
        if np.any(dz <= 1e-6):     # behind/at camera plane: reject
            continue
        p = pix[vidx]              # (3, 2) pixel coords
        x0 = max(int(np.floor(p[:, 0].min())), 0)
        x1 = min(int(np.ceil(p[:, 0].max())), res - 1)
        y0 = max(int(np.floor(p[:, 1].min())), 0)
        y1 = min(int(np.ceil(p[:, 1].max())), res - 1)
        if x1 < x0 or y1 < y0:
            continue

        xs = np.arange(x0, x1 + 1) + 0.5
        ys = np.arange(y0, y1 + 1) + 0.5
        gx, gy = np.meshgrid(xs, ys)

        def edge(a, b):
            return ((b[0] - a[0]) * (gy - a[1]) - (b[1] - a[1]) * (gx - a[0]))

        w0 = edge(p[1], p[2])
        w1 = edge(p[2], p[0])
        w2 = edge(p[0], p[1])
        area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - \
               (p[1][1] - p[0][1]) * (p[2][0] - p[0][0])
        if area == 0:
            continue
        # no back-face culling: accept either orientation
        if area > 0:
            inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        else:
            inside = (w0 <= 0) & (w1 <= 0) & (w2 <= 0)
        if not inside.any():
            continue

        b = np.stack([w0, w1, w2], axis=-1) / area    # screen-space bary
        # perspective-correct barycentric + depth via 1/z interpolation;
        # pixels outside the triangle may produce inf/nan and are discarded
        with np.errstate(invalid="ignore", over="ignore"):
            inv_d = b / dz[None, None, :]
            denom = inv_d.sum(axis=-1)
            pix_depth = np.where(denom > 0, 1.0 / denom, np.inf)
            bcorr = inv_d * pix_depth[..., None]

            closer = inside & (pix_depth < depth[y0:y1 + 1, x0:x1 + 1])
            if not closer.any():
                continue

            corner_uv = mesh.uvs[mesh.face_uvs[t]]
            pix_uv = bcorr @ corner_uv

        sub = (slice(y0, y1 + 1), slice(x0, x1 + 1))
        depth[sub][closer] = pix_depth[closer].astype(np.float32)
        face_id[sub][closer] = t
        bary[sub][closer] = bcorr[closer].astype(np.float32)
        uv_buf[sub][closer] = pix_uv[closer].astype(np.float32)

        if mode == RenderMode.TEXTURED:
            color[sub][closer] = sample_atlas_nearest(mesh.atlas,
                                                      pix_uv[closer])
        else:
            shade = abs(float(normals[t] @ forward))
            gray = np.uint8(round(255 * (0.15 + 0.85 * shade)))
            color[sub][closer] = gray

    return ViewFrame(spec, color, face_id, bary, uv_buf, depth)


def intent_views(resolution: int = DEFAULT_RESOLUTION,
                 fov: float = DEFAULT_FOV,
                 distance: float = DEFAULT_DISTANCE) -> list:
    """The 4 equatorial views used for intent prediction: 90-degree azimuth steps."""
    return [ViewSpec(0.0, phi, fov, distance, resolution)
            for phi in (0.0, 90.0, 180.0, 270.0)]


def coverage_views(resolution: int = DEFAULT_RESOLUTION,
                   fov: float = DEFAULT_FOV,
                   distance: float = DEFAULT_DISTANCE) -> list:
    """8 views for full-surface coverage: 6 evenly spaced side views + top + bottom."""
    specs = [ViewSpec(0.0, phi, fov, distance, resolution)
             for phi in (0.0, 60.0, 120.0, 180.0, 240.0, 300.0)]
    specs.append(ViewSpec(90.0, 0.0, fov, distance, resolution))
    specs.append(ViewSpec(-90.0, 0.0, fov, distance, resolution))
    return specs


def save_frame(frame: ViewFrame, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    images.save_png(os.path.join(directory, "color.png"), frame.color)
    frame.face_id.astype("<u4").tofile(os.path.join(directory, "faceid.u32"))
    frame.uv.astype("<f4").tofile(os.path.join(directory, "uv.f32"))
    frame.depth.astype("<f4").tofile(os.path.join(directory, "depth.f32"))
    with open(os.path.join(directory, "spec.json"), "w") as fh:
        json.dump(asdict(frame.spec), fh, indent=2)


def load_frame(directory) -> ViewFrame:
    with open(os.path.join(directory, "spec.json")) as fh:
        spec = ViewSpec(**json.load(fh))
    res = spec.resolution
    color = images.load_png(os.path.join(directory, "color.png"), "RGB")
    face_id = np.fromfile(os.path.join(directory, "faceid.u32"),
                          dtype="<u4").astype(np.int64)
    face_id = np.where(face_id == 0xFFFFFFFF, SENTINEL_BACKGROUND,
                       face_id).astype(np.int32).reshape(res, res)
    uv = np.fromfile(os.path.join(directory, "uv.f32"),
                     dtype="<f4").reshape(res, res, 2)
    depth = np.fromfile(os.path.join(directory, "depth.f32"),
                        dtype="<f4").reshape(res, res)
    bary = np.zeros((res, res, 3), dtype=np.float32)   # not persisted
    return ViewFrame(spec, color, face_id, bary, uv, depth)
