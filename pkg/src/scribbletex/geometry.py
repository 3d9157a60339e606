"""UV-textured triangle mesh loading, normalization and UV-island analysis.

Meshes come in as Wavefront OBJ (v/vt/f records) plus a PNG atlas.  After
loading, vertices are centered at the origin and uniformly scaled so the
bounding-sphere radius is exactly 1; UVs are wrapped into [0,1] by
fractional part.  The mesh is immutable after load: edits produce new
atlas arrays, never mutate the mesh in place.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import images
from .errors import MissingUVs, MultiAtlasUnsupported, NonTriangleFace

UV_EDGE_TOL = 1e-6


@dataclass(frozen=True)
class TexturedMesh:
    vertices: np.ndarray      # (N, 3) float64, bounding-sphere radius 1
    faces: np.ndarray         # (T, 3) int32 vertex indices
    face_uvs: np.ndarray      # (T, 3) int32 uv indices
    uvs: np.ndarray           # (M, 2) float64 in [0, 1]
    atlas: np.ndarray         # (H, W, 4) uint8 RGBA
    islands: tuple = field(default=())   # tuple of int arrays (triangle ids)

    @property
    def n_triangles(self) -> int:
        return len(self.faces)

    @property
    def atlas_dims(self):
        """(height, width) of the texture atlas."""
        return self.atlas.shape[0], self.atlas.shape[1]

    def with_atlas(self, atlas: np.ndarray) -> "TexturedMesh":
        return TexturedMesh(self.vertices, self.faces, self.face_uvs,
                            self.uvs, atlas, self.islands)

    def corner_uvs(self, tri: int) -> np.ndarray:
        return self.uvs[self.face_uvs[tri]]


def _wrap_uv(uvs: np.ndarray) -> np.ndarray:
    out = uvs.copy()
    outside = (out < 0.0) | (out > 1.0)
    out[outside] = out[outside] - np.floor(out[outside])
    return out


def _normalize(vertices: np.ndarray) -> np.ndarray:
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    centered = vertices - (lo + hi) / 2.0
    radius = np.linalg.norm(centered, axis=1).max()
    if radius > 0:
        centered /= radius
    return centered


def _parse_face_token(token: str):
    parts = token.split("/")
    vi = int(parts[0])
    ti = int(parts[1]) if len(parts) > 1 and parts[1] != "" else None
    return vi, ti


def load_mesh(path, atlas_path, *, normalize: bool = True) -> TexturedMesh:
    """Load an OBJ + PNG pair into a validated, normalized TexturedMesh.

    Polygons with more than 3 vertices are fan-triangulated from the first
    vertex.  OBJs naming more than one material are rejected.
    """
    verts, uvs = [], []
    tri_v, tri_t = [], []
    materials = set()
    with open(path, "r") as fh:
        for line in fh:
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            tag = tokens[0]
            if tag == "v":
                verts.append([float(x) for x in tokens[1:4]])
            elif tag == "vt":
                uvs.append([float(tokens[1]), float(tokens[2])])
            elif tag == "usemtl":
                materials.add(tokens[1] if len(tokens) > 1 else "")
            elif tag == "f":
                corners = [_parse_face_token(t) for t in tokens[1:]]
                if len(corners) < 3:
                    raise NonTriangleFace(f"face with {len(corners)} vertices in {path}")
                for k in range(1, len(corners) - 1):   # fan triangulation
                    fan = [corners[0], corners[k], corners[k + 1]]
                    if any(c[1] is None for c in fan):
                        raise MissingUVs(f"face without vt indices in {path}")
                    tri_v.append([c[0] for c in fan])
                    tri_t.append([c[1] for c in fan])

    if not uvs or not tri_t:
        raise MissingUVs(f"no texture coordinates in {path}")
    if len(materials) > 1:
        raise MultiAtlasUnsupported(
            f"{path} references {len(materials)} materials; single-atlas meshes only")

    vertices = np.asarray(verts, dtype=np.float64)
    uv_arr = _wrap_uv(np.asarray(uvs, dtype=np.float64))

    def resolve(idx: int, count: int) -> int:
        return idx - 1 if idx > 0 else count + idx   # OBJ allows negative indices

    faces = np.array([[resolve(i, len(vertices)) for i in tri] for tri in tri_v],
                     dtype=np.int32)
    face_uvs = np.array([[resolve(i, len(uv_arr)) for i in tri] for tri in tri_t],
                        dtype=np.int32)
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        raise NonTriangleFace(f"vertex index out of range in {path}")
    if face_uvs.size and (face_uvs.min() < 0 or face_uvs.max() >= len(uv_arr)):
        raise MissingUVs(f"uv index out of range in {path}")

    if normalize:
        vertices = _normalize(vertices)

    atlas = images.load_png(atlas_path, "RGBA")
    mesh = TexturedMesh(vertices, faces, face_uvs, uv_arr, atlas)
    return TexturedMesh(vertices, faces, face_uvs, uv_arr, atlas,
                        tuple(compute_islands(mesh)))


def save_mesh(mesh: TexturedMesh, path, atlas_path) -> None:
    """Write the mesh back as an OBJ + PNG pair (load round-trips)."""
    atlas_name = os.path.basename(str(atlas_path))
    with open(path, "w") as fh:
        fh.write(f"mtllib {atlas_name}\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for uv in mesh.uvs:
            fh.write(f"vt {uv[0]:.9g} {uv[1]:.9g}\n")
        for f, t in zip(mesh.faces, mesh.face_uvs):
            fh.write("f " + " ".join(f"{vi + 1}/{ti + 1}" for vi, ti in zip(f, t)) + "\n")
    images.save_png(atlas_path, mesh.atlas)


def compute_islands(mesh: TexturedMesh) -> list:
    """Partition triangles into UV islands (charts connected by shared UV edges).

    Two triangles are connected when they share an edge whose endpoint UVs
    agree within UV_EDGE_TOL.  Returns a list of sorted int arrays covering
    all triangles; result is independent of triangle order.
    """
    n = mesh.n_triangles
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    def key(uv):
        return (round(uv[0] / UV_EDGE_TOL), round(uv[1] / UV_EDGE_TOL))

    edges = {}
    for t in range(n):
        corners = mesh.uvs[mesh.face_uvs[t]]
        ks = [key(c) for c in corners]
        for a, b in ((0, 1), (1, 2), (2, 0)):
            ek = (min(ks[a], ks[b]), max(ks[a], ks[b]))
            if ek in edges:
                union(edges[ek], t)
            else:
                edges[ek] = t

    groups = {}
    for t in range(n):
        groups.setdefault(find(t), []).append(t)
    return [np.array(sorted(g), dtype=np.int32)
            for _, g in sorted(groups.items())]
