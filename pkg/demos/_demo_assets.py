"""Procedural demo assets: a UV-unwrapped cube and simple atlases.

The demos are self-contained; running any of them first materializes a
small OBJ + PNG pair under demos/output/assets/.
"""

import os

import numpy as np

from scribbletex import images

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "output")


def output_dir(name: str) -> str:
    d = os.path.join(OUT, name)
    os.makedirs(d, exist_ok=True)
    return d


def write_cube_obj(path):
    """Unit cube, 6 separate inset UV charts laid out on a 3x2 grid."""
    corners = [(-1, -1, -1), (1, -1, -1), (1, 1, -1), (-1, 1, -1),
               (-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1)]
    quads = [(4, 5, 6, 7), (1, 0, 3, 2), (0, 4, 7, 3),
             (5, 1, 2, 6), (7, 6, 2, 3), (0, 1, 5, 4)]
    lines = [f"v {x} {y} {z}" for x, y, z in corners]
    uvs, faces = [], []
    inset = 0.04
    for qi, quad in enumerate(quads):
        cx, cy = qi % 3, qi // 3
        u0 = cx / 3 + inset
        u1 = (cx + 1) / 3 - inset
        v0 = cy / 2 + inset
        v1 = (cy + 1) / 2 - inset
        base = len(uvs) + 1
        uvs += [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
        a, b, c, d = (v + 1 for v in quad)
        faces.append(f"f {a}/{base} {b}/{base + 1} {c}/{base + 2}")
        faces.append(f"f {a}/{base} {c}/{base + 2} {d}/{base + 3}")
    lines += [f"vt {u} {v}" for u, v in uvs]
    lines += faces
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_checker_atlas(path, size=256, cells=16):
    yy, xx = np.mgrid[0:size, 0:size]
    checker = ((yy // (size // cells) + xx // (size // cells)) % 2).astype(bool)
    img = np.where(checker[..., None],
                   np.array([150, 120, 90], dtype=np.uint8),
                   np.array([200, 180, 150], dtype=np.uint8))
    images.save_png(path, img)


def demo_assets():
    d = output_dir("assets")
    obj = os.path.join(d, "cube.obj")
    png = os.path.join(d, "atlas.png")
    if not (os.path.exists(obj) and os.path.exists(png)):
        write_cube_obj(obj)
        write_checker_atlas(png)
    return obj, png
