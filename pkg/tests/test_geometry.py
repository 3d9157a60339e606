import numpy as np
import pytest

from scribbletex import (CorruptImage, MissingUVs, MultiAtlasUnsupported,
                         TexturedMesh, compute_islands, load_mesh, save_mesh)
from assets import write_checker_atlas, write_cube_obj


def test_cube_loads_with_12_triangles(cube):
    assert cube.n_triangles == 12
    assert cube.uvs.shape == (24, 2)


def test_normalization_bounding_sphere_radius_one(cube, sphere):
    for mesh in (cube, sphere):
        r = np.linalg.norm(mesh.vertices, axis=1).max()
        assert r == pytest.approx(1.0, abs=1e-6)


def test_uv_wrap_fractional(tmp_path, asset_dir):
    obj = tmp_path / "wrap.obj"
    obj.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
        "vt 1.25 -0.25\nvt 0.5 0.5\nvt 0.0 1.0\n"
        "f 1/1 2/2 3/3\n")
    mesh = load_mesh(obj, asset_dir / "solid.png")
    assert mesh.uvs[0] == pytest.approx([0.25, 0.75])
    assert mesh.uvs[2] == pytest.approx([0.0, 1.0])   # in-range values untouched


def _independent_fan_triangle_count(path):
    # independent oracle: count OBJ polygons and fan-split them
    count = 0
    for line in open(path):
        if line.startswith("f "):
            count += len(line.split()) - 3
    return count


def test_quad_cube_fan_triangulation(asset_dir):
    mesh = load_mesh(asset_dir / "cube_quads.obj", asset_dir / "checker.png")
    assert mesh.n_triangles == _independent_fan_triangle_count(
        asset_dir / "cube_quads.obj") == 12


def test_missing_uvs_rejected(tmp_path, asset_dir):
    obj = tmp_path / "nouv.obj"
    obj.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    with pytest.raises(MissingUVs):
        load_mesh(obj, asset_dir / "solid.png")


def test_multi_material_rejected(tmp_path, asset_dir):
    obj = tmp_path / "multi.obj"
    obj.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
        "vt 0 0\nvt 1 0\nvt 0 1\nvt 1 1\n"
        "usemtl a\nf 1/1 2/2 3/3\n"
        "usemtl b\nf 2/2 4/4 3/3\n")
    with pytest.raises(MultiAtlasUnsupported):
        load_mesh(obj, asset_dir / "solid.png")


def test_corrupt_atlas_rejected(tmp_path, asset_dir):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not a png at all")
    with pytest.raises(CorruptImage):
        load_mesh(asset_dir / "cube.obj", bad)


def test_roundtrip_preserves_everything(cube, tmp_path):
    obj, png = tmp_path / "out.obj", tmp_path / "out.png"
    save_mesh(cube, obj, png)
    back = load_mesh(obj, png, normalize=False)
    assert back.n_triangles == cube.n_triangles
    np.testing.assert_allclose(back.uvs, cube.uvs, atol=1e-6)
    np.testing.assert_array_equal(back.atlas, cube.atlas)


# --- islands -------------------------------------------------------------

def test_single_triangle_one_island(asset_dir, tmp_path):
    obj = tmp_path / "tri.obj"
    obj.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\n"
                   "vt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n")
    mesh = load_mesh(obj, asset_dir / "solid.png")
    assert len(mesh.islands) == 1 and len(mesh.islands[0]) == 1


def test_shared_uv_edge_joins_island(asset_dir, tmp_path):
    obj = tmp_path / "pair.obj"
    obj.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
        "vt 0 0\nvt 1 0\nvt 0 1\nvt 1 1\n"
        "f 1/1 2/2 3/3\nf 2/2 4/4 3/3\n")
    mesh = load_mesh(obj, asset_dir / "solid.png")
    assert len(mesh.islands) == 1


def test_cube_has_six_two_triangle_islands(cube):
    assert len(cube.islands) == 6
    assert all(len(isl) == 2 for isl in cube.islands)
    # oracle: brute-force pairwise UV-edge adjacency
    def adjacent(a, b):
        ka = {tuple(np.round(uv, 6)) for uv in cube.uvs[cube.face_uvs[a]]}
        kb = {tuple(np.round(uv, 6)) for uv in cube.uvs[cube.face_uvs[b]]}
        return len(ka & kb) >= 2
    for isl in cube.islands:
        a, b = isl
        assert adjacent(a, b)
    for i, isl_a in enumerate(cube.islands):
        for isl_b in cube.islands[i + 1:]:
            for a in isl_a:
                for b in isl_b:
                    assert not adjacent(a, b)


def test_islands_order_independent(cube):
    rng = np.random.default_rng(3)
    perm = rng.permutation(cube.n_triangles)
    shuffled = TexturedMesh(cube.vertices, cube.faces[perm],
                            cube.face_uvs[perm], cube.uvs, cube.atlas)
    orig = {frozenset(map(int, isl)) for isl in compute_islands(cube)}
    new = {frozenset(int(perm[t]) for t in isl)
           for isl in compute_islands(shuffled)}
    assert orig == new
