import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from assets import (write_checker_atlas, write_cube_obj, write_solid_atlas,
                    write_sphere_obj)
from scribbletex import load_mesh


@pytest.fixture(scope="session")
def asset_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("assets")
    write_cube_obj(d / "cube.obj")
    write_cube_obj(d / "cube_quads.obj", triangulate=False)
    write_sphere_obj(d / "sphere.obj")
    write_checker_atlas(d / "checker.png", size=256)
    write_solid_atlas(d / "solid.png", size=256)
    return d


@pytest.fixture(scope="session")
def cube(asset_dir):
    return load_mesh(asset_dir / "cube.obj", asset_dir / "checker.png")


@pytest.fixture(scope="session")
def cube_solid(asset_dir):
    return load_mesh(asset_dir / "cube.obj", asset_dir / "solid.png")


@pytest.fixture(scope="session")
def sphere(asset_dir):
    return load_mesh(asset_dir / "sphere.obj", asset_dir / "checker.png")
