import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coherent import shapes
from coherent.errors import DuplicateIdError, ImageFormatError, MaskError, SceneFormatError
from coherent.imageio import read_pfm, read_pgm16, write_pfm, write_pgm16
from coherent.mesh import save_mesh
from coherent.scene import (BodyInstance, Camera, DepthMap, InstanceMap, Scene,
                            load_instance_mask, load_scene, save_instance_map, save_scene)

CAM = {"f": 100.0, "cx": 16.0, "cy": 12.0, "width": 32, "height": 24}


def write_scene(tmp_path, bodies, name="scene.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"camera": CAM, "bodies": bodies}))
    return path


@pytest.fixture
def two_body_scene(tmp_path, cube_obj):
    save_mesh(shapes.icosphere(1, 0.5), tmp_path / "ico.obj")
    return write_scene(tmp_path, [
        {"id": 1, "mesh": "cube.obj", "translation": [0.1, -0.2, 4.0], "scale": 0.5},
        {"id": 2, "mesh": "ico.obj", "translation": [1.0, 0.25, 6.5]}])


def test_empty_scene_is_valid(tmp_path):
    scene = load_scene(write_scene(tmp_path, []))
    assert scene.bodies == ()
    assert scene.camera.shape == (24, 32)


def test_duplicate_id_rejected(tmp_path, cube_obj):
    path = write_scene(tmp_path, [{"id": 3, "mesh": "cube.obj"}, {"id": 3, "mesh": "cube.obj"}])
    with pytest.raises(DuplicateIdError, match="3"):
        load_scene(path)


@pytest.mark.parametrize("body, msg", [
    ({"id": 0, "mesh": "cube.obj"}, ">= 1"),
    ({"id": 1, "mesh": "missing.obj"}, "not found"),
    ({"id": 1, "mesh": "cube.obj", "scale": -1}, "scale"),
    ({"id": 1, "mesh": "cube.obj", "translation": [0, 1]}, "3-list"),
    ({"mesh": "cube.obj"}, "'id'"),
])
def test_schema_violations(tmp_path, cube_obj, body, msg):
    with pytest.raises(SceneFormatError, match=msg):
        load_scene(write_scene(tmp_path, [body]))


def test_bad_camera(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"camera": dict(CAM, width=0), "bodies": []}))
    with pytest.raises(SceneFormatError):
        load_scene(path)
    path.write_text("{not json")
    with pytest.raises(SceneFormatError, match="invalid JSON"):
        load_scene(path)


def test_round_trip_field_for_field(tmp_path, two_body_scene):
    scene = load_scene(two_body_scene)
    out = tmp_path / "sub" / "again.json"
    out.parent.mkdir()
    save_scene(scene, out, source_dir=two_body_scene.parent)
    again = load_scene(out)
    assert again == scene
    for a, b in zip(scene.bodies, again.bodies):
        assert a.translation == b.translation and a.scale == b.scale
        np.testing.assert_array_equal(a.mesh.vertices, b.mesh.vertices)


def test_save_writes_meshes_for_in_memory_bodies(tmp_path):
    scene = Scene(Camera(**CAM), (BodyInstance(4, shapes.icosphere(1), (0.1, 0.2, 3.0)),))
    save_scene(scene, tmp_path / "mem.json")
    assert (tmp_path / "mem_body_4.obj").is_file()
    assert load_scene(tmp_path / "mem.json") == scene


def test_shared_mesh_loaded_once(tmp_path, cube_obj):
    scene = load_scene(write_scene(tmp_path, [{"id": 1, "mesh": "cube.obj"},
                                              {"id": 2, "mesh": "cube.obj"}]))
    assert scene.bodies[0].mesh is scene.bodies[1].mesh


def test_mask_loading(tmp_path, two_body_scene):
    scene = load_scene(two_body_scene)
    data = np.zeros((24, 32), dtype=np.int64)
    mask_path = tmp_path / "m.pgm"
    write_pgm16(mask_path, data)
    empty = load_instance_mask(mask_path, scene)
    assert empty.ids() == set() and empty.counts() == {}

    data[2:5, 3:9] = 1
    data[10:12, 20:30] = 2
    save_instance_map(InstanceMap(data), mask_path)
    mask = load_instance_mask(mask_path, scene)
    assert mask.counts() == {1: 18, 2: 20}

    data[0, 0] = 7
    write_pgm16(mask_path, data)
    with pytest.raises(MaskError, match="unknown body id"):
        load_instance_mask(mask_path, scene)

    write_pgm16(mask_path, np.zeros((10, 10), dtype=np.int64))
    with pytest.raises(MaskError, match="10x10"):
        load_instance_mask(mask_path, scene)


def test_pgm_is_big_endian_16_bit(tmp_path):
    path = tmp_path / "x.pgm"
    write_pgm16(path, np.array([[1, 258], [65535, 0]]))
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n2 2\n65535\n")
    assert raw[-8:] == b"\x00\x01\x01\x02\xff\xff\x00\x00"
    np.testing.assert_array_equal(read_pgm16(path), [[1, 258], [65535, 0]])


def test_pgm_errors(tmp_path):
    with pytest.raises(ImageFormatError):
        write_pgm16(tmp_path / "a.pgm", np.array([[70000]]))
    (tmp_path / "b.pgm").write_bytes(b"P5\n4 4\n65535\n\x00\x01")
    with pytest.raises(ImageFormatError, match="truncated"):
        read_pgm16(tmp_path / "b.pgm")
    (tmp_path / "c.pgm").write_bytes(b"P2\n1 1\n65535\n0")
    with pytest.raises(ImageFormatError):
        read_pgm16(tmp_path / "c.pgm")


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n1 1\n65535\n\x00\x05")
    assert read_pgm16(path).tolist() == [[5]]


def test_pfm_round_trip_and_layout(tmp_path):
    data = np.array([[1.5, np.inf], [2.0, 3.25]], dtype=np.float32)
    path = tmp_path / "d.pfm"
    write_pfm(path, data)
    raw = path.read_bytes()
    assert raw.startswith(b"Pf\n2 2\n-1.0\n")
    # bottom row first, little-endian
    assert np.frombuffer(raw[-16:], "<f4").tolist() == [2.0, 3.25, 1.5, np.inf]
    np.testing.assert_array_equal(read_pfm(path), data)


def test_instance_and_depth_maps_validate():
    with pytest.raises(MaskError):
        InstanceMap(np.array([[-1]]))
    d = DepthMap(np.array([[np.inf, 2.0], [np.nan, 1.0]]))
    assert d.coverage.tolist() == [[False, True], [False, True]]
    assert np.isposinf(d.data[1, 0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(1, 20),
                          st.floats(0.1, 4)), min_size=0, max_size=4))
def test_round_trip_property(tmp_path_factory, bodies):
    d = tmp_path_factory.mktemp("rt")
    mesh = shapes.icosphere(1, 0.3)
    scene = Scene(Camera(**CAM), tuple(BodyInstance(k + 1, mesh, (x, y, z), s)
                                       for k, (x, y, z, s) in enumerate(bodies)))
    save_scene(scene, d / "s.json")
    assert load_scene(d / "s.json") == scene
