import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artikit.mesh import (
    EmptyGeometryError,
    NormalizationTransform,
    TriMesh,
    box_mesh,
    icosphere,
    merge_meshes,
    normalize_asset,
    read_obj,
    write_obj,
)


def test_box_is_closed_and_outward():
    m = box_mesh([0, 0, 0], [1, 2, 3])
    assert math.isclose(m.volume(), 6.0)
    assert math.isclose(m.face_areas().sum(), 2 * (2 + 3 + 6))
    # every edge is shared by exactly two faces
    edges = np.sort(np.concatenate([m.faces[:, [0, 1]], m.faces[:, [1, 2]], m.faces[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert np.all(counts == 2)


def test_icosphere_approaches_ball_volume():
    m = icosphere((0.5, 0.5, 0.5), 0.4, subdivisions=4)
    assert np.allclose(np.linalg.norm(m.vertices - 0.5, axis=1), 0.4)
    assert abs(m.volume() / (4 / 3 * math.pi * 0.4 ** 3) - 1) < 0.01


def test_face_index_check():
    with pytest.raises(ValueError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 3]])


def test_mesh_arrays_are_read_only():
    m = box_mesh([0, 0, 0], [1, 1, 1])
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5


def test_cleaned_drops_degenerate_faces():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0]], [[0, 1, 2], [0, 1, 3]])
    assert len(m.cleaned().faces) == 1


def test_obj_round_trip_and_fan(tmp_path):
    m = box_mesh([0.125, 0, 0], [1, 0.5, 0.25])
    write_obj(tmp_path / "box.obj", m)
    assert read_obj(tmp_path / "box.obj").array_equal(m)
    (tmp_path / "quad.obj").write_text("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n")
    quad = read_obj(tmp_path / "quad.obj")
    assert quad.faces.tolist() == [[0, 1, 2], [0, 2, 3]]
    (tmp_path / "neg.obj").write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    assert read_obj(tmp_path / "neg.obj").faces.tolist() == [[0, 1, 2]]


def test_merge_offsets_faces():
    a, b = box_mesh([0, 0, 0], [1, 1, 1]), box_mesh([2, 0, 0], [3, 1, 1])
    m = merge_meshes([a, b])
    assert len(m.vertices) == 16 and m.faces.max() == 15
    assert math.isclose(m.volume(), 2.0)


def test_normalize_cube():
    (m,), tf = normalize_asset([box_mesh([-1, -1, -1], [1, 1, 1])])
    assert tf.scale == 0.5
    assert tf.translation == (0.5, 0.5, 0.5)
    lo, hi = m.bounds()
    assert np.array_equal(lo, [0, 0, 0]) and np.array_equal(hi, [1, 1, 1])


def test_normalize_already_normalized_is_identity():
    box = box_mesh([0, 0, 0], [1, 0.5, 0.25])
    (m,), tf = normalize_asset([box])
    assert tf.scale == 1.0 and tf.translation == (0.0, 0.0, 0.0)
    assert m.array_equal(box)


def test_normalize_empty():
    with pytest.raises(EmptyGeometryError):
        normalize_asset([TriMesh(np.zeros((0, 3)), np.zeros((0, 3)))])
    with pytest.raises(EmptyGeometryError):
        normalize_asset([TriMesh([[1, 1, 1]] * 3, [[0, 1, 2]])])


@given(st.integers(0, 2 ** 32 - 1))
def test_normalize_self_consistent(seed):
    rng = np.random.default_rng(seed)
    meshes = [TriMesh(rng.normal(size=(6, 3)) * rng.uniform(0.1, 10) + rng.normal(size=3) * 5,
                      [[0, 1, 2], [3, 4, 5]]) for _ in range(int(rng.integers(1, 4)))]
    out, tf = normalize_asset(meshes)
    allv = np.concatenate([m.vertices for m in out])
    assert np.all(allv >= 0) and np.all(allv <= 1 + 1e-12)
    assert abs(np.max(allv.max(axis=0) - allv.min(axis=0)) - 1) <= 1e-9
    assert np.array_equal(allv.min(axis=0), [0, 0, 0])
    for src, dst in zip(meshes, out):
        np.testing.assert_allclose(tf.apply(src.vertices), dst.vertices, atol=1e-9, rtol=0)
    assert NormalizationTransform.from_dict(tf.to_dict()) == tf
