"""Seeded generators for trees, joints and box-part assets used by tests and scripts."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .asset import ArticulatedAsset, save_asset, scale_tree
from .kinematic_graph import Joint, JointAxis, JointLimits, JointType, KinematicTree, Link
from .mesh import box_mesh, write_obj


def random_unit(rng) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n > 1e-3:
            return v / n


def random_joint(rng, parent: int, child: int, jtype: JointType | None = None) -> Joint:
    if jtype is None:
        jtype = JointType(int(rng.integers(0, 3)))
    if jtype is JointType.FIXED:
        return Joint(parent, child, jtype, name=f"j{child}")
    pivot = tuple(rng.uniform(0.0, 1.0, size=3))
    direction = tuple(random_unit(rng))
    if jtype is JointType.REVOLUTE:
        lo, hi = -rng.uniform(0.0, math.pi / 2), rng.uniform(0.1, math.pi)
    else:
        lo, hi = -rng.uniform(0.0, 0.2), rng.uniform(0.05, 0.4)
    return Joint(parent, child, jtype, JointAxis(pivot, direction), JointLimits(lo, hi), name=f"j{child}")


def random_tree(rng, K: int, shuffle: bool = True) -> KinematicTree:
    """Random rooted tree on K links with mixed joint types.

    Parents are drawn among earlier nodes; with ``shuffle`` the link ids are permuted
    so parents do not always carry smaller ids than their children.
    """
    perm = rng.permutation(K) if shuffle else np.arange(K)
    joints = []
    for i in range(1, K):
        p = int(rng.integers(0, i))
        joints.append(random_joint(rng, int(perm[p]), int(perm[i])))
    links = [Link(i, f"link_{i}") for i in range(K)]
    return KinematicTree(links, joints, int(perm[0]))


SLOTS = (3, 3, 2)


def slot_boxes(rng, K: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """K disjoint boxes inside [0,1]^3, one per slot of a 3x3x2 lattice."""
    n_slots = int(np.prod(SLOTS))
    if K > n_slots:
        raise ValueError(f"at most {n_slots} parts supported")
    size = 1.0 / np.asarray(SLOTS, dtype=float)
    boxes = []
    for s in rng.permutation(n_slots)[:K]:
        cell = np.array(np.unravel_index(int(s), SLOTS), dtype=float)
        ext = size * rng.uniform(0.5, 0.9, size=3)
        lo = cell * size + rng.uniform(0.0, 1.0, size=3) * (size - ext)
        boxes.append((lo, lo + ext))
    return boxes


def random_asset(rng, K: int | None = None) -> ArticulatedAsset:
    if K is None:
        K = int(rng.integers(1, 13))
    tree = random_tree(rng, K)
    meshes = [box_mesh(lo, hi) for lo, hi in slot_boxes(rng, K)]
    return ArticulatedAsset(meshes, tree)


def hinge_asset(upper: float = 1.5708) -> ArticulatedAsset:
    """Box with a lid hinged on the z-parallel line through (0, 0.5, 0)."""
    links = [Link(0, "base"), Link(1, "lid")]
    joint = Joint(0, 1, JointType.REVOLUTE,
                  JointAxis((0.0, 0.5, 0.0), (0.0, 0.0, 1.0)), JointLimits(0.0, upper), name="hinge")
    tree = KinematicTree(links, [joint], 0)
    meshes = [box_mesh([0, 0, 0], [1, 0.5, 1]), box_mesh([0, 0.5, 0], [1, 0.55, 1])]
    return ArticulatedAsset(meshes, tree)


def drawer_asset(travel: float = 0.4) -> ArticulatedAsset:
    links = [Link(0, "cabinet"), Link(1, "drawer")]
    joint = Joint(0, 1, JointType.PRISMATIC,
                  JointAxis((0.5, 0.3, 1.0), (0.0, 0.0, 1.0)), JointLimits(0.0, travel), name="slide")
    tree = KinematicTree(links, [joint], 0)
    meshes = [box_mesh([0, 0, 0], [1, 0.6, 0.9]), box_mesh([0.1, 0.1, 0.5], [0.9, 0.5, 1.0])]
    return ArticulatedAsset(meshes, tree)


HINGE_URDF = """<?xml version="1.0"?>
<robot name="hinge">
  <link name="base">
    <visual><geometry><mesh filename="base.obj"/></geometry></visual>
  </link>
  <link name="lid">
    <visual><geometry><mesh filename="lid.obj"/></geometry></visual>
  </link>
  <joint name="hinge" type="revolute">
    <parent link="base"/>
    <child link="lid"/>
    <origin xyz="0 0.5 0" rpy="0 0 0"/>
    <axis xyz="0 0 1"/>
    <limit lower="0" upper="1.5708"/>
  </joint>
</robot>
"""


CYCLIC_URDF = """<?xml version="1.0"?>
<robot name="cyclic">
  <link name="a"><visual><geometry><mesh filename="a.obj"/></geometry></visual></link>
  <link name="b"><visual><geometry><mesh filename="b.obj"/></geometry></visual></link>
  <joint name="ab" type="fixed"><parent link="a"/><child link="b"/></joint>
  <joint name="ba" type="fixed"><parent link="b"/><child link="a"/></joint>
</robot>
"""


def write_fixture_corpus(root, n: int = 4, seed: int = 0, broken: bool = True) -> list[str]:
    """Write ``n`` random URDF+OBJ bundles (scaled off the unit cube) plus two broken ones.

    The broken bundles are a cyclic tree and a link without geometry; both must be
    discarded by preprocessing. Returns the bundle directory names.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    names = []
    for i in range(n):
        asset = random_asset(rng, int(rng.integers(2, 7)))
        scale = float(rng.uniform(0.5, 3.0))
        shift = rng.uniform(-2.0, 2.0, size=3)
        moved = ArticulatedAsset([m.transformed(scale=scale, translation=shift) for m in asset.meshes],
                                 scale_tree(asset.tree, scale, shift))
        name = f"asset_{i:03d}"
        save_asset(moved, root / name, name=name)
        names.append(name)
    if broken:
        d = root / "broken_cycle"
        d.mkdir(parents=True, exist_ok=True)
        (d / "cyclic.urdf").write_text(CYCLIC_URDF)
        for part in ("a", "b"):
            write_obj(d / f"{part}.obj", box_mesh([0, 0, 0], [1, 1, 1]))
        d = root / "broken_hollow"
        d.mkdir(parents=True, exist_ok=True)
        (d / "hollow.urdf").write_text(HINGE_URDF.replace(
            '<visual><geometry><mesh filename="lid.obj"/></geometry></visual>', ""))
        write_obj(d / "base.obj", box_mesh([0, 0, 0], [1, 0.5, 1]))
        names += ["broken_cycle", "broken_hollow"]
    return names

