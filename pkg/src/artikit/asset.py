"""Articulated assets: part meshes indexed by link id plus their kinematic tree."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .kinematic_graph import JointType, KinematicTree, Link, require_valid
from .mesh import TriMesh, read_obj, write_obj
from .urdf import canonical_frames, parse_urdf_with_frames, write_urdf


@dataclass(frozen=True, eq=False)
class ArticulatedAsset:
    """Meshes ``meshes[i]`` belong to link ``i`` and are expressed in asset coordinates."""

    meshes: tuple[TriMesh, ...]
    tree: KinematicTree

    def __post_init__(self):
        object.__setattr__(self, "meshes", tuple(self.meshes))
        if len(self.meshes) != self.tree.K:
            raise ValueError(f"{len(self.meshes)} meshes for {self.tree.K} links")

    @property
    def K(self) -> int:
        return self.tree.K

    def validate(self) -> None:
        require_valid(self.tree)


def scale_tree(tree: KinematicTree, scale: float, translation) -> KinematicTree:
    """Apply a uniform normalization to joint pivots and prismatic limits."""
    t = np.asarray(translation, dtype=float)
    joints = []
    for j in tree.joints:
        if j.jtype is JointType.FIXED:
            joints.append(j)
            continue
        pivot = tuple(np.asarray(j.axis.pivot) * scale + t)
        limits = j.limits
        if j.jtype is JointType.PRISMATIC:
            limits = replace(limits, lower=limits.lower * scale, upper=limits.upper * scale)
        joints.append(replace(j, axis=replace(j.axis, pivot=pivot), limits=limits))
    return replace(tree, joints=tuple(joints))


def load_asset(urdf_path) -> ArticulatedAsset:
    """Read a URDF and its OBJ meshes; meshes are moved from link frames to asset coordinates."""
    urdf_path = Path(urdf_path)
    tree, frames = parse_urdf_with_frames(urdf_path.read_text())
    meshes = []
    for link in sorted(tree.links, key=lambda l: l.id):
        if link.mesh_ref is None:
            meshes.append(TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)))
            continue
        path = urdf_path.parent / link.mesh_ref
        m = read_obj(path)
        frame = frames[link.id]
        meshes.append(m.transformed(rotation=frame[:3, :3], translation=frame[:3, 3]))
    return ArticulatedAsset(meshes, tree)


def save_asset(asset: ArticulatedAsset, out_dir, name: str = "asset",
               mesh_dir: str = "meshes") -> Path:
    """Write canonical URDF plus one OBJ per link in link-local coordinates."""
    out_dir = Path(out_dir)
    (out_dir / mesh_dir).mkdir(parents=True, exist_ok=True)
    links = []
    for link in sorted(asset.tree.links, key=lambda l: l.id):
        links.append(Link(link.id, link.name, f"{mesh_dir}/part_{link.id:02d}.obj"))
    tree = replace(asset.tree, links=tuple(links))
    frames = canonical_frames(tree)
    for link in links:
        mesh = asset.meshes[link.id]
        local = TriMesh(mesh.vertices - frames[link.id], mesh.faces)
        write_obj(out_dir / link.mesh_ref, local)
    urdf_path = out_dir / f"{name}.urdf"
    urdf_path.write_text(write_urdf(tree, name=name))
    return urdf_path
