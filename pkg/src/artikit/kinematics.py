"""Joint motion, forward kinematics, state sampling and posing."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .asset import ArticulatedAsset
from .kinematic_graph import Joint, JointType, KinematicTree, require_valid, topological_order
from .mesh import TriMesh


class LimitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        """Composition: apply ``other`` first, then ``self``."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(3)) and not np.any(self.translation))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def allclose(self, other: RigidTransform, atol: float = 1e-9) -> bool:
        return (np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
                and np.allclose(self.translation, other.translation, rtol=0, atol=atol))


def rotation_about(direction, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit ``direction``."""
    x, y, z = direction
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def joint_transform(joint: Joint, q: float) -> RigidTransform:
    lo, hi = joint.limits.lower, joint.limits.upper
    if q < lo or q > hi:
        raise LimitError(f"joint {joint.parent}->{joint.child}: q={q} outside [{lo}, {hi}]")
    if joint.jtype is JointType.FIXED or q == 0:
        return RigidTransform.identity()
    direction = np.asarray(joint.axis.direction, dtype=float)
    if joint.jtype is JointType.PRISMATIC:
        return RigidTransform(np.eye(3), q * direction)
    rot = rotation_about(direction, q)
    pivot = np.asarray(joint.axis.pivot, dtype=float)
    return RigidTransform(rot, pivot - rot @ pivot)


@dataclass(frozen=True)
class ArticulationState:
    """Joint values ordered by child link id (one per joint)."""

    q: tuple[float, ...]
    fraction: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))

    def to_json(self, tree: KinematicTree) -> dict:
        names = {l.id: l.name for l in tree.links}
        return {names[j.child]: v for j, v in zip(tree.joints_by_child(), self.q)}

    @classmethod
    def from_json(cls, tree: KinematicTree, values: dict) -> ArticulationState:
        names = {l.id: l.name for l in tree.links}
        missing = [names[j.child] for j in tree.joints_by_child() if names[j.child] not in values]
        if missing:
            raise ValueError(f"state lacks values for {missing}")
        return cls(tuple(float(values[names[j.child]]) for j in tree.joints_by_child()))


def check_state(tree: KinematicTree, state: ArticulationState) -> None:
    joints = tree.joints_by_child()
    if len(state.q) != len(joints):
        raise ValueError(f"state has {len(state.q)} values, tree has {len(joints)} joints")
    for joint, q in zip(joints, state.q):
        if joint.jtype is JointType.FIXED and q != 0:
            raise LimitError(f"fixed joint {joint.parent}->{joint.child} must have q = 0")
        if q < joint.limits.lower or q > joint.limits.upper:
            raise LimitError(f"joint {joint.parent}->{joint.child}: q={q} outside "
                             f"[{joint.limits.lower}, {joint.limits.upper}]")


def forward_kinematics(tree: KinematicTree, state: ArticulationState) -> dict[int, RigidTransform]:
    require_valid(tree)
    check_state(tree, state)
    q_of = {j.child: q for j, q in zip(tree.joints_by_child(), state.q)}
    by_child = {j.child: j for j in tree.joints}
    out = {tree.root: RigidTransform.identity()}
    for link in topological_order(tree):
        if link == tree.root:
            continue
        joint = by_child[link]
        out[link] = out[joint.parent] @ joint_transform(joint, q_of[link])
    return out


def rest_state(tree: KinematicTree) -> ArticulationState:
    return ArticulationState(tuple(j.limits.lower for j in tree.joints_by_child()), fraction=0.0)


def fraction_state(tree: KinematicTree, s: float) -> ArticulationState:
    """Every joint at ``lower + s (upper - lower)``, clamped to its limits."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"fraction {s} outside [0, 1]")
    q = []
    for j in tree.joints_by_child():
        lo, hi = j.limits.lower, j.limits.upper
        q.append(min(max(lo + s * (hi - lo), lo), hi))
    return ArticulationState(tuple(q), fraction=s)


def sample_states(tree: KinematicTree, count: int, mode: str = "uniform-grid",
                  seed: int = 0) -> list[ArticulationState]:
    """Uniform-grid states at fractions j/count (j = 1..count), or seeded uniform draws."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if mode == "uniform-grid":
        return [fraction_state(tree, j / count) for j in range(1, count + 1)]
    if mode != "random":
        raise ValueError(f"unknown sampling mode {mode!r}")
    rng = np.random.default_rng(seed)
    joints = tree.joints_by_child()
    states = []
    for _ in range(count):
        q = []
        for j in joints:
            if j.jtype is JointType.FIXED:
                q.append(0.0)
            else:
                q.append(float(rng.uniform(j.limits.lower, j.limits.upper)))
        states.append(ArticulationState(tuple(q)))
    return states


def pose_asset(asset: ArticulatedAsset, state: ArticulationState) -> list[TriMesh]:
    transforms = forward_kinematics(asset.tree, state)
    out = []
    for link_id, mesh in enumerate(asset.meshes):
        tf = transforms[link_id]
        out.append(mesh if tf.is_identity() else TriMesh(tf.apply(mesh.vertices), mesh.faces))
    return out


def states_json(tree: KinematicTree, states: list[ArticulationState]) -> str:
    return json.dumps([s.to_json(tree) for s in states], indent=1, sort_keys=True)
