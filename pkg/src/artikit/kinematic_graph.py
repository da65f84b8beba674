"""Kinematic tree data model: links, joints, validation and traversal order."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

UNIT_TOL = 1e-9


class JointType(IntEnum):
    FIXED = 0
    REVOLUTE = 1
    PRISMATIC = 2

    @property
    def movable(self) -> bool:
        return self is not JointType.FIXED


@dataclass(frozen=True)
class JointAxis:
    """Axis line in asset-local coordinates: a pivot point and a unit direction."""

    pivot: tuple[float, float, float] = (0.0, 0.0, 0.0)
    direction: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "pivot", tuple(float(v) for v in self.pivot))
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))
        if len(self.pivot) != 3 or len(self.direction) != 3:
            raise ValueError("pivot and direction must be 3-vectors")


@dataclass(frozen=True)
class JointLimits:
    lower: float = 0.0
    upper: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))


@dataclass(frozen=True)
class Link:
    id: int
    name: str
    mesh_ref: str | None = None


@dataclass(frozen=True)
class Joint:
    parent: int
    child: int
    jtype: JointType
    axis: JointAxis = field(default_factory=JointAxis)
    limits: JointLimits = field(default_factory=JointLimits)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "jtype", JointType(self.jtype))


@dataclass(frozen=True)
class KinematicTree:
    links: tuple[Link, ...]
    joints: tuple[Joint, ...]
    root: int = 0

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))

    @property
    def K(self) -> int:
        return len(self.links)

    def parent_joint(self, link_id: int) -> Joint | None:
        for joint in self.joints:
            if joint.child == link_id:
                return joint
        return None

    def children(self, link_id: int) -> list[int]:
        return sorted(j.child for j in self.joints if j.parent == link_id)

    def joints_by_child(self) -> list[Joint]:
        """Joints ordered by child link id; this is the order of state vectors."""
        return sorted(self.joints, key=lambda j: j.child)

    def link_by_name(self, name: str) -> Link:
        for link in self.links:
            if link.name == name:
                return link
        raise KeyError(name)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(self.violations)


class InvalidTreeError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__(f"invalid kinematic tree: {report}")
        self.report = report


def _check_joint_attributes(joint: Joint) -> list[str]:
    out = []
    tag = f"joint {joint.parent}->{joint.child}"
    pivot = np.asarray(joint.axis.pivot)
    direction = np.asarray(joint.axis.direction)
    lo, hi = joint.limits.lower, joint.limits.upper
    values = np.concatenate([pivot, direction, [lo, hi]])
    if not np.all(np.isfinite(values)):
        return [f"{tag}: non-finite attribute"]
    if joint.jtype is JointType.FIXED:
        if np.any(pivot != 0) or np.any(direction != 0):
            out.append(f"{tag}: fixed joint must carry a zero axis")
        if lo != 0 or hi != 0:
            out.append(f"{tag}: fixed joint must carry zero limits")
    else:
        norm = float(np.linalg.norm(direction))
        if abs(norm - 1.0) > UNIT_TOL:
            out.append(f"{tag}: axis direction norm {norm:.12g} is not 1")
        if lo > hi:
            out.append(f"{tag}: lower limit {lo} exceeds upper limit {hi}")
    return out


def validate_tree(tree: KinematicTree) -> ValidationReport:
    """Check every tree invariant; violations are returned as data."""
    violations: list[str] = []
    K = len(tree.links)
    ids = [link.id for link in tree.links]
    if K == 0:
        return ValidationReport(["tree has no links"])
    if sorted(ids) != list(range(K)):
        violations.append(f"link ids {ids} are not dense and unique in 0..{K - 1}")
    known = set(ids)
    if tree.root not in known:
        violations.append(f"root {tree.root} is not a declared link")

    parents: dict[int, list[int]] = {}
    for joint in tree.joints:
        tag = f"joint {joint.parent}->{joint.child}"
        if joint.parent not in known:
            violations.append(f"{tag}: parent link {joint.parent} undeclared")
        if joint.child not in known:
            violations.append(f"{tag}: child link {joint.child} undeclared")
        if joint.parent == joint.child:
            violations.append(f"{tag}: self loop on link {joint.child}")
        parents.setdefault(joint.child, []).append(joint.parent)
        violations.extend(_check_joint_attributes(joint))

    for child, ps in sorted(parents.items()):
        if len(ps) > 1:
            violations.append(f"link {child} has {len(ps)} parent joints {sorted(ps)}")
    if tree.root in parents:
        violations.append(f"root {tree.root} has a parent joint")
    if len(tree.joints) != K - 1:
        violations.append(f"expected {K - 1} joints for {K} links, found {len(tree.joints)}")

    # cycles along parent pointers
    parent_of = {c: ps[0] for c, ps in parents.items()}
    reported: set[frozenset[int]] = set()
    for start in sorted(parent_of):
        path: list[int] = []
        seen: dict[int, int] = {}
        node = start
        while node in parent_of and node not in seen:
            seen[node] = len(path)
            path.append(node)
            node = parent_of[node]
        if node in seen:
            cycle = frozenset(path[seen[node]:])
            if cycle not in reported:
                reported.add(cycle)
                members = ",".join(str(v) for v in sorted(cycle))
                violations.append(f"cycle {{{members}}}")

    # reachability from the root along joint edges
    if tree.root in known:
        adj: dict[int, list[int]] = {}
        for joint in tree.joints:
            adj.setdefault(joint.parent, []).append(joint.child)
        reach = {tree.root}
        stack = [tree.root]
        while stack:
            for nxt in adj.get(stack.pop(), []):
                if nxt not in reach:
                    reach.add(nxt)
                    stack.append(nxt)
        for link_id in sorted(known - reach):
            violations.append(f"link {link_id} unreachable")

    return ValidationReport(violations)


def require_valid(tree: KinematicTree) -> None:
    report = validate_tree(tree)
    if not report.ok:
        raise InvalidTreeError(report)


def topological_order(tree: KinematicTree) -> list[int]:
    """Root first, parents before children, ties broken by smallest link id."""
    require_valid(tree)
    children: dict[int, list[int]] = {}
    for joint in tree.joints:
        children.setdefault(joint.parent, []).append(joint.child)
    order = []
    heap = [tree.root]
    while heap:
        node = heapq.heappop(heap)
        order.append(node)
        for child in children.get(node, []):
            heapq.heappush(heap, child)
    return order


def trees_equal(a: KinematicTree, b: KinematicTree, atol: float = 1e-9, rtol: float = 0.0,
                compare_names: bool = False) -> bool:
    """Structural equality: topology and types exact, reals within ``atol + rtol * |b|``."""
    return not tree_differences(a, b, atol=atol, rtol=rtol, compare_names=compare_names)


def tree_differences(a: KinematicTree, b: KinematicTree, atol: float = 1e-9, rtol: float = 0.0,
                     compare_names: bool = False) -> list[str]:
    diffs = []
    if a.K != b.K:
        return [f"part count {a.K} != {b.K}"]
    if a.root != b.root:
        diffs.append(f"root {a.root} != {b.root}")
    if compare_names:
        for la, lb in zip(sorted(a.links, key=lambda l: l.id), sorted(b.links, key=lambda l: l.id)):
            if (la.name, la.mesh_ref) != (lb.name, lb.mesh_ref):
                diffs.append(f"link {la.id}: metadata differs")
    ja = {j.child: j for j in a.joints}
    jb = {j.child: j for j in b.joints}
    if set(ja) != set(jb):
        return diffs + [f"child sets differ: {sorted(ja)} vs {sorted(jb)}"]
    for child in sorted(ja):
        x, y = ja[child], jb[child]
        if x.parent != y.parent:
            diffs.append(f"part {child}: parent {x.parent} != {y.parent}")
        if x.jtype != y.jtype:
            diffs.append(f"part {child}: type {x.jtype.name} != {y.jtype.name}")
        va, vb = _attributes(x), _attributes(y)
        if np.any(np.abs(va - vb) > atol + rtol * np.abs(vb)):
            diffs.append(f"part {child}: attribute deviation {np.max(np.abs(va - vb)):.3g}")
        if compare_names and x.name != y.name:
            diffs.append(f"part {child}: joint name {x.name!r} != {y.name!r}")
    return diffs


def _attributes(j: Joint) -> np.ndarray:
    return np.array([*j.axis.pivot, *j.axis.direction, j.limits.lower, j.limits.upper])


def joint_attribute_deviation(x: Joint, y: Joint) -> float:
    return float(np.max(np.abs(_attributes(x) - _attributes(y))))
