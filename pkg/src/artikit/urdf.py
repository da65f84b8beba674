"""URDF subset reader and canonical writer.

Joint origins are folded into world-frame axis pivots at parse time, so the
in-memory tree only holds asset-local axes.  The writer emits translation-only
link frames (a movable child's frame sits on its pivot, a fixed child shares its
parent's frame), which makes ``parse_urdf(write_urdf(t))`` reproduce ``t``.
"""

from __future__ import annotations

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

import numpy as np

from .kinematic_graph import (
    Joint,
    JointAxis,
    JointLimits,
    JointType,
    KinematicTree,
    Link,
    require_valid,
    topological_order,
    validate_tree,
)

log = logging.getLogger(__name__)

_TYPE_NAMES = {"fixed": JointType.FIXED, "revolute": JointType.REVOLUTE,
               "prismatic": JointType.PRISMATIC, "continuous": JointType.REVOLUTE}
_WRITE_NAMES = {JointType.FIXED: "fixed", JointType.REVOLUTE: "revolute",
                JointType.PRISMATIC: "prismatic"}
_IGNORED = {"inertial", "collision", "mimic", "transmission", "dynamics",
            "safety_controller", "calibration", "material", "gazebo"}
CONTINUOUS_LIMITS = (0.0, 2.0 * math.pi)


class URDFError(ValueError):
    """Malformed or unsupported URDF; the message carries an element locator."""


def fmt(x: float) -> str:
    """Fixed 9-significant-digit formatting used by every writer in the package."""
    x = float(x)
    if x == 0.0:
        return "0"
    return format(x, ".9g")


def _floats(text: str | None, n: int, where: str, default=None) -> np.ndarray:
    if text is None:
        if default is None:
            raise URDFError(f"{where}: missing attribute")
        return np.asarray(default, dtype=float)
    try:
        vals = [float(v) for v in text.split()]
    except ValueError:
        raise URDFError(f"{where}: cannot parse numbers from {text!r}") from None
    if len(vals) != n:
        raise URDFError(f"{where}: expected {n} numbers, got {len(vals)}")
    return np.asarray(vals, dtype=float)


def rpy_matrix(rpy) -> np.ndarray:
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


@dataclass
class _RawJoint:
    name: str
    parent: int
    child: int
    jtype: JointType
    origin: np.ndarray  # 4x4
    axis: np.ndarray
    limits: tuple[float, float]


def _warn_ignored(elem: ET.Element, seen: set[str]) -> None:
    for sub in elem:
        if sub.tag in _IGNORED and sub.tag not in seen:
            seen.add(sub.tag)
            log.warning("ignoring unsupported URDF element <%s>", sub.tag)


def parse_urdf_with_frames(text: str) -> tuple[KinematicTree, dict[int, np.ndarray]]:
    """Parse URDF text; also return each link's rest frame as a 4x4 world transform."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise URDFError(f"XML syntax error at line {line}, column {col}: {exc}") from None
    if root.tag != "robot":
        raise URDFError(f"<{root.tag}>: root element must be <robot>")

    seen: set[str] = set()
    _warn_ignored(root, seen)
    links: list[Link] = []
    index: dict[str, int] = {}
    for elem in root.findall("link"):
        name = elem.get("name")
        if not name:
            raise URDFError(f"<link> #{len(links)}: missing name")
        if name in index:
            raise URDFError(f'<link name="{name}">: duplicate link name')
        _warn_ignored(elem, seen)
        mesh_ref = None
        visuals = elem.findall("visual")
        if len(visuals) > 1:
            log.warning('link "%s": only the first <visual> is kept', name)
        if visuals:
            if visuals[0].find("origin") is not None:
                log.warning('link "%s": visual <origin> ignored', name)
            mesh = visuals[0].find("geometry/mesh")
            if mesh is not None:
                mesh_ref = mesh.get("filename")
        index[name] = len(links)
        links.append(Link(id=len(links), name=name, mesh_ref=mesh_ref))

    raw: list[_RawJoint] = []
    for elem in root.findall("joint"):
        name = elem.get("name", "")
        where = f'<joint name="{name}">'
        _warn_ignored(elem, seen)
        type_name = elem.get("type")
        if type_name not in _TYPE_NAMES:
            raise URDFError(f"{where}: unknown joint type {type_name!r}")
        jtype = _TYPE_NAMES[type_name]
        ends = []
        for tag in ("parent", "child"):
            sub = elem.find(tag)
            if sub is None or sub.get("link") is None:
                raise URDFError(f"{where}: missing <{tag} link=...>")
            if sub.get("link") not in index:
                raise URDFError(f"{where}: undeclared link {sub.get('link')!r}")
            ends.append(index[sub.get("link")])
        origin = np.eye(4)
        o = elem.find("origin")
        if o is not None:
            origin[:3, :3] = rpy_matrix(_floats(o.get("rpy"), 3, where + "/origin@rpy", (0, 0, 0)))
            origin[:3, 3] = _floats(o.get("xyz"), 3, where + "/origin@xyz", (0, 0, 0))
        a = elem.find("axis")
        axis = _floats(a.get("xyz") if a is not None else None, 3, where + "/axis@xyz", (1, 0, 0))
        limits = (0.0, 0.0)
        if jtype is not JointType.FIXED:
            lim = elem.find("limit")
            if lim is None:
                if type_name != "continuous":
                    raise URDFError(f"{where}: missing <limit> on a {type_name} joint")
                limits = CONTINUOUS_LIMITS
            else:
                limits = (float(_floats(lim.get("lower"), 1, where + "/limit@lower", (0,))[0]),
                          float(_floats(lim.get("upper"), 1, where + "/limit@upper", (0,))[0]))
            if np.linalg.norm(axis) == 0:
                raise URDFError(f"{where}: zero axis on a movable joint")
        raw.append(_RawJoint(name, ends[0], ends[1], jtype, origin, axis, limits))

    if not links:
        raise URDFError("<robot>: no links")
    children = {r.child for r in raw}
    roots = [link.id for link in links if link.id not in children]
    root_id = roots[0] if roots else 0

    topo = KinematicTree(links, [Joint(r.parent, r.child, JointType.FIXED, name=r.name) for r in raw], root_id)
    report = validate_tree(topo)
    if not report.ok:
        raise URDFError(f"<robot>: invalid kinematic tree: {report}")

    by_child = {r.child: r for r in raw}
    frames = {root_id: np.eye(4)}
    joints = []
    for link_id in topological_order(topo):
        if link_id == root_id:
            continue
        r = by_child[link_id]
        frame = frames[r.parent] @ r.origin
        frames[link_id] = frame
        if r.jtype is JointType.FIXED:
            joints.append(Joint(r.parent, r.child, JointType.FIXED, name=r.name))
            continue
        direction = frame[:3, :3] @ r.axis
        norm = np.linalg.norm(direction)
        if abs(norm - 1.0) > 1e-9:
            direction = direction / norm
        joints.append(Joint(r.parent, r.child, r.jtype,
                            JointAxis(tuple(frame[:3, 3]), tuple(direction)),
                            JointLimits(*r.limits), name=r.name))
    # keep document order of joints
    order = {r.child: i for i, r in enumerate(raw)}
    joints.sort(key=lambda j: order[j.child])
    tree = KinematicTree(links, joints, root_id)
    report = validate_tree(tree)
    if not report.ok:
        raise URDFError(f"<robot>: invalid kinematic tree: {report}")
    return tree, frames


def parse_urdf(text: str) -> KinematicTree:
    return parse_urdf_with_frames(text)[0]


def _canonical_origins(tree: KinematicTree) -> tuple[dict[int, np.ndarray], dict[int, str]]:
    """Translation-only link frames and the origin strings that reproduce them.

    Each frame is rebuilt from its parent's frame plus the 9-digit origin string,
    exactly as the parser will, so quantization does not accumulate along chains.
    """
    frames = {tree.root: np.zeros(3)}
    origins: dict[int, str] = {}
    by_child = {j.child: j for j in tree.joints}
    for link_id in topological_order(tree):
        if link_id == tree.root:
            continue
        joint = by_child[link_id]
        parent = frames[joint.parent]
        if joint.jtype is JointType.FIXED:
            offset = np.zeros(3)
        else:
            offset = np.asarray(joint.axis.pivot, dtype=float) - parent
        text = [fmt(v) for v in offset]
        origins[link_id] = " ".join(text)
        frames[link_id] = parent + np.array([float(v) for v in text])
    return frames, origins


def canonical_frames(tree: KinematicTree) -> dict[int, np.ndarray]:
    """Rest frame translations a parser reconstructs from ``write_urdf(tree)``."""
    return _canonical_origins(tree)[0]


def write_urdf(tree: KinematicTree, name: str = "artikit") -> str:
    require_valid(tree)
    names = {link.id: link.name for link in tree.links}
    if len(set(names.values())) != len(names):
        raise ValueError("link names must be unique to serialize as URDF")
    links = sorted(tree.links, key=lambda l: l.id)
    _, origins = _canonical_origins(tree)
    lines = ['<?xml version="1.0"?>', f"<robot name={quoteattr(name)}>"]
    for link in links:
        if link.mesh_ref is None:
            lines.append(f"  <link name={quoteattr(link.name)}/>")
            continue
        lines += [f"  <link name={quoteattr(link.name)}>",
                  "    <visual>",
                  "      <geometry>",
                  f"        <mesh filename={quoteattr(link.mesh_ref)}/>",
                  "      </geometry>",
                  "    </visual>",
                  "  </link>"]
    for joint in sorted(tree.joints, key=lambda j: j.child):
        jname = joint.name or f"joint_{joint.child}"
        lines += [f"  <joint name={quoteattr(jname)} type=\"{_WRITE_NAMES[joint.jtype]}\">",
                  f"    <parent link={quoteattr(names[joint.parent])}/>",
                  f"    <child link={quoteattr(names[joint.child])}/>",
                  f"    <origin xyz=\"{origins[joint.child]}\" rpy=\"0 0 0\"/>"]
        if joint.jtype is not JointType.FIXED:
            lines += [f"    <axis xyz=\"{' '.join(fmt(v) for v in joint.axis.direction)}\"/>",
                      f"    <limit lower=\"{fmt(joint.limits.lower)}\" upper=\"{fmt(joint.limits.upper)}\"/>"]
        lines.append("  </joint>")
    lines.append("</robot>")
    return "\n".join(lines) + "\n"
