"""Per-joint articulation vectors and the adjacency tensor.

Vector layout (frozen)::

    index  0      1..3        4..6            7       8
           type   pivot xyz   direction xyz   lower   upper
"""

from __future__ import annotations

import numpy as np

from .kinematic_graph import (
    Joint,
    JointAxis,
    JointLimits,
    JointType,
    KinematicTree,
    UNIT_TOL,
    require_valid,
)

CODE_DIM = 9
TYPE_SLOT = 0
PIVOT_SLOTS = slice(1, 4)
DIRECTION_SLOTS = slice(4, 7)
LOWER_SLOT = 7
UPPER_SLOT = 8
MIN_DIRECTION_NORM = 1e-6


class CodecError(ValueError):
    pass


def encode_joint(joint: Joint) -> np.ndarray:
    c = np.zeros(CODE_DIM)
    if joint.jtype is JointType.FIXED:
        return c
    direction = np.asarray(joint.axis.direction, dtype=float)
    norm = float(np.linalg.norm(direction))
    if abs(norm - 1.0) > UNIT_TOL:
        raise CodecError(f"joint {joint.parent}->{joint.child}: direction norm {norm} is not 1")
    c[TYPE_SLOT] = float(joint.jtype)
    c[PIVOT_SLOTS] = joint.axis.pivot
    c[DIRECTION_SLOTS] = direction
    c[LOWER_SLOT] = joint.limits.lower
    c[UPPER_SLOT] = joint.limits.upper
    return c


def snap_type(value: float) -> JointType:
    """Round a (possibly generated) type code to the nearest valid type, clamping."""
    return JointType(int(np.clip(np.rint(value), 0, 2)))


def decode_joint(c) -> tuple[JointType, JointAxis, JointLimits]:
    c = np.asarray(c, dtype=float)
    if c.shape != (CODE_DIM,):
        raise CodecError(f"articulation vector must have shape ({CODE_DIM},), got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise CodecError("articulation vector is not finite")
    jtype = snap_type(c[TYPE_SLOT])
    if jtype is JointType.FIXED:
        return jtype, JointAxis(), JointLimits()
    direction = c[DIRECTION_SLOTS].copy()
    norm = float(np.linalg.norm(direction))
    if norm < MIN_DIRECTION_NORM:
        raise CodecError(f"direction norm {norm:.3g} too small for a {jtype.name.lower()} joint")
    # leave exact unit vectors bit-identical
    if abs(norm - 1.0) > 1e-12:
        direction /= norm
    lo, hi = float(c[LOWER_SLOT]), float(c[UPPER_SLOT])
    if lo > hi:
        lo, hi = hi, lo
    return jtype, JointAxis(tuple(c[PIVOT_SLOTS]), tuple(direction)), JointLimits(lo, hi)


def build_adjacency(tree: KinematicTree) -> np.ndarray:
    """K x K binary matrix with J[parent, child] = 1 for every joint."""
    require_valid(tree)
    J = np.zeros((tree.K, tree.K), dtype=np.int8)
    for joint in tree.joints:
        J[joint.parent, joint.child] = 1
    return J


def edges_from_adjacency(J) -> list[tuple[int, int]]:
    J = np.asarray(J)
    return [(int(p), int(c)) for p, c in zip(*np.nonzero(J))]
