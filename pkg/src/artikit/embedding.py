"""Joint-to-voxel embedding and its inverse.

Every active cell of a child part carries the 9-dim code of the joint that attaches
the part to its parent, plus a tenth channel holding the parent part id. Root cells
carry zeros and the parent sentinel -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import CODE_DIM, build_adjacency, decode_joint, encode_joint, snap_type
from .kinematic_graph import (
    Joint,
    KinematicTree,
    Link,
    require_valid,
    validate_tree,
)
from .voxel import SparseVoxelGrid, parse_voxels, voxels_text

ROOT_PARENT = -1
PARENT_SLOT = CODE_DIM
EMBED_DIM = CODE_DIM + 1


class EmbeddingError(ValueError):
    pass


class RecoveryError(ValueError):
    """Raised when a grid does not decode to a valid kinematic tree."""

    def __init__(self, message: str, parts: list[int] | None = None):
        super().__init__(message)
        self.parts = parts or []


@dataclass(frozen=True, eq=False)
class ArticulatedVoxelGrid:
    grid: SparseVoxelGrid
    adjacency: np.ndarray
    link_names: tuple[str, ...] = ()

    @property
    def K(self) -> int:
        """Part count from the adjacency sidecar, or from the labels when it is absent."""
        return len(self.adjacency) if np.size(self.adjacency) else self.grid.K

    def to_text(self, extra: dict | None = None) -> str:
        header = {"adjacency": np.asarray(self.adjacency).astype(int).tolist(),
                  "links": list(self.link_names)}
        header.update(extra or {})
        return voxels_text(self.grid, header)

    @classmethod
    def from_text(cls, text: str) -> tuple[ArticulatedVoxelGrid, dict]:
        grid, header = parse_voxels(text)
        if grid.C != EMBED_DIM:
            raise ValueError(f"articulated grid needs C={EMBED_DIM}, file has C={grid.C}")
        adj = np.asarray(header.get("adjacency", []), dtype=np.int8).reshape(int(header["K"]), -1)
        return cls(grid, adj, tuple(header.get("links", []))), header


def embed(tree: KinematicTree, grid: SparseVoxelGrid) -> ArticulatedVoxelGrid:
    require_valid(tree)
    tree_parts = set(range(tree.K))
    grid_parts = set(grid.parts())
    if grid_parts != tree_parts:
        extra = sorted(grid_parts - tree_parts)
        absent = sorted(tree_parts - grid_parts)
        raise EmbeddingError(f"grid parts absent from tree: {extra}; tree links without cells: {absent}")
    table = np.zeros((tree.K, EMBED_DIM))
    table[:, PARENT_SLOT] = ROOT_PARENT
    for joint in tree.joints:
        table[joint.child, :CODE_DIM] = encode_joint(joint)
        table[joint.child, PARENT_SLOT] = joint.parent
    names = tuple(link.name for link in sorted(tree.links, key=lambda l: l.id))
    return ArticulatedVoxelGrid(grid.with_channels(table[grid.part_ids]), build_adjacency(tree), names)


@dataclass(frozen=True)
class PartCode:
    code: np.ndarray
    parent: int


def _majority(values: np.ndarray) -> int:
    # ties go to the lower value: np.unique sorts ascending and argmax takes the first
    uniq, counts = np.unique(values, return_counts=True)
    return int(uniq[np.argmax(counts)])


def aggregate_part_channels(avg: ArticulatedVoxelGrid) -> dict[int, PartCode]:
    """Per-part consensus: majority type and parent, mean of continuous slots over type winners."""
    grid = avg.grid
    if grid.C != EMBED_DIM:
        raise ValueError(f"expected {EMBED_DIM} channels, got {grid.C}")
    out = {}
    for part in range(avg.K):
        rows = grid.channels[grid.part_ids == part]
        if len(rows) == 0:
            raise RecoveryError(f"part {part} has no cells", [part])
        types = np.array([int(snap_type(v)) for v in rows[:, 0]])
        jtype = _majority(types)
        parent = _majority(np.rint(rows[:, PARENT_SLOT]).astype(np.int64))
        agree = rows[types == jtype]
        # sort before averaging so the result does not depend on cell order
        cont = np.sort(agree[:, 1:CODE_DIM], axis=0)
        code = np.empty(CODE_DIM)
        code[0] = jtype
        # constant columns are copied so uniform parts decode bit-exactly
        code[1:] = np.where(cont[0] == cont[-1], cont[0], cont.mean(axis=0))
        out[part] = PartCode(code, parent)
    return out


def _unreachable(tree: KinematicTree) -> list[int]:
    reach, stack = {tree.root}, [tree.root]
    while stack:
        node = stack.pop()
        for j in tree.joints:
            if j.parent == node and j.child not in reach:
                reach.add(j.child)
                stack.append(j.child)
    return sorted(set(range(tree.K)) - reach)


def recover(avg: ArticulatedVoxelGrid) -> KinematicTree:
    """Rebuild the kinematic tree from per-cell channels; checked against the adjacency sidecar."""
    codes = aggregate_part_channels(avg)
    K = avg.K
    roots = [p for p, pc in codes.items() if pc.parent == ROOT_PARENT]
    if len(roots) != 1:
        raise RecoveryError(f"expected exactly one root part, found {roots}", roots)
    root = roots[0]
    joints = []
    for part, pc in sorted(codes.items()):
        if part == root:
            continue
        if not 0 <= pc.parent < K or pc.parent == part:
            raise RecoveryError(f"part {part}: invalid parent id {pc.parent} (orphaned part)", [part])
        jtype, axis, limits = decode_joint(pc.code)
        joints.append(Joint(pc.parent, part, jtype, axis, limits))
    names = avg.link_names if len(avg.link_names) == K else tuple(f"link_{i}" for i in range(K))
    tree = KinematicTree([Link(i, names[i]) for i in range(K)], joints, root)
    report = validate_tree(tree)
    if not report.ok:
        raise RecoveryError(f"recovered topology is invalid: {report}", _unreachable(tree))
    adj = np.asarray(avg.adjacency)
    if adj.size:
        expected = np.zeros((K, K), dtype=np.int8)
        for j in joints:
            expected[j.parent, j.child] = 1
        mismatch = sorted({int(c) for c in np.nonzero(np.any(expected != adj, axis=0))[0]})
        if mismatch:
            raise RecoveryError(f"parent channel disagrees with adjacency for parts {mismatch}", mismatch)
    return tree
