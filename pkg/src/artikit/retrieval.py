"""Label-filtered box-similarity retrieval and rigid box assembly (comparison baseline)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .asset import ArticulatedAsset
from .kinematic_graph import KinematicTree, require_valid
from .mesh import TriMesh, read_obj


class RetrievalMiss(LookupError):
    def __init__(self, label: str):
        super().__init__(f"no repository entry carries label {label!r}")
        self.label = label


def mesh_box(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """(center, extents) of the axis-aligned bounding box."""
    lo, hi = mesh.bounds()
    return (lo + hi) / 2.0, hi - lo


@dataclass(frozen=True, eq=False)
class RepoEntry:
    mesh: TriMesh
    label: str
    extents: np.ndarray
    center: np.ndarray
    path: str = ""


class PartRepository:
    def __init__(self, entries=()):
        self.entries: list[RepoEntry] = []
        for item in entries:
            self.add(*item)

    def add(self, mesh: TriMesh, label: str, path: str = "") -> int:
        if not label:
            raise ValueError("labels must be non-empty")
        center, extents = mesh_box(mesh)
        self.entries.append(RepoEntry(mesh, label, extents, center, path))
        return len(self.entries) - 1

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_manifest(cls, path) -> PartRepository:
        """JSON list of ``{"mesh_path": ..., "label": ...}``; paths relative to the manifest."""
        path = Path(path)
        repo = cls()
        for item in json.loads(path.read_text()):
            repo.add(read_obj(path.parent / item["mesh_path"]), item["label"], item["mesh_path"])
        return repo


@dataclass(frozen=True)
class PartProposal:
    center: tuple[float, float, float]
    extents: tuple[float, float, float]
    label: str

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "extents", tuple(float(v) for v in self.extents))
        if any(e <= 0 for e in self.extents):
            raise ValueError("proposal extents must be positive")

    @classmethod
    def from_mesh(cls, mesh: TriMesh, label: str) -> PartProposal:
        center, extents = mesh_box(mesh)
        return cls(tuple(center), tuple(extents), label)


def size_distance(entry: RepoEntry, proposal: PartProposal) -> float:
    return float(np.linalg.norm(entry.extents - np.asarray(proposal.extents)))


def retrieve_part(repo: PartRepository, proposal: PartProposal) -> tuple[int, float]:
    """Index and size distance of the closest same-label entry; ties go to the lowest index."""
    if len(repo) == 0:
        raise ValueError("empty repository")
    best, best_d = -1, np.inf
    for i, entry in enumerate(repo.entries):
        if entry.label != proposal.label:
            continue
        d = size_distance(entry, proposal)
        if d < best_d:
            best, best_d = i, d
    if best < 0:
        raise RetrievalMiss(proposal.label)
    return best, best_d


def align_to_box(mesh: TriMesh, proposal: PartProposal) -> TriMesh:
    """Per-axis scale and shift so the mesh box equals the proposal box.

    Axes whose box already matches are left untouched, so a perfect match is a no-op.
    """
    center, extents = mesh_box(mesh)
    tc = np.asarray(proposal.center)
    te = np.asarray(proposal.extents)
    v = mesh.vertices.copy()
    for a in range(3):
        if center[a] == tc[a] and extents[a] == te[a]:
            continue
        s = te[a] / extents[a] if extents[a] > 0 else 1.0
        v[:, a] = (v[:, a] - center[a]) * s + tc[a]
    return TriMesh(v, mesh.faces)


def assemble(parts, tree: KinematicTree, repo: PartRepository) -> ArticulatedAsset:
    """``parts[i] = (entry id, proposal)`` for link ``i``; returns the assembled asset."""
    require_valid(tree)
    parts = list(parts)
    if len(parts) != tree.K:
        raise ValueError(f"{len(parts)} parts for {tree.K} links")
    meshes = [align_to_box(repo.entries[eid].mesh, prop) for eid, prop in parts]
    return ArticulatedAsset(meshes, tree)
