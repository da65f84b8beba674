"""Triangle meshes: container, OBJ I/O, primitives and unit-cube normalization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def face_areas(self) -> np.ndarray:
        t = self.triangles
        return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def cleaned(self, eps: float = 0.0) -> TriMesh:
        """Drop zero-area faces."""
        keep = self.face_areas() > eps
        return TriMesh(self.vertices, self.faces[keep])

    def transformed(self, rotation=None, translation=None, scale=1.0) -> TriMesh:
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        v = v * scale
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return TriMesh(v, self.faces)

    def volume(self) -> float:
        t = self.triangles
        return float(np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])).sum() / 6.0)

    def array_equal(self, other: TriMesh) -> bool:
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.faces, other.faces))


def merge_meshes(meshes) -> TriMesh:
    verts, faces, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += len(m.vertices)
    if not verts:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return TriMesh(np.concatenate(verts), np.concatenate(faces))


# ---------------------------------------------------------------- OBJ


def read_obj(path) -> TriMesh:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):  # fan triangulation
                faces.append([idx[0], idx[k], idx[k + 1]])
    return TriMesh(np.array(verts, dtype=float).reshape(-1, 3),
                   np.array(faces, dtype=np.int64).reshape(-1, 3))


def obj_text(mesh: TriMesh) -> str:
    from .urdf import fmt

    lines = [f"v {fmt(x)} {fmt(y)} {fmt(z)}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"


def write_obj(path, mesh: TriMesh) -> None:
    Path(path).write_text(obj_text(mesh))


# ---------------------------------------------------------------- primitives


def box_mesh(lo, hi) -> TriMesh:
    """Axis-aligned box with outward-facing triangles."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    # corner index = 4*x + 2*y + z with x, y, z in {0 (lo), 1 (hi)}
    bits = np.array([[(i >> 2) & 1, (i >> 1) & 1, i & 1] for i in range(8)])
    corners = np.where(bits == 1, hi, lo)
    faces = np.array([
        [0, 2, 6], [0, 6, 4],  # z = lo
        [1, 5, 7], [1, 7, 3],  # z = hi
        [0, 4, 5], [0, 5, 1],  # y = lo
        [2, 3, 7], [2, 7, 6],  # y = hi
        [0, 1, 3], [0, 3, 2],  # x = lo
        [4, 6, 7], [4, 7, 5],  # x = hi
    ])
    return TriMesh(corners, faces)


def icosphere(center=(0.0, 0.0, 0.0), radius: float = 1.0, subdivisions: int = 4) -> TriMesh:
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
             [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
             [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]]
    faces = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
             [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
             [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
             [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    verts = [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    v = np.asarray(verts) * radius + np.asarray(center, dtype=float)
    return TriMesh(v, np.asarray(faces))


# ---------------------------------------------------------------- normalization


@dataclass(frozen=True)
class NormalizationTransform:
    """Uniform map ``x -> scale * x + translation``."""

    scale: float
    translation: tuple[float, float, float]

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) * self.scale + np.asarray(self.translation)

    def apply_mesh(self, mesh: TriMesh) -> TriMesh:
        return TriMesh(self.apply(mesh.vertices), mesh.faces)

    def to_dict(self) -> dict:
        return {"scale": self.scale, "translation": list(self.translation)}

    @classmethod
    def from_dict(cls, d) -> NormalizationTransform:
        return cls(float(d["scale"]), tuple(float(v) for v in d["translation"]))


class EmptyGeometryError(ValueError):
    pass


def normalize_asset(meshes) -> tuple[list[TriMesh], NormalizationTransform]:
    """Fit the union of ``meshes`` into [0,1]^3: longest extent 1, every axis minimum at 0.

    The y minimum landing on 0 is the "base aligned" convention (y is up).
    """
    nonempty = [m for m in meshes if len(m.vertices)]
    if not nonempty:
        raise EmptyGeometryError("no geometry to normalize")
    lo = np.min([m.vertices.min(axis=0) for m in nonempty], axis=0)
    hi = np.max([m.vertices.max(axis=0) for m in nonempty], axis=0)
    extent = float(np.max(hi - lo))
    if extent <= 0:
        raise EmptyGeometryError("geometry has zero extent")
    scale = 1.0 / extent
    tf = NormalizationTransform(scale, tuple(float(v) for v in -lo * scale))
    out = []
    for m in meshes:
        # (v - lo) * scale keeps the minimum at exactly 0
        v = (m.vertices - lo) * scale if len(m.vertices) else m.vertices
        out.append(TriMesh(v, m.faces))
    return out, tf
