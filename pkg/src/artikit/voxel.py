"""Sparse part-labelled voxel grids: voxelization and the text file format."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .mesh import TriMesh

log = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 64

# sub-voxel ray offsets; keep rays off mesh edges that sit exactly on cell-center lines
_RAY_JITTER = (3.1415927e-7, 2.7182818e-7, 1.4142136e-7)


@dataclass(frozen=True, eq=False)
class SparseVoxelGrid:
    """Active cells of an R^3 grid, sorted by (i, j, k), each with a part id and channels."""

    resolution: int
    coords: np.ndarray
    part_ids: np.ndarray
    channels: np.ndarray = None

    def __post_init__(self):
        R = int(self.resolution)
        coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, 3)
        parts = np.asarray(self.part_ids, dtype=np.int64).reshape(-1)
        n = len(coords)
        ch = self.channels
        if ch is None:
            ch = np.zeros((n, 0))
        else:
            ch = np.asarray(ch, dtype=float)
            ch = ch.reshape(n, -1) if n else ch.reshape(0, ch.shape[-1] if ch.ndim == 2 else 0)
        if len(parts) != n:
            raise ValueError("one part id per cell required")
        if n and (coords.min() < 0 or coords.max() >= R):
            raise ValueError(f"cell coordinates outside 0..{R - 1}")
        if n and parts.min() < 0:
            raise ValueError("part ids must be non-negative")
        order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))
        coords, parts, ch = coords[order], parts[order], ch[order]
        if n > 1 and np.any(np.all(coords[1:] == coords[:-1], axis=1)):
            raise ValueError("duplicate cell coordinates")
        for arr in (coords, parts, ch):
            arr.setflags(write=False)
        object.__setattr__(self, "resolution", R)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "part_ids", parts)
        object.__setattr__(self, "channels", ch)

    @property
    def count(self) -> int:
        return len(self.coords)

    @property
    def C(self) -> int:
        return self.channels.shape[1]

    @property
    def K(self) -> int:
        return int(self.part_ids.max()) + 1 if self.count else 0

    def parts(self) -> list[int]:
        return sorted(int(p) for p in np.unique(self.part_ids))

    def with_channels(self, channels) -> SparseVoxelGrid:
        return SparseVoxelGrid(self.resolution, self.coords, self.part_ids, channels)

    def to_dense(self) -> np.ndarray:
        """Dense label volume, -1 for inactive cells."""
        out = np.full((self.resolution,) * 3, -1, dtype=np.int64)
        out[tuple(self.coords.T)] = self.part_ids
        return out

    @classmethod
    def from_dense(cls, labels, channels=None) -> SparseVoxelGrid:
        labels = np.asarray(labels)
        coords = np.argwhere(labels >= 0)
        return cls(labels.shape[0], coords, labels[tuple(coords.T)], channels)

    def same_geometry(self, other: SparseVoxelGrid) -> bool:
        return (self.resolution == other.resolution
                and np.array_equal(self.coords, other.coords)
                and np.array_equal(self.part_ids, other.part_ids))


# ---------------------------------------------------------------- file format


def voxels_text(grid: SparseVoxelGrid, extra: dict | None = None) -> str:
    """Header JSON line followed by one ``i j k part c0 .. c{C-1}`` line per cell."""
    from .urdf import fmt

    header = {"resolution": grid.resolution, "C": grid.C, "K": grid.K, "count": grid.count}
    header.update(extra or {})
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    for (i, j, k), p, ch in zip(grid.coords, grid.part_ids, grid.channels):
        lines.append(" ".join([str(i), str(j), str(k), str(p)] + [fmt(c) for c in ch]))
    return "\n".join(lines) + "\n"


def parse_voxels(text: str) -> tuple[SparseVoxelGrid, dict]:
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty voxel file")
    header = json.loads(lines[0])
    C, count = int(header["C"]), int(header["count"])
    rows = [ln.split() for ln in lines[1:] if ln.strip()]
    if len(rows) != count:
        raise ValueError(f"header announces {count} cells, file has {len(rows)}")
    if rows and any(len(r) != 4 + C for r in rows):
        raise ValueError(f"every cell line needs {4 + C} fields")
    ints = np.array([[int(v) for v in r[:4]] for r in rows], dtype=np.int64).reshape(len(rows), 4)
    ch = np.array([[float(v) for v in r[4:]] for r in rows], dtype=float).reshape(len(rows), C)
    grid = SparseVoxelGrid(int(header["resolution"]), ints[:, :3], ints[:, 3], ch)
    return grid, header


# ---------------------------------------------------------------- geometry helpers


def point_triangle_distance(points, tris, chunk: int = 4096) -> np.ndarray:
    """Unsigned distance from each point to the nearest of the given triangles."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 3)
    out = np.empty(len(points))
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    n = np.cross(b - a, c - a)
    nn = np.linalg.norm(n, axis=1)
    good = nn > 0
    nhat = np.where(good[:, None], n / np.where(good, nn, 1.0)[:, None], 0.0)
    edges = [(a, b), (b, c), (c, a)]
    step = max(1, chunk // max(1, len(tris)))
    for s in range(0, len(points), step):
        p = points[s:s + step, None, :]  # (P, 1, 3)
        best = np.full((p.shape[0], len(tris)), np.inf)
        for u, v in edges:
            d = v - u
            dd = np.einsum("ij,ij->i", d, d)
            t = np.einsum("pij,ij->pi", p - u, d) / np.where(dd > 0, dd, 1.0)
            t = np.clip(t, 0.0, 1.0)
            q = u + t[..., None] * d
            best = np.minimum(best, np.linalg.norm(p - q, axis=-1))
        h = np.einsum("pij,ij->pi", p - a, nhat)
        proj = p - h[..., None] * nhat
        inside = np.broadcast_to(good, best.shape).copy()
        for u, v in edges:
            inside &= np.einsum("pij,ij->pi", np.cross(v - u, proj - u), nhat) >= 0
        best = np.where(inside, np.minimum(best, np.abs(h)), best)
        out[s:s + step] = best.min(axis=1)
    return out


_BARY_CACHE: dict[int, np.ndarray] = {}


def _bary_grid(n: int) -> np.ndarray:
    if n not in _BARY_CACHE:
        pts = [(i / n, j / n) for i in range(n + 1) for j in range(n + 1 - i)]
        uv = np.array(pts)
        _BARY_CACHE[n] = np.column_stack([1.0 - uv.sum(axis=1), uv])
    return _BARY_CACHE[n]


def sample_triangle_points(tris, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Regular barycentric samples on each triangle with edge spacing <= ``spacing``.

    Returns (points, triangle index per point).
    """
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 3)
    edge = np.max(np.linalg.norm(tris - np.roll(tris, 1, axis=1), axis=2), axis=1)
    ns = np.maximum(1, np.ceil(edge / spacing)).astype(int)
    pts, owner = [], []
    for n in np.unique(ns):
        idx = np.nonzero(ns == n)[0]
        w = _bary_grid(int(n))
        pts.append(np.einsum("pk,tkd->tpd", w, tris[idx]).reshape(-1, 3))
        owner.append(np.repeat(idx, len(w)))
    if not pts:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
    return np.concatenate(pts), np.concatenate(owner)


def _cell_of(points, R: int) -> np.ndarray:
    return np.clip(np.floor(points * R).astype(np.int64), 0, R - 1)


# ---------------------------------------------------------------- voxelization


@dataclass
class PartClaim:
    part: int
    mask: np.ndarray  # dense R^3 bool
    watertight: bool = True
    surface_added: int = 0


@dataclass
class VoxelizeReport:
    non_watertight: list[int] = field(default_factory=list)
    contested: int = 0
    surface_added: int = 0


def _ray_parity(tris: np.ndarray, R: int, lo: np.ndarray, shape: np.ndarray, axis: int):
    """Inside mask of the sub-grid [lo, lo+shape) by crossing parity along +axis rays."""
    b_ax, c_ax = [d for d in range(3) if d != axis]
    nb, nc, na = int(shape[b_ax]), int(shape[c_ax]), int(shape[axis])
    delta = np.zeros((nb, nc, na + 1), dtype=np.int32)
    odd_columns = False
    if nb and nc and na and len(tris):
        jb, jc = _RAY_JITTER[b_ax], _RAY_JITTER[c_ax]
        pb, pc, pa = tris[:, :, b_ax], tris[:, :, c_ax], tris[:, :, axis]
        # candidate columns per triangle from its projected bounding box
        ib0 = np.maximum(np.ceil((pb.min(1) - jb) * R - 0.5).astype(np.int64), lo[b_ax])
        ib1 = np.minimum(np.floor((pb.max(1) - jb) * R - 0.5).astype(np.int64), lo[b_ax] + nb - 1)
        ic0 = np.maximum(np.ceil((pc.min(1) - jc) * R - 0.5).astype(np.int64), lo[c_ax])
        ic1 = np.minimum(np.floor((pc.max(1) - jc) * R - 0.5).astype(np.int64), lo[c_ax] + nc - 1)
        cb = np.maximum(ib1 - ib0 + 1, 0)
        cc = np.maximum(ic1 - ic0 + 1, 0)
        counts = cb * cc
        total = int(counts.sum())
        if total:
            tri = np.repeat(np.arange(len(tris)), counts)
            local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
            ib = ib0[tri] + local // cc[tri]
            ic = ic0[tri] + local % cc[tri]
            # ray (u, v) against projected vertices (u_i, v_i), via edge functions
            u = (ib + 0.5) / R + jb
            v = (ic + 0.5) / R + jc
            u0, u1, u2 = pb[tri, 0], pb[tri, 1], pb[tri, 2]
            v0, v1, v2 = pc[tri, 0], pc[tri, 1], pc[tri, 2]
            e0 = (u1 - u0) * (v - v0) - (v1 - v0) * (u - u0)
            e1 = (u2 - u1) * (v - v1) - (v2 - v1) * (u - u1)
            e2 = (u0 - u2) * (v - v2) - (v0 - v2) * (u - u2)
            area = e0 + e1 + e2
            hit = (((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))) & (area != 0)
            w0, w1, w2 = e1[hit] / area[hit], e2[hit] / area[hit], e0[hit] / area[hit]
            t = tri[hit]
            za = w0 * pa[t, 0] + w1 * pa[t, 1] + w2 * pa[t, 2]
            k0 = np.ceil(za * R - 0.5).astype(np.int64) - lo[axis]
            k0 = np.clip(k0, 0, na)
            np.add.at(delta, (ib[hit] - lo[b_ax], ic[hit] - lo[c_ax], k0), 1)
            # crossings beyond the sub-grid still count toward the column parity
            per_column = np.zeros((nb, nc), dtype=np.int64)
            np.add.at(per_column, (ib[hit] - lo[b_ax], ic[hit] - lo[c_ax]), 1)
            odd_columns = bool(np.any(per_column % 2))
    inside = (np.cumsum(delta[..., :na], axis=2) % 2).astype(bool)
    # reorder (b, c, a) back to (x, y, z)
    perm = np.argsort([b_ax, c_ax, axis])
    return np.transpose(inside, perm), odd_columns


def _surface_cells(tris: np.ndarray, R: int) -> np.ndarray:
    pts, _ = sample_triangle_points(tris, 0.25 / R)
    return np.unique(_cell_of(pts, R), axis=0)


def solid_mask(mesh: TriMesh, R: int) -> tuple[np.ndarray, bool]:
    """Dense R^3 occupancy of one closed mesh; falls back to surface + fill when not closed."""
    mask = np.zeros((R, R, R), dtype=bool)
    mesh = mesh.cleaned()
    if mesh.is_empty:
        return mask, True
    tris = mesh.triangles
    vlo, vhi = mesh.bounds()
    lo = np.clip(np.ceil(vlo * R - 0.5).astype(np.int64), 0, R - 1)
    hi = np.clip(np.floor(vhi * R - 0.5).astype(np.int64), -1, R - 1)
    shape = np.maximum(hi - lo + 1, 0)
    votes = np.zeros(tuple(shape), dtype=np.int8)
    watertight = True
    for axis in range(3):
        inside, odd = _ray_parity(tris, R, lo, shape, axis)
        watertight &= not odd
        votes += inside
    if watertight:
        sub = votes >= 2
        mask[lo[0]:lo[0] + shape[0], lo[1]:lo[1] + shape[1], lo[2]:lo[2] + shape[2]] = sub
        return mask, True
    shell = np.zeros((R + 2,) * 3, dtype=bool)
    cells = _surface_cells(tris, R) + 1
    shell[tuple(cells.T)] = True
    filled = ndimage.binary_fill_holes(shell)
    return filled[1:-1, 1:-1, 1:-1], False


def _cover_triangles(mask, tri, cells, R: int) -> int:
    """Activate few cells so every listed triangle touches one: static greedy set cover."""
    key = (cells[:, 0] * R + cells[:, 1]) * R + cells[:, 2]
    pairs = np.unique(np.column_stack([key, tri]), axis=0)
    cell_keys, per_cell = np.unique(pairs[:, 0], return_counts=True)
    order = np.lexsort((cell_keys, -per_cell))
    covered: set[int] = set()
    starts = np.searchsorted(pairs[:, 0], cell_keys)
    ends = np.append(starts[1:], len(pairs))
    added = 0
    n_tri = len(np.unique(pairs[:, 1]))
    for idx in order:
        tris = pairs[starts[idx]:ends[idx], 1]
        new = [t for t in tris.tolist() if t not in covered]
        if not new:
            continue
        covered.update(new)
        k = int(cell_keys[idx])
        mask[k // (R * R), (k // R) % R, k % R] = True
        added += 1
        if len(covered) == n_tri:
            break
    return added


def _claim(mesh: TriMesh, part: int, R: int) -> PartClaim:
    mask, watertight = solid_mask(mesh, R)
    claim = PartClaim(part, mask, watertight)
    mesh = mesh.cleaned()
    if mesh.is_empty:
        return claim
    # every triangle must touch at least one active cell of its part
    pts, owner = sample_triangle_points(mesh.triangles, 0.5 / R)
    cells = _cell_of(pts, R)
    touched = np.zeros(len(mesh.faces), dtype=bool)
    touched[owner[mask[tuple(cells.T)]]] = True
    missing = ~touched[owner]
    if np.any(missing):
        claim.surface_added = _cover_triangles(mask, owner[missing], cells[missing], R)
    return claim


def voxelize(meshes, part_ids, resolution: int = DEFAULT_RESOLUTION, workers: int = 1,
             report: VoxelizeReport | None = None) -> SparseVoxelGrid:
    """Solid voxelization of normalized part meshes into a part-labelled sparse grid.

    A cell is active when its center is inside a part (majority of x/y/z ray parities).
    Triangles that would otherwise touch no active cell are covered by a small greedy
    set of extra cells they pass through. Cells claimed by several parts go to the part whose surface is nearest
    the cell center, then to the lowest part id.
    """
    meshes = list(meshes)
    part_ids = [int(p) for p in part_ids]
    if len(meshes) != len(part_ids):
        raise ValueError("one part id per mesh required")
    R = int(resolution)
    if R < 1:
        raise ValueError("resolution must be positive")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            claims = list(pool.map(lambda mp: _claim(mp[0], mp[1], R), zip(meshes, part_ids)))
    else:
        claims = [_claim(m, p, R) for m, p in zip(meshes, part_ids)]

    by_part: dict[int, np.ndarray] = {}
    for claim in claims:
        if claim.part in by_part:
            by_part[claim.part] |= claim.mask
        else:
            by_part[claim.part] = claim.mask.copy()
        if report is not None:
            report.surface_added += claim.surface_added
            if not claim.watertight:
                report.non_watertight.append(claim.part)
        if not claim.watertight:
            log.warning("part %d: mesh is not watertight, used surface fill", claim.part)

    labels = np.full((R, R, R), -1, dtype=np.int64)
    count = np.zeros((R, R, R), dtype=np.int16)
    for part in sorted(by_part):
        m = by_part[part]
        count += m
        labels[m & (labels < 0)] = part
    contested = np.argwhere(count > 1)
    if len(contested):
        centers = (contested + 0.5) / R
        best = np.full(len(contested), np.inf)
        winner = np.full(len(contested), -1, dtype=np.int64)
        tris_of = {p: [] for p in by_part}
        for m, p in zip(meshes, part_ids):
            if not m.cleaned().is_empty:
                tris_of[p].append(m.cleaned().triangles)
        for part in sorted(by_part):
            sel = by_part[part][tuple(contested.T)]
            if not np.any(sel) or not tris_of[part]:
                continue
            d = point_triangle_distance(centers[sel], np.concatenate(tris_of[part]))
            idx = np.nonzero(sel)[0]
            better = d < best[idx]  # strict: equal distance keeps the lower id
            best[idx[better]] = d[better]
            winner[idx[better]] = part
        labels[tuple(contested.T)] = winner
        if report is not None:
            report.contested += len(contested)
    return SparseVoxelGrid.from_dense(labels)


def occupancy_fraction(grid: SparseVoxelGrid) -> float:
    return grid.count / float(grid.resolution) ** 3


def sphere_volume_fraction(radius: float) -> float:
    return 4.0 / 3.0 * math.pi * radius ** 3
