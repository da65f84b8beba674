"""Resting/articulated-state evaluation: Chamfer distance and PSNR over rendered states."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .asset import ArticulatedAsset
from .kinematics import ArticulationState, pose_asset, rest_state, sample_states
from .mesh import TriMesh, merge_meshes
from .render import Camera, Image, rasterize

PSNR_CAP = 99.0
DEFAULT_POINTS = 10_000
DEFAULT_STATES = 5
CD_DEFINITION = "mean_x min_y |x-y|^2 + mean_y min_x |y-x|^2"


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    source: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


def sample_surface_points(mesh: TriMesh, n: int, seed: int = 0, source: str = "") -> PointCloud:
    """Area-weighted uniform samples on the mesh surface."""
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = mesh.face_areas() if not mesh.is_empty else np.zeros(0)
    total = math.fsum(areas)
    if total <= 0:
        raise ValueError("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(areas) / areas.sum()
    faces = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), len(areas) - 1)
    r1, r2 = rng.random(n), rng.random(n)
    s = np.sqrt(r1)
    w = np.column_stack([1.0 - s, s * (1.0 - r2), s * r2])
    tris = mesh.triangles[faces]
    return PointCloud(np.einsum("nk,nkd->nd", w, tris), source)


def _points(X) -> np.ndarray:
    pts = X.points if isinstance(X, PointCloud) else np.asarray(X, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("empty point cloud")
    return pts


def nearest_sq_bruteforce(src, dst, chunk: int = 1024) -> np.ndarray:
    out = np.empty(len(src))
    for s in range(0, len(src), chunk):
        diff = src[s:s + chunk, None, :] - dst[None, :, :]
        out[s:s + chunk] = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
    return out


def nearest_sq(src, dst) -> np.ndarray:
    d, _ = cKDTree(dst).query(src, k=1)
    return d * d


def _directional(d2: np.ndarray) -> float:
    return math.fsum(d2) / len(d2)


def chamfer(X, Y) -> float:
    """Squared-distance Chamfer: sum of the two mean nearest-neighbour terms (k-d tree)."""
    x, y = _points(X), _points(Y)
    return _directional(nearest_sq(x, y)) + _directional(nearest_sq(y, x))


def chamfer_bruteforce(X, Y) -> float:
    x, y = _points(X), _points(Y)
    return _directional(nearest_sq_bruteforce(x, y)) + _directional(nearest_sq_bruteforce(y, x))


def psnr(a: Image, b: Image) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    diff = a.rgb.astype(np.int64) - b.rgb.astype(np.int64)
    mse = float((diff * diff).sum()) / diff.size
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / mse))


# ---------------------------------------------------------------- protocol


def _mesh_key(mesh: TriMesh):
    if mesh.is_empty:
        return (0, 0, (), (), "")
    lo, hi = mesh.bounds()
    digest = hashlib.sha1(mesh.vertices.tobytes() + mesh.faces.tobytes()).hexdigest()
    return (len(mesh.vertices), len(mesh.faces), tuple(lo), tuple(hi), digest)


def canonical_union(meshes) -> TriMesh:
    """Merge part meshes in an order that depends only on their geometry."""
    return merge_meshes(sorted((m for m in meshes if not m.is_empty), key=_mesh_key))


@dataclass
class StateMetrics:
    label: str  # "RS" or "AS"
    fraction: float
    cd: float
    psnr: float


@dataclass
class EvalReport:
    rs_cd: float
    as_cd: float
    rs_psnr: float
    as_psnr: float
    states: list[StateMetrics]
    seed: int
    points: int
    n_states: int
    camera: dict
    openshape: None = None
    cd_definition: str = CD_DEFINITION
    renders: list = field(default_factory=list, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("renders")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> EvalReport:
        d = json.loads(text)
        d["states"] = [StateMetrics(**s) for s in d["states"]]
        return cls(**d)

    def table(self) -> str:
        head = f"{'RS-PSNR':>10} {'AS-PSNR':>10} {'RS-CD':>12} {'AS-CD':>12}"
        row = f"{self.rs_psnr:>10.2f} {self.as_psnr:>10.2f} {self.rs_cd:>12.6f} {self.as_cd:>12.6f}"
        return head + "\n" + row


def _state_metrics(gen: ArticulatedAsset, gt: ArticulatedAsset, s_gen: ArticulationState,
                   s_gt: ArticulationState, points: int, seed: int, camera: Camera):
    posed_gen = pose_asset(gen, s_gen)
    posed_gt = pose_asset(gt, s_gt)
    mg, mt = canonical_union(posed_gen), canonical_union(posed_gt)
    cd = chamfer(sample_surface_points(mg, points, seed), sample_surface_points(mt, points, seed))
    img_gen = rasterize([mg], camera=camera)
    img_gt = rasterize([mt], camera=camera)
    return cd, psnr(img_gen, img_gt), img_gen, img_gt


def eval_protocol(gen: ArticulatedAsset, gt: ArticulatedAsset, states: int = DEFAULT_STATES,
                  points: int = DEFAULT_POINTS, seed: int = 0, camera: Camera | None = None,
                  keep_renders: bool = False) -> EvalReport:
    """RS metrics at the resting state; AS metrics averaged over fractions j/states, j = 1..states.

    Each asset is posed with its own tree. Both assets use the same point budget,
    sampling seed and camera at every state.
    """
    if states < 1:
        raise ValueError("states must be >= 1")
    gen.validate()
    gt.validate()
    camera = camera or Camera()
    plan = [("RS", 0.0, rest_state(gen.tree), rest_state(gt.tree))]
    grid_gen = sample_states(gen.tree, states, "uniform-grid")
    grid_gt = sample_states(gt.tree, states, "uniform-grid")
    for j, (a, b) in enumerate(zip(grid_gen, grid_gt), start=1):
        plan.append(("AS", j / states, a, b))
    rows, renders = [], []
    for label, frac, s_gen, s_gt in plan:
        cd, p, ig, it = _state_metrics(gen, gt, s_gen, s_gt, points, seed, camera)
        rows.append(StateMetrics(label, frac, cd, p))
        if keep_renders:
            renders.append((label, frac, ig, it))
    as_rows = [r for r in rows if r.label == "AS"]
    return EvalReport(
        rs_cd=rows[0].cd,
        as_cd=math.fsum(r.cd for r in as_rows) / len(as_rows),
        rs_psnr=rows[0].psnr,
        as_psnr=math.fsum(r.psnr for r in as_rows) / len(as_rows),
        states=rows, seed=seed, points=points, n_states=states,
        camera=asdict(camera), renders=renders,
    )
