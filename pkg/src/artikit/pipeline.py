"""Corpus preprocessing, manifests and the per-command workflows behind the CLI."""

from __future__ import annotations

import json
import logging
import os
import shutil
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .asset import ArticulatedAsset, load_asset, save_asset, scale_tree
from .embedding import ArticulatedVoxelGrid, EmbeddingError, RecoveryError, embed, recover
from .kinematic_graph import InvalidTreeError, tree_differences, validate_tree
from .kinematics import ArticulationState, pose_asset, sample_states
from .mesh import EmptyGeometryError, normalize_asset
from .urdf import URDFError
from .voxel import DEFAULT_RESOLUTION, voxelize

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "artikit.asset/1"
INDEX_NAME = "index.json"
MANIFEST_NAME = "manifest.json"
ROUNDTRIP_ATOL = 1e-9


class DataError(Exception):
    """Bad input data; the CLI maps it to exit code 1."""


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get("ARTIKIT_THREADS")
    if raw is None or raw == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"ARTIKIT_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"ARTIKIT_THREADS must be a positive integer, got {raw!r}")
    return n


def asset_seed(seed: int, asset_id: str) -> int:
    """Per-asset seed that depends only on the run seed and the asset id, never on scheduling."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(asset_id.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class PreprocessConfig:
    resolution: int = DEFAULT_RESOLUTION
    states: int = 5
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be positive")
        if self.states < 0:
            raise ValueError("states must be >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class AssetManifest:
    """Paths are relative to the manifest's directory."""

    asset_id: str
    urdf: str
    meshes: list[str]
    K: int
    seed: int
    normalization: dict | None = None
    resolution: int | None = None
    asset_seed: int | None = None
    rest_grid: str | None = None
    states_file: str | None = None
    states: list[dict] = field(default_factory=list)
    source: str | None = None
    schema: str = MANIFEST_SCHEMA

    def to_json(self) -> str:
        return dump_json(self.__dict__)

    def write(self, directory) -> Path:
        path = Path(directory) / MANIFEST_NAME
        path.write_text(self.to_json())
        return path


@dataclass
class LoadedManifest:
    manifest: AssetManifest
    root: Path

    def path(self, rel: str) -> Path:
        return self.root / rel

    def asset(self) -> ArticulatedAsset:
        return load_asset(self.path(self.manifest.urdf))


def read_manifest(path) -> LoadedManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: cannot read manifest ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if data.get("schema") != MANIFEST_SCHEMA:
        raise DataError(f"{path}: unknown manifest schema {data.get('schema')!r}")
    try:
        manifest = AssetManifest(**data)
    except TypeError as exc:
        raise DataError(f"{path}: {exc}") from None
    loaded = LoadedManifest(manifest, path.parent)
    for rel in [manifest.urdf, *manifest.meshes]:
        if not loaded.path(rel).is_file():
            raise DataError(f"{path}: referenced file {rel} is missing")
    return loaded


def expand_manifests(paths) -> list[Path]:
    """Manifest files as given; a directory contributes its own manifest or its children's."""
    out = []
    for p in map(Path, paths):
        if p.is_dir() and not (p / MANIFEST_NAME).is_file():
            found = sorted(p.glob(f"*/{MANIFEST_NAME}"))
            if not found:
                raise DataError(f"{p}: no manifests found")
            out.extend(found)
        else:
            out.append(p)
    return out


def load_any_asset(path) -> ArticulatedAsset:
    """An asset from a manifest, a URDF file, or a directory holding either.

    A directory without a manifest must contain exactly one URDF.
    """
    path = Path(path)
    if path.is_dir() and not (path / MANIFEST_NAME).exists():
        urdfs = sorted(path.glob("*.urdf"))
        if len(urdfs) != 1:
            raise DataError(f"{path}: expected a manifest or exactly one URDF, found {len(urdfs)} URDFs")
        path = urdfs[0]
    if path.suffix == ".urdf":
        try:
            return load_asset(path)
        except (OSError, URDFError) as exc:
            raise DataError(f"{path}: {exc}") from None
    return read_manifest(path).asset()


# ---------------------------------------------------------------- preprocess


@dataclass
class AssetOutcome:
    asset_id: str
    kept: bool
    reason: str = ""


def find_bundles(input_dir) -> list[tuple[str, Path]]:
    """(asset id, URDF path) for every URDF below ``input_dir``, sorted by path.

    The id is the bundle directory's relative path, or the URDF's own relative path
    when a directory holds several URDFs.
    """
    root = Path(input_dir)
    if not root.is_dir():
        raise DataError(f"{root}: input directory does not exist")
    urdfs = sorted(root.rglob("*.urdf"))
    per_dir: dict[Path, int] = {}
    for urdf in urdfs:
        per_dir[urdf.parent] = per_dir.get(urdf.parent, 0) + 1
    bundles = []
    for urdf in urdfs:
        # a bundle directory with a single URDF is named after the directory
        rel = urdf.relative_to(root)
        if per_dir[urdf.parent] == 1 and rel.parent.parts:
            parts = rel.parent.parts
        else:
            parts = rel.with_suffix("").parts
        bundles.append(("-".join(parts), urdf))
    ids = [b[0] for b in bundles]
    if len(set(ids)) != len(ids):
        raise DataError("asset ids derived from URDF paths are not unique")
    return bundles


def _load_checked(urdf: Path) -> ArticulatedAsset:
    asset = load_asset(urdf)
    report = validate_tree(asset.tree)
    if not report.ok:
        raise InvalidTreeError(report)
    empty = [i for i, m in enumerate(asset.meshes) if m.cleaned().is_empty]
    if empty:
        raise DataError(f"links without geometry (missing part hierarchy): {empty}")
    return asset


def _embed_state(tree, meshes, cfg: PreprocessConfig, label: str) -> ArticulatedVoxelGrid:
    grid = voxelize(meshes, range(tree.K), cfg.resolution)
    try:
        return embed(tree, grid)
    except EmbeddingError as exc:
        raise DataError(f"{label}: {exc}") from None


def preprocess_asset(asset_id: str, urdf: Path, input_root: Path, out_dir: Path,
                     cfg: PreprocessConfig) -> AssetOutcome:
    try:
        raw = _load_checked(urdf)
        meshes, tf = normalize_asset(raw.meshes)
        normalized = ArticulatedAsset(meshes, scale_tree(raw.tree, tf.scale, tf.translation))
    except (OSError, URDFError, InvalidTreeError, EmptyGeometryError, DataError, ValueError) as exc:
        return AssetOutcome(asset_id, False, str(exc))

    stage = out_dir / f".{asset_id}.partial"
    final = out_dir / asset_id
    shutil.rmtree(stage, ignore_errors=True)
    try:
        urdf_path = save_asset(normalized, stage, name="asset")
        # voxelize what the written files describe, so the grids agree with the URDF exactly
        asset = load_asset(urdf_path)
        tree = asset.tree
        seed = asset_seed(cfg.seed, asset_id)
        extra = {"asset_id": asset_id, "seed": cfg.seed, "asset_seed": seed}
        rest = _embed_state(tree, asset.meshes, cfg, "rest state")
        (stage / "rest.vox").write_text(rest.to_text({**extra, "state": "rest"}))
        states = sample_states(tree, cfg.states, "random", seed) if cfg.states else []
        entries = []
        for j, state in enumerate(states, start=1):
            posed = pose_asset(asset, state)
            avg = _embed_state(tree, posed, cfg, f"state {j}")
            name = f"state_{j:02d}.vox"
            (stage / name).write_text(avg.to_text({**extra, "state": j, "q": list(state.q)}))
            entries.append({"grid": name, "q": state.to_json(tree)})
        (stage / "states.json").write_text(dump_json(
            {"seed": cfg.seed, "asset_seed": seed, "mode": "random",
             "states": [e["q"] for e in entries]}))
        manifest = AssetManifest(
            asset_id=asset_id, urdf=urdf_path.name,
            meshes=[link.mesh_ref for link in sorted(tree.links, key=lambda l: l.id)],
            K=tree.K, seed=cfg.seed, normalization=tf.to_dict(), resolution=cfg.resolution,
            asset_seed=seed, rest_grid="rest.vox", states_file="states.json", states=entries,
            source=urdf.relative_to(input_root).as_posix(),
        )
        manifest.write(stage)
    except DataError as exc:
        shutil.rmtree(stage, ignore_errors=True)
        return AssetOutcome(asset_id, False, str(exc))
    shutil.rmtree(final, ignore_errors=True)
    stage.rename(final)
    return AssetOutcome(asset_id, True)


def preprocess(input_dir, out_dir, cfg: PreprocessConfig) -> list[AssetOutcome]:
    """Normalize, voxelize and embed every bundle; writes per-asset folders plus ``index.json``."""
    input_dir, out_dir = Path(input_dir), Path(out_dir)
    bundles = find_bundles(input_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(item):
        return preprocess_asset(item[0], item[1], input_dir, out_dir, cfg)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            outcomes = list(pool.map(work, bundles))
    else:
        outcomes = [work(b) for b in bundles]
    for o in outcomes:
        if o.kept:
            log.info("kept %s", o.asset_id)
        else:
            log.warning("discarded %s: %s", o.asset_id, o.reason)
    index = {
        "seed": cfg.seed, "resolution": cfg.resolution, "states": cfg.states,
        "kept": [o.asset_id for o in outcomes if o.kept],
        "discarded": [{"asset_id": o.asset_id, "reason": o.reason} for o in outcomes if not o.kept],
    }
    (out_dir / INDEX_NAME).write_text(dump_json(index))
    return outcomes


# ---------------------------------------------------------------- roundtrip


@dataclass
class RoundtripResult:
    asset_id: str
    ok: bool
    max_dev: float = 0.0
    grids: int = 0
    message: str = ""
    parts: list[int] = field(default_factory=list)


def roundtrip_manifest(path, atol: float = ROUNDTRIP_ATOL) -> RoundtripResult:
    """Recover the tree from every complete grid of a manifest and diff it against the URDF."""
    loaded = read_manifest(path)
    m = loaded.manifest
    tree = loaded.asset().tree
    grids = ([m.rest_grid] if m.rest_grid else []) + [s["grid"] for s in m.states]
    if not grids:
        raise DataError(f"{m.asset_id}: manifest lists no voxel grids")
    worst = 0.0
    for rel in grids:
        try:
            avg, _ = ArticulatedVoxelGrid.from_text(loaded.path(rel).read_text())
        except OSError as exc:
            raise DataError(f"{m.asset_id}: cannot read {rel} ({exc.strerror})") from None
        except (ValueError, KeyError) as exc:
            raise DataError(f"{m.asset_id}: {rel}: {exc}") from None
        try:
            got = recover(avg)
        except RecoveryError as exc:
            return RoundtripResult(m.asset_id, False, message=f"{rel}: {exc}", parts=exc.parts)
        topo = tree_differences(got, tree, atol=np.inf)
        if topo:
            return RoundtripResult(m.asset_id, False, message=f"{rel}: {'; '.join(topo)}",
                                   parts=_parts_named(topo))
        by_child = {j.child: j for j in tree.joints}
        for j in got.joints:
            ref = by_child[j.child]
            a = np.array([*j.axis.pivot, *j.axis.direction, j.limits.lower, j.limits.upper])
            b = np.array([*ref.axis.pivot, *ref.axis.direction, ref.limits.lower, ref.limits.upper])
            dev = float(np.max(np.abs(a - b)))
            worst = max(worst, dev)
            if dev > atol:
                return RoundtripResult(m.asset_id, False, worst, message=(
                    f"{rel}: part {j.child} attribute deviation {dev:.3g}"), parts=[j.child])
    return RoundtripResult(m.asset_id, True, worst, len(grids))


def _parts_named(diffs: list[str]) -> list[int]:
    out = []
    for d in diffs:
        if d.startswith("part "):
            out.append(int(d.split()[1].rstrip(":")))
    return out


# ---------------------------------------------------------------- pose


def parse_state_arg(tree, text: str) -> ArticulationState:
    """A JSON object keyed by child link name, given inline or as a file path."""
    p = Path(text)
    raw = p.read_text() if p.is_file() else text
    try:
        values = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataError(f"--state: invalid JSON ({exc})") from None
    if not isinstance(values, dict):
        raise DataError("--state must be a JSON object keyed by child link name")
    try:
        return ArticulationState.from_json(tree, values)
    except (ValueError, TypeError) as exc:
        raise DataError(f"--state: {exc}") from None
