"""``artikit`` command line: preprocess, roundtrip, eval, retrieve, pose, validate.

Exit codes: 0 success, 1 data or validation error, 2 usage error. Logs go to stderr;
machine-readable output goes to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .asset import save_asset
from .kinematic_graph import validate_tree
from .kinematics import LimitError, fraction_state, pose_asset
from .mesh import write_obj
from .metrics import DEFAULT_POINTS, DEFAULT_STATES, eval_protocol
from .pipeline import (
    ROUNDTRIP_ATOL,
    AssetManifest,
    DataError,
    PreprocessConfig,
    dump_json,
    expand_manifests,
    load_any_asset,
    parse_state_arg,
    preprocess,
    roundtrip_manifest,
    workers_from_env,
)
from .render import Camera, rasterize
from .retrieval import PartProposal, PartRepository, RetrievalMiss, assemble, retrieve_part
from .urdf import URDFError, parse_urdf
from .voxel import DEFAULT_RESOLUTION

log = logging.getLogger("artikit")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _camera_arg(text: str) -> tuple[float, float]:
    try:
        az, el = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AZ,EL in degrees, got {text!r}") from None
    return az, el


def _seed_arg(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _camera(args) -> Camera:
    if args.camera is None:
        return Camera()
    az, el = args.camera
    return Camera(azimuth=az, elevation=el)


def _workers(args) -> int:
    try:
        cap = workers_from_env(default=0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    n = args.workers if args.workers is not None else (cap or 1)
    return min(n, cap) if cap else n


# ---------------------------------------------------------------- commands


def cmd_preprocess(args) -> int:
    cfg = PreprocessConfig(args.resolution, args.states, args.seed, _workers(args))
    outcomes = preprocess(args.input, args.out, cfg)
    kept = sum(o.kept for o in outcomes)
    print(f"kept {kept} / discarded {len(outcomes) - kept}")
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    paths = expand_manifests(args.manifests)
    failed = 0
    worst = 0.0
    for path in paths:
        res = roundtrip_manifest(path, atol=args.atol)
        if res.ok:
            worst = max(worst, res.max_dev)
            print(f"{res.asset_id}: topology exact, max attr dev {res.max_dev:.3g} "
                  f"(<= {args.atol:g}) over {res.grids} grids")
        else:
            failed += 1
            parts = ", ".join(str(p) for p in res.parts) or "?"
            print(f"{res.asset_id}: FAIL (part {parts}): {res.message}")
            log.error("%s: round trip failed for part %s", res.asset_id, parts)
    passed = len(paths) - failed
    if failed:
        print(f"{passed}/{len(paths)} pass")
    else:
        print(f"{passed}/{len(paths)} pass; topology exact, max attr dev {worst:.3g} <= {args.atol:g}")
    return EXIT_OK if not failed else EXIT_DATA


def cmd_eval(args) -> int:
    gen = load_any_asset(args.gen)
    gt = load_any_asset(args.gt)
    camera = _camera(args)
    report = eval_protocol(gen, gt, states=args.states, points=args.points, seed=args.seed,
                           camera=camera, keep_renders=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    for label, frac, img_gen, img_gt in report.renders:
        stem = "rs" if label == "RS" else f"as_{round(frac * args.states):02d}"
        for tag, img in (("gen", img_gen), ("gt", img_gt)):
            img.write_ppm(out / f"{stem}_{tag}.ppm")
            if args.png:
                img.write_png(out / f"{stem}_{tag}.png")
    print(report.table())
    return EXIT_OK


def _read_json(path, what: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"{path}: cannot read {what} ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON in {what} ({exc})") from None


def _proposals(path, tree) -> list[PartProposal]:
    """JSON list with one ``{link, center, extents, label}`` object per tree link."""
    items = _read_json(path, "proposals")
    names = {l.name: l.id for l in tree.links}
    by_link: dict[int, PartProposal] = {}
    for item in items:
        try:
            link = item["link"]
            lid = names[link] if isinstance(link, str) else int(link)
            by_link[lid] = PartProposal(item["center"], item["extents"], item["label"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad proposal {item!r} ({exc})") from None
    missing = sorted(set(range(tree.K)) - set(by_link))
    if missing or len(by_link) != tree.K:
        raise DataError(f"{path}: proposals must cover every link once; missing {missing}")
    return [by_link[i] for i in range(tree.K)]


def cmd_retrieve(args) -> int:
    try:
        repo = PartRepository.from_manifest(args.repo)
    except OSError as exc:
        raise DataError(f"{args.repo}: cannot read repository ({exc})") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{args.repo}: bad repository manifest ({exc})") from None
    try:
        tree = parse_urdf(Path(args.tree).read_text())
    except OSError as exc:
        raise DataError(f"{args.tree}: {exc.strerror}") from None
    if len(repo) == 0:
        raise DataError(f"{args.repo}: repository is empty")
    proposals = _proposals(args.proposals, tree)
    chosen, misses, entries = [], [], []
    for link_id, prop in enumerate(proposals):
        try:
            idx, d = retrieve_part(repo, prop)
        except RetrievalMiss as exc:
            misses.append(link_id)
            log.error("link %d: %s", link_id, exc)
            continue
        chosen.append((idx, prop))
        entries.append({"link": link_id, "label": prop.label, "entry": idx,
                        "mesh_path": repo.entries[idx].path, "d_size": d})
    if misses:
        print(f"retrieval miss for {len(misses)} of {tree.K} links: {misses}; assembly refused")
        return EXIT_DATA
    asset = assemble(chosen, tree, repo)
    out = Path(args.out)
    urdf_path = save_asset(asset, out, name="asset")
    (out / "retrieval_log.json").write_text(dump_json({"seed": args.seed, "parts": entries}))
    links = sorted(asset.tree.links, key=lambda l: l.id)
    AssetManifest(asset_id=out.name or "retrieved", urdf=urdf_path.name,
                  meshes=[f"meshes/part_{l.id:02d}.obj" for l in links],
                  K=asset.K, seed=args.seed).write(out)
    for e in entries:
        print(f"link {e['link']}: entry {e['entry']} ({e['label']}) d_size {e['d_size']:.6g}")
    return EXIT_OK


def cmd_pose(args) -> int:
    asset = load_any_asset(args.manifest)
    if args.state is not None:
        state = parse_state_arg(asset.tree, args.state)
    else:
        if not 0.0 <= args.fraction <= 1.0:
            raise DataError(f"--fraction {args.fraction} outside [0, 1]")
        state = fraction_state(asset.tree, args.fraction)
    try:
        posed = pose_asset(asset, state)
    except LimitError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, mesh in enumerate(posed):
        write_obj(out / f"part_{i:02d}.obj", mesh)
    (out / "state.json").write_text(dump_json({"fraction": args.fraction if args.state is None else None,
                                               "q": state.to_json(asset.tree), "seed": args.seed}))
    img = rasterize(posed, camera=_camera(args))
    img.write_ppm(out / "render.ppm")
    if args.png:
        img.write_png(out / "render.png")
    print(f"posed {len(posed)} parts -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    bad = 0
    for path in args.urdf:
        try:
            tree = parse_urdf(Path(path).read_text())
        except OSError as exc:
            print(f"{path}: unreadable ({exc.strerror})")
            bad += 1
            continue
        except URDFError as exc:
            print(f"{path}: invalid: {exc}")
            bad += 1
            continue
        report = validate_tree(tree)
        print(f"{path}: {'valid' if report.ok else 'invalid: ' + str(report)} (K={tree.K})")
        bad += not report.ok
    return EXIT_OK if not bad else EXIT_DATA


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed_arg, default=0, help="RNG seed (default 0)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="errors only")

    render = argparse.ArgumentParser(add_help=False)
    render.add_argument("--camera", type=_camera_arg, default=None, metavar="AZ,EL",
                        help="camera azimuth,elevation in degrees (default 30,20)")
    render.add_argument("--png", action="store_true", help="also write PNG images (needs Pillow)")

    p = argparse.ArgumentParser(prog="artikit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("preprocess", parents=[common], help="normalize, voxelize and embed a corpus")
    s.add_argument("input", help="directory of URDF + OBJ bundles")
    s.add_argument("--out", required=True)
    s.add_argument("--resolution", type=_positive, default=DEFAULT_RESOLUTION)
    s.add_argument("--states", type=_count, default=5, help="random articulated states per asset")
    s.add_argument("--workers", type=_positive, default=None,
                   help="worker threads (capped by ARTIKIT_THREADS)")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("roundtrip", parents=[common], help="recover trees from embedded grids")
    s.add_argument("manifests", nargs="+", help="manifest files or preprocess output directories")
    s.add_argument("--atol", type=float, default=ROUNDTRIP_ATOL)
    s.set_defaults(func=cmd_roundtrip)

    s = sub.add_parser("eval", parents=[common, render], help="RS/AS Chamfer and PSNR")
    s.add_argument("gen")
    s.add_argument("gt")
    s.add_argument("--out", required=True)
    s.add_argument("--states", type=_positive, default=DEFAULT_STATES)
    s.add_argument("--points", type=_positive, default=DEFAULT_POINTS)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("retrieve", parents=[common], help="box-similarity retrieval baseline")
    s.add_argument("repo", help="repository manifest (JSON list of {mesh_path, label})")
    s.add_argument("proposals", help="JSON list of {link, center, extents, label}")
    s.add_argument("tree", help="URDF supplying the kinematic tree")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_retrieve)

    s = sub.add_parser("pose", parents=[common, render], help="pose an asset and render it")
    s.add_argument("manifest", help="manifest, asset directory or URDF")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--fraction", type=float, help="global fraction s of every joint range")
    g.add_argument("--state", help="JSON object (or file) of joint values keyed by child link")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pose)

    s = sub.add_parser("validate", parents=[common], help="parse and validate URDF files")
    s.add_argument("urdf", nargs="+")
    s.set_defaults(func=cmd_validate)
    return p


def _setup_logging(args) -> None:
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("artikit")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args)
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, URDFError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
