"""Embed random voxelized trees and recover them; reports failures and timing per resolution."""

import argparse
import time
from dataclasses import dataclass

import numpy as np

from artikit.embedding import embed, recover
from artikit.fixtures import random_asset
from artikit.kinematic_graph import joint_attribute_deviation, tree_differences
from artikit.voxel import voxelize


@dataclass
class SweepConfig:
    trees: int = 100
    max_parts: int = 12
    resolutions: tuple[int, ...] = (32, 64)
    seed: int = 0


def run(cfg: SweepConfig) -> dict:
    rows = {}
    for R in cfg.resolutions:
        start = time.perf_counter()
        failures, worst = [], 0.0
        for i in range(cfg.trees):
            rng = np.random.default_rng([cfg.seed, i])
            asset = random_asset(rng, int(rng.integers(1, cfg.max_parts + 1)))
            got = recover(embed(asset.tree, voxelize(asset.meshes, range(asset.K), R)))
            if tree_differences(got, asset.tree, atol=np.inf):
                failures.append(i)
                continue
            ref = {j.child: j for j in asset.tree.joints}
            for j in got.joints:
                worst = max(worst, joint_attribute_deviation(j, ref[j.child]))
        rows[R] = (cfg.trees - len(failures), worst, time.perf_counter() - start, failures)
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trees", type=int, default=SweepConfig.trees)
    p.add_argument("--resolutions", type=int, nargs="+", default=list(SweepConfig.resolutions))
    p.add_argument("--seed", type=int, default=SweepConfig.seed)
    a = p.parse_args()
    cfg = SweepConfig(trees=a.trees, resolutions=tuple(a.resolutions), seed=a.seed)
    print(f"{'R':>5} {'pass':>9} {'max dev':>10} {'seconds':>8}")
    for R, (ok, worst, secs, failures) in run(cfg).items():
        print(f"{R:>5} {ok:>4}/{cfg.trees:<4} {worst:>10.3g} {secs:>8.1f}" + (f"  failed {failures}" if failures else ""))


if __name__ == "__main__":
    main()
