"""Sphere occupancy against the analytic volume fraction across resolutions."""

import argparse
from dataclasses import dataclass

from artikit.mesh import icosphere
from artikit.voxel import occupancy_fraction, sphere_volume_fraction, voxelize


@dataclass
class CalibrationConfig:
    radius: float = 0.4
    subdivisions: int = 5
    resolutions: tuple[int, ...] = (16, 32, 64, 128)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--radius", type=float, default=CalibrationConfig.radius)
    p.add_argument("--resolutions", type=int, nargs="+", default=list(CalibrationConfig.resolutions))
    a = p.parse_args()
    cfg = CalibrationConfig(radius=a.radius, resolutions=tuple(a.resolutions))
    sphere = icosphere((0.5, 0.5, 0.5), cfg.radius, cfg.subdivisions)
    exact = sphere_volume_fraction(cfg.radius)
    print(f"{'R':>5} {'cells':>9} {'fraction':>10} {'rel err':>9}")
    for R in cfg.resolutions:
        grid = voxelize([sphere], [0], R)
        frac = occupancy_fraction(grid)
        print(f"{R:>5} {grid.count:>9} {frac:>10.5f} {frac / exact - 1:>+9.4f}")


if __name__ == "__main__":
    main()
