"""Step-halving error table for the flow integrators on dz/dt = -z over t in [0, 1]."""

import argparse
import math

import numpy as np

from artikit.fusion import integrate_flow


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--steps", type=int, nargs="+", default=[5, 10, 20, 40, 80, 160])
    a = p.parse_args()
    exact = math.exp(-1)
    print(f"{'steps':>6} {'euler err':>11} {'ratio':>6} {'heun err':>11} {'ratio':>6}")
    prev = None
    for n in a.steps:
        e = abs(integrate_flow(lambda z, t: -z, np.array([1.0]), n, "euler")[0] - exact)
        h = abs(integrate_flow(lambda z, t: -z, np.array([1.0]), n, "heun")[0] - exact)
        re = f"{prev[0] / e:6.2f}" if prev else " " * 6
        rh = f"{prev[1] / h:6.2f}" if prev else " " * 6
        print(f"{n:>6} {e:>11.3e} {re} {h:>11.3e} {rh}")
        prev = (e, h)


if __name__ == "__main__":
    main()
