"""Solve a geodesic between two potentials and print the Ding functional and speed along it."""

import argparse

import numpy as np

from kahlerlab import potentials as pot
from kahlerlab.config import parse_expression


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=16)
    ap.add_argument("--h0", default="0")
    ap.add_argument("--h1", default="0.1*Y20 + 0.05*Y31")
    ap.add_argument("--slices", type=int, default=20)
    args = ap.parse_args()

    base = pot.round_space(args.L)
    geo = pot.geodesic_solve(parse_expression(args.h0, base.geom), parse_expression(args.h1, base.geom), base,
                             slices=args.slices)
    F = np.array([pot.ding_F(h, base) for h in geo.path])
    second = np.diff(F, 2) / (geo.times[1] - geo.times[0]) ** 2
    print(f"newton iterations {geo.iterations}, interior residual {geo.residual:.2e}")
    print(f"{'t':>6s} {'F':>14s}")
    for t, f in zip(geo.times, F):
        print(f"{t:6.3f} {f:14.6e}")
    e = np.asarray(geo.energies)
    print(f"squared speed along the path: mean {e.mean():.6e}, relative spread {np.ptp(e) / e.mean():.2e}")
    print(f"min second difference of F: {second.min():.3e}")


if __name__ == "__main__":
    main()
