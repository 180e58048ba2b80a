"""Run the Kaehler-Ricci and Ding flows from one initial potential and write both traces.

    python3 scripts/flow_comparison.py --L 16 --h0 "0.3*Y20" --out runs/flows
"""

import argparse
from pathlib import Path

from kahlerlab import potentials as pot
from kahlerlab.config import parse_expression
from kahlerlab.serialization import trace_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=16)
    ap.add_argument("--h0", default="0.3*Y20")
    ap.add_argument("--dt", type=float, default=1e-2)
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--out", default="runs/flows")
    args = ap.parse_args()

    base = pot.round_space(args.L)
    h0 = parse_expression(args.h0, base.geom)
    out = Path(args.out)
    for kind in ("kr", "ding"):
        trace = pot.run_flow(h0, base, pot.FlowConfig(kind, args.dt, args.steps))
        mono = pot.check_monotonicity(trace)
        trace_csv(trace, out / f"{kind}_trace.csv")
        print(f"{kind:4s} steps={trace.accepted_steps:5d} rejected={trace.rejected} "
              f"F: {trace.F[0]:.6e} -> {trace.F[-1]:.6e}  sup|theta-1/V|={trace.theta_sup[-1]:.2e} "
              f"monotone={mono.passed}")


if __name__ == "__main__":
    main()
