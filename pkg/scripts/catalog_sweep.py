"""Run every catalog identity over a range of seeds on each supported backend and tabulate the worst residuals."""

import argparse
import time

from kahlerlab import catalog
from kahlerlab.config import ScenarioConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--backends", default=",".join(catalog.ALL))
    ap.add_argument("--skip", default="stability_probe", help="comma separated ids to skip")
    args = ap.parse_args()

    skip = set(filter(None, args.skip.split(",")))
    failed = 0
    for backend in args.backends.split(","):
        cfg = ScenarioConfig(backend=backend)
        for ident in catalog.resolve(["all"], backend):
            if ident.id in skip:
                continue
            t0 = time.perf_counter()
            reps = [ident.run(catalog.RunContext(cfg, s)) for s in range(args.seeds)]
            ratio = max(r.linf / r.tolerance for r in reps)
            ok = all(r.passed for r in reps)
            failed += not ok
            print(f"{'ok  ' if ok else 'FAIL'} {backend:7s} {ident.id:32s} worst/tol={ratio:9.2e} "
                  f"{time.perf_counter() - t0:6.1f}s")
    print(f"{failed} identities with failures")


if __name__ == "__main__":
    main()
