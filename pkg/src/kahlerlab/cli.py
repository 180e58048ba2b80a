"""Command-line runner for identity suites, flows, geodesics and Weil-Petersson scans.

Exit codes: 0 all gates pass, 1 a gate failed, 2 configuration error,
3 numerical failure (solver breakdown, loss of positivity).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import catalog, serialization
from .calculus import SolverError
from .config import ConfigError, ScenarioConfig, load_config
from .reports import ResidualReport

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

EXPRESSION_HELP = (
    "Potential expressions combine numbers, + - * / **, parentheses, sin/cos/exp and named fields: "
    "x, y, z and Ylm on the sphere (Y20, Y2m1 for m=-1; each harmonic scaled to sup norm one), "
    "x1..x4 on tori. Example: \"0.3*Y20 + 0.05*Y31\"."
)


# ---------------------------------------------------------------------------
# argument handling


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML scenario file; flags override its values")
    p.add_argument("--backend", choices=sorted(catalog.ALL))
    p.add_argument("--resolution", "--L", dest="resolution", type=int, help="band limit of the backend")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, help="override every check tolerance")
    p.add_argument("--out", help="directory for JSON reports and CSV traces")


def _flow_flags(p: argparse.ArgumentParser):
    p.add_argument("--type", dest="flow", choices=("kr", "ding"))
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int, help="cap on accepted steps")
    p.add_argument("--target", type=float, help="stop once sup|theta - 1/V| is below this")
    p.add_argument("--h0", help="initial potential expression")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kahlerlab", description=__doc__.splitlines()[0], epilog=EXPRESSION_HELP)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run identity suites", epilog=EXPRESSION_HELP)
    _common(p)
    p.add_argument("--suite", action="append", dest="suites", metavar="NAME",
                   help="suite name or identity id; repeatable or comma separated; 'all' selects everything")
    p.add_argument("--seeds", type=int, help="number of consecutive seeds starting at --seed")

    p = sub.add_parser("flow", help="Kaehler-Ricci or Ding flow of potentials on the sphere", epilog=EXPRESSION_HELP)
    _common(p)
    _flow_flags(p)

    p = sub.add_parser("geodesic", help="geodesic between two potentials on the sphere", epilog=EXPRESSION_HELP)
    _common(p)
    p.add_argument("--h0", dest="geodesic_start", help="start potential expression (default 0)")
    p.add_argument("--h1", help="end potential expression")
    p.add_argument("--slices", type=int)

    p = sub.add_parser("wp", help="Weil-Petersson scan over constant torus structures")
    _common(p)
    p.add_argument("--scenes", type=int, default=50, help="number of random constant scenes")

    p = sub.add_parser("decompose", help="decompose a random tangent vector on a Fano sphere scene")
    _common(p)

    p = sub.add_parser("probe", help="exploratory long Kaehler-Ricci run", epilog=EXPRESSION_HELP)
    _common(p)
    _flow_flags(p)

    p = sub.add_parser("list", help="print the identity catalog")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


def _split_suites(values) -> tuple:
    out = []
    for v in values or ():
        out.extend(s.strip() for s in v.split(",") if s.strip())
    return tuple(out)


def scenario_from_args(args) -> ScenarioConfig:
    over = {k: getattr(args, k, None) for k in ("backend", "resolution", "seed", "tol", "out", "seeds", "dt",
                                                  "steps", "target", "flow", "h0", "h1", "slices",
                                                  "geodesic_start")}
    if getattr(args, "suites", None):
        over["suites"] = _split_suites(args.suites)
    if args.config:
        return load_config(args.config, **over)
    return ScenarioConfig().with_overrides(**over)


# ---------------------------------------------------------------------------
# output


class Sink:
    """Collects reports, prints one summary line each and writes JSON files when an output directory is set."""

    def __init__(self, out: str | None):
        self.out = Path(out) if out else None
        self.reports: list[ResidualReport] = []
        if self.out:
            (self.out / "reports").mkdir(parents=True, exist_ok=True)

    def add(self, rep: ResidualReport, gate: bool = True):
        rep.details.setdefault("gate", gate)
        self.reports.append(rep)
        status = "PASS" if rep.passed else ("INFO" if not gate else "FAIL")
        print(f"{status} {rep.id} seed={rep.seed} linf={rep.linf:.3e} tol={rep.tolerance:.1e}")
        if self.out:
            name = f"{rep.id}-seed{rep.seed if rep.seed is not None else 'none'}.json"
            (self.out / "reports" / name).write_text(rep.to_json() + "\n")

    def path(self, name: str) -> Path | None:
        return self.out / name if self.out else None

    def finish(self, config: ScenarioConfig) -> int:
        failed = [r for r in self.reports if r.details.get("gate", True) and not r.passed]
        if self.out:
            settings = {k: v for k, v in config.to_dict().items() if k != "out"}
            summary = {"config": settings,
                       "reports": [{"id": r.id, "seed": r.seed, "passed": r.passed, "linf": r.linf}
                                   for r in self.reports],
                       "failed": [r.id for r in failed]}
            (self.out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
        print(f"{len(self.reports) - len(failed)}/{len(self.reports)} gates passed")
        return EXIT_GATE if failed else EXIT_OK


def _require_sphere(cfg: ScenarioConfig, explicit_backend: str | None) -> ScenarioConfig:
    if explicit_backend not in (None, "sphere"):
        raise ConfigError("potentials and flows live on the sphere backend")
    return cfg.with_overrides(backend="sphere") if cfg.backend != "sphere" else cfg


# ---------------------------------------------------------------------------
# commands


def cmd_verify(cfg: ScenarioConfig, sink: Sink) -> None:
    try:
        idents = catalog.resolve(cfg.suites, cfg.backend)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    for seed in range(cfg.seed, cfg.seed + cfg.seeds):
        ctx = catalog.RunContext(cfg, seed)
        for ident in idents:
            sink.add(ident.run(ctx), gate=not ident.exploratory)


def cmd_flow(cfg: ScenarioConfig, sink: Sink) -> None:
    ctx = catalog.RunContext(cfg, cfg.seed)
    trace = catalog.flow_trace(ctx)
    if cfg.flow == "kr":
        reps = [catalog.pot.check_flow_convergence(trace, cfg.target, cfg.steps),
                catalog.pot.check_monotonicity(trace, tol=ctx.tol(1e-6))]
    else:
        reps = [catalog.pot.check_ding_flow(trace, tol=ctx.tol(1e-10))]
    for rep in reps:
        rep.seed = cfg.seed
        sink.add(rep)
    if sink.out:
        serialization.trace_csv(trace, sink.path(f"{cfg.flow}_flow_trace.csv"))
        serialization.save(sink.path(f"{cfg.flow}_flow_final.kml"), {"h_final": trace.final})


def cmd_geodesic(cfg: ScenarioConfig, sink: Sink) -> None:
    ctx = catalog.RunContext(cfg, cfg.seed)
    geo = catalog.geodesic(ctx)
    base = catalog._space(ctx.resolution)
    for rep in (catalog.pot.check_geodesic(geo, tol=ctx.tol(1e-6)),
                catalog.pot.check_mabuchi_metric(geo, tol=ctx.tol(1e-4)),
                catalog.pot.check_ding_convexity(geo, base, tol=ctx.tol(1e-6))):
        rep.seed = cfg.seed
        sink.add(rep)
    if sink.out:
        F = [catalog.pot.ding_F(h, base) for h in geo.path]
        rows = zip(geo.times.tolist(), F, list(geo.energies) + [float("nan")] * (len(F) - len(geo.energies)))
        serialization.write_table(sink.path("geodesic.csv"), ["t", "F", "speed_sq"], rows)
        serialization.save(sink.path("geodesic.kml"), {f"h{j:03d}": h for j, h in enumerate(geo.path)})


def cmd_wp(cfg: ScenarioConfig, sink: Sink, scenes: int) -> None:
    if cfg.backend not in catalog.TORI:
        raise ConfigError("the Weil-Petersson scan runs on torus2 or torus4")
    ident = catalog.BY_ID["weil_petersson_form"]
    rows = []
    for seed in range(cfg.seed, cfg.seed + scenes):
        rep = ident.run(catalog.RunContext(cfg, seed))
        sink.add(rep)
        rows.append((seed, rep.details["field"], rep.details["oracle"], rep.linf))
    if cfg.backend == "torus2":
        for name in ("weil_petersson_type", "weil_petersson_kernel", "weil_petersson_closedness"):
            sink.add(catalog.BY_ID[name].run(catalog.RunContext(cfg, cfg.seed)))
    if sink.out:
        serialization.write_table(sink.path("wp_scan.csv"), ["seed", "wp", "oracle", "residual"], rows)


def cmd_decompose(cfg: ScenarioConfig, sink: Sink) -> None:
    cfg = cfg if cfg.backend == "sphere" else cfg.with_overrides(backend="sphere")
    ctx = catalog.RunContext(cfg, cfg.seed)
    fs = catalog.fscene(ctx)
    Jh = catalog.ftangent(ctx, fs, 1)
    dec = catalog.dec.fano_decompose(Jh, fs)
    structure = catalog.dec.decomposition_checks(dec, Jh, fs, tol=ctx.tol(1e-8))
    energy = catalog.dec.energy_identity(dec, Jh, fs, tol=ctx.tol(1e-6))
    for rep in (structure, energy):
        rep.seed = cfg.seed
        sink.add(rep)
    if sink.out:
        serialization.save(sink.path("decomposition.kml"),
                           {"Jhat": Jh, "F": dec.F, "G": dec.G, "A": dec.A, "f": dec.f, "g": dec.g})


def cmd_probe(cfg: ScenarioConfig, sink: Sink) -> None:
    ctx = catalog.RunContext(cfg, cfg.seed)
    rep = catalog.BY_ID["stability_probe"].run(ctx)
    sink.add(rep, gate=False)


def cmd_list(as_json: bool) -> int:
    entries = catalog.list_suites()
    if as_json:
        print(json.dumps(entries, indent=1, sort_keys=True))
    else:
        for e in entries:
            print(f"{e['suite']:13s} {e['id']:34s} {','.join(e['backends']):22s} {e['anchor']}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list":
        return cmd_list(args.json)
    try:
        cfg = scenario_from_args(args)
        if args.command in ("flow", "geodesic", "probe"):
            cfg = _require_sphere(cfg, args.backend)
        sink = Sink(cfg.out)
        if args.command == "verify":
            cmd_verify(cfg, sink)
        elif args.command == "flow":
            cmd_flow(cfg, sink)
        elif args.command == "geodesic":
            cmd_geodesic(cfg, sink)
        elif args.command == "wp":
            cmd_wp(cfg, sink, args.scenes)
        elif args.command == "decompose":
            cmd_decompose(cfg, sink)
        elif args.command == "probe":
            cmd_probe(cfg, sink)
        return sink.finish(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ValueError, RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
