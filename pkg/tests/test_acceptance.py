"""Acceptance suite: eleven criteria, one PASS/FAIL line each.

Every criterion aggregates catalog checks over seeded scenes and adds a
negative control where a corrupted input must be rejected.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from kahlerlab import catalog, identities as idn, potentials as pot, teichmueller as tm
from kahlerlab import decomposition as dec
from kahlerlab.backends import Torus
from kahlerlab.cli import main
from kahlerlab.config import ScenarioConfig, parse_expression
from kahlerlab.scenes import random_scalar, random_vector

from conftest import REQUIRED_IDS

SEEDS = range(20)


@pytest.fixture
def verdict(capsys):
    """Print one line per criterion, bypassing output capture."""

    def emit(number, ok, summary):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:2d}: {summary}")
        return ok

    return emit


def ctx(backend, seed, **kw):
    return catalog.RunContext(ScenarioConfig(backend=backend, **kw), seed)


def run(ident, backend, seeds=SEEDS, **kw):
    return [catalog.BY_ID[ident].run(ctx(backend, s, **kw)) for s in seeds]


def worst(reports):
    return max(r.linf / r.tolerance for r in reports)


def failures(reports):
    return [f"{r.id}[{r.seed}]" for r in reports if not r.passed]


def test_ricci_form_consistency(verdict):
    t0 = time.perf_counter()
    reps = run("ricci_form_routes", "torus2")
    for r in reps:
        comps = r.details["components"]
        assert r.tolerance <= 1e-9 and comps["closed"] <= 1e-9
    round_rep = catalog.BY_ID["ricci_form_routes"].run(ctx("sphere", 0))
    round_err = round_rep.details["components"]["round_sphere"]
    elapsed = time.perf_counter() - t0
    sc = catalog.scene(ctx("torus2", 0))
    control = idn.check_ricci_routes(sc.rho, sc.J * 1.05, sc.omega, tol=1e-9)
    ok = not failures(reps) and round_err <= 1e-9 and elapsed < 30 and not control.passed
    assert verdict(1, ok, f"20 torus2 scenes worst/tol={worst(reps):.2e}, round sphere |Ric-omega|={round_err:.1e}, "
                          f"{elapsed:.1f}s, corrupted-J control linf={control.linf:.1e}")


def test_lambda_calculus(verdict):
    # sphere scenes at L=32: the identity residuals there are discretization error decaying spectrally in L
    reps = []
    for b in catalog.ALL:
        kw = {"resolution": 32} if b == "sphere" else {}
        reps += run("lambda_identities", b, **kw)
        reps += run("lambda_connection_independence", b, **kw)
    assert all(r.tolerance <= 1e-7 for r in reps if r.id == "lambda_identities")
    assert all(r.tolerance <= 1e-9 for r in reps if r.id == "lambda_connection_independence")
    sc = catalog.scene(ctx("torus2", 0))
    c = ctx("torus2", 0)
    control = idn.check_lambda_identities(sc.rho, sc.J * 1.05, catalog.tangent(c, sc, 1),
                                          random_vector(sc.geom, c.rng(2), 3), tol=1e-7)
    bad = failures(reps)
    ok = not bad and not control.passed
    assert verdict(2, ok, f"{len(reps)} reports on 3 backends, worst/tol={worst(reps):.2e}, failed={bad}, "
                          f"corrupted-J control linf={control.linf:.1e}")


def test_moment_map_identities(verdict):
    groups = {"ricci torus2": run("ricci_moment_map", "torus2"),
              "pair torus4": run("pair_moment_map", "torus4"),
              "scalar sphere": run("scalar_moment_map", "sphere"),
              "scalar torus2": run("scalar_moment_map", "torus2"),
              "donaldson sphere": run("donaldson_moment_map", "sphere")}
    for r in groups["donaldson sphere"]:
        assert set(r.details["components"]) == {"form_vs_closed", "closed_vs_difference"}
    reps = [r for g in groups.values() for r in g]
    assert all(r.tolerance <= 1e-6 for r in reps)
    summary = ", ".join(f"{k} {worst(v):.1e}" for k, v in groups.items())
    assert verdict(3, not failures(reps), f"worst/tol per family: {summary}; failed={failures(reps)}")


def test_weitzenboeck_and_matsushima(verdict):
    reps = []
    for b in ("sphere", "torus2"):
        reps += run("weitzenboeck", b, range(5)) + run("matsushima", b, range(5))
    flat = catalog.standard(ctx("torus2", 0))
    r = np.random.default_rng(11)
    F, G = (random_scalar(flat.geom, r, 3) for _ in range(2))
    reps.append(idn.check_matsushima(flat.omega, flat.J, F, G, tol=1e-6))
    assert all(r.tolerance <= 1e-6 for r in reps)
    assert verdict(4, not failures(reps), f"{len(reps)} reports, worst/tol={worst(reps):.2e}")


def test_berndtsson(verdict):
    reps = run("berndtsson_gap", "sphere", range(10))
    pairs = sum(r.details["pairs"] for r in reps)
    dims = {r.details["kernel_dimension"] for r in reps}
    fgfg = run("holomorphic_pairing", "sphere", range(10))
    assert all(r.details["precondition"] for r in fgfg)
    fs = catalog._fano_scene(24, None)
    ker = catalog._kernel(24, None, 6)
    rng = np.random.default_rng(5)
    control = dec.check_berndtsson(fs, [(random_scalar(fs.geom, rng, 4), random_scalar(fs.geom, rng, 4))], ker,
                                   expected_dimension=5)
    ok = pairs >= 200 and dims == {6} and not failures(reps + fgfg) and not control.passed
    assert verdict(5, ok, f"{pairs} pairs, kernel dimension {dims}, gap worst/tol={worst(reps):.1e}, "
                          f"pairing worst/tol={worst(fgfg):.1e}, wrong-dimension control rejected={not control.passed}")


def test_donaldson_form(verdict):
    anti = run("donaldson_form", "sphere", range(5))
    nondeg = run("donaldson_nondegeneracy", "sphere", range(5))
    gram = run("donaldson_metric", "sphere", range(3))
    closed = run("donaldson_closedness", "sphere", range(2))
    assert all(r.tolerance <= 1e-10 for r in anti) and all(r.tolerance <= 1e-6 for r in nondeg)
    margin = min(r.details["min_eigenvalue"] for r in gram)
    ratios = [r.details["halving_ratio"] for r in closed]
    confirmed = all(r.details["richardson_confirmed"] for r in closed)
    fs = catalog._fano_scene(24, 0)
    d0 = catalog.ftangent(ctx("sphere", 0), fs, 1)
    from kahlerlab import fano

    control = fano.check_donaldson_metric(fs, [d0, d0 * 2.0])
    reps = anti + nondeg + gram + closed
    ok = not failures(reps) and margin > 0 and confirmed and not control.passed
    assert verdict(6, ok, f"antisymmetry {worst(anti):.1e}, nondegeneracy {worst(nondeg):.1e} (worst/tol), "
                          f"12-direction Gram min eigenvalue {margin:.2e}, halving ratios "
                          f"{', '.join(f'{x:.2f}' for x in ratios)}, dependent-direction control rejected="
                          f"{not control.passed}")


def test_theta_consistency(verdict):
    norm = run("fano_normalization", "sphere", range(5))
    for r in norm:
        assert r.details["components"]["ricci_equals_omega"] <= 1e-8
        assert r.details["components"]["unit_mass"] <= 1e-10
    base = catalog._space(24)
    rng = np.random.default_rng(7)
    routes = []
    for k in range(6):
        h = random_scalar(base.geom, rng, 2)
        h = h * (0.3 * (k + 1) / 6 / h.norm_inf())
        routes.append(pot.check_theta_routes(h, base, tol=1e-7))
    routes.append(pot.check_theta_routes(parse_expression("0.3*Y20", base.geom), base, tol=1e-7))
    reps = norm + routes
    assert verdict(7, not failures(reps), f"normalization worst/tol={worst(norm):.1e}, theta two routes "
                                          f"worst/tol={worst(routes):.1e} for sup|h| up to 0.3")


def test_flows(verdict):
    t0 = time.perf_counter()
    c = ctx("sphere", 0, resolution=16, h0="0.3*Y20", dt=1e-2, steps=5000, target=1e-6)
    trace = catalog.flow_trace(c, "kr")
    conv = pot.check_flow_convergence(trace, 1e-6, 5000)
    mono = pot.check_monotonicity(trace, tol=1e-6)
    ding = catalog.BY_ID["ding_flow"].run(c)
    elapsed = time.perf_counter() - t0
    flipped = pot.FlowTrace("kr", times=trace.times, F=trace.F[::-1], I=trace.I[::-1], H=trace.H[::-1],
                            theta_sup=trace.theta_sup, dt=trace.dt, energy=trace.energy[::-1])
    control = pot.check_monotonicity(flipped, tol=1e-6)
    ok = conv.passed and mono.passed and ding.passed and elapsed < 300 and not control.passed
    assert verdict(8, ok, f"KR flow {trace.accepted_steps} steps to sup|theta-1/V|={trace.theta_sup[-1]:.1e}, "
                          f"monotonicity worst/tol={mono.linf / mono.tolerance:.1e}, Ding flow passed={ding.passed}, "
                          f"{elapsed:.0f}s, reversed-trace control rejected={not control.passed}")


def test_geodesics_and_convexity(verdict):
    base = catalog._space(24)
    geos = [catalog.geodesic(ctx("sphere", 0))]
    rng = np.random.default_rng(9)
    for _ in range(2):
        h0, h1 = (random_scalar(base.geom, rng, 2) for _ in range(2))
        geos.append(pot.geodesic_solve(h0 * (0.1 / h0.norm_inf()), h1 * (0.1 / h1.norm_inf()), base, slices=20))
    reps = []
    for g in geos:
        reps += [pot.check_geodesic(g, tol=1e-6), pot.check_ding_convexity(g, base, tol=1e-6)]
        assert g.endpoint_error == 0
    # same residual on the straight line between the endpoints: it must be visibly nonzero
    g = geos[0]
    straight = [g.path[0] * (1 - t) + g.path[-1] * t for t in g.times]
    dt = g.times[1] - g.times[0]
    solved = max(r.norm_inf() for r in pot.geodesic_residual_nodes(g.path, dt, base))
    line = max(r.norm_inf() for r in pot.geodesic_residual_nodes(straight, dt, base))
    ok = not failures(reps) and line > 1e3 * solved
    assert verdict(9, ok, f"{len(geos)} geodesics of amplitude 0.1, worst/tol={worst(reps):.1e}, "
                          f"pointwise residual {solved:.1e} against {line:.1e} on the straight line")


def test_weil_petersson(verdict):
    oracle = run("weil_petersson_form", "torus2", range(50))
    witness = oracle[0].details["oracle"]
    assert witness == pytest.approx(-(2 * np.pi) ** 2, rel=1e-14)
    closed = run("weil_petersson_closedness", "torus2", range(3))
    kernel = run("weil_petersson_kernel", "torus2", range(5))
    wtype = run("weil_petersson_type", "torus2", range(5))
    assert all(r.tolerance <= 1e-10 for r in oracle + wtype) and all(r.tolerance <= 1e-9 for r in kernel)
    ratios = [r.details["halving_ratio"] for r in closed]
    J, J1, J2 = tm.WITNESS
    swapped = tm.wp_matrix_oracle(J, J2, J1, Torus(1, 4).volume)
    control_ok = abs(oracle[0].details["field"] - swapped) > 1.0
    reps = oracle + closed + kernel + wtype
    ok = not failures(reps) and all(r.details["richardson_confirmed"] for r in closed) and control_ok
    assert verdict(10, ok, f"50 constant scenes worst/tol={worst(oracle):.1e} (witness {witness:.6f}), "
                           f"closedness halving ratios {', '.join(f'{x:.2f}' for x in ratios)}, "
                           f"kernel {worst(kernel):.1e}, type {worst(wtype):.1e}")


def _reports(out):
    return {p.name: p.read_bytes() for p in sorted((out / "reports").iterdir())}


def test_determinism_and_coverage(verdict, tmp_path):
    runs = {}
    for tag in ("a", "b"):
        main(["verify", "--suite", "ricci,lambda", "--backend", "torus2", "--seed", "42",
              "--out", str(tmp_path / tag)])
        main(["verify", "--suite", "fano_decomposition,donaldson_form", "--backend", "sphere", "--seed", "3",
              "--out", str(tmp_path / tag / "sphere")])
        runs[tag] = _reports(tmp_path / tag) | {"s/" + k: v for k, v in _reports(tmp_path / tag / "sphere").items()}
    threaded = {}
    for threads in ("1", "3"):
        out = tmp_path / f"threads{threads}"
        env = dict(os.environ, OMP_NUM_THREADS=threads, OPENBLAS_NUM_THREADS=threads)
        subprocess.run([sys.executable, "-m", "kahlerlab.cli", "verify", "--suite", "ricci", "--seed", "42",
                        "--out", str(out)], env=env, check=True, capture_output=True)
        threaded[threads] = _reports(out)
    listed = {e["id"] for e in catalog.list_suites()}
    missing = sorted(set(REQUIRED_IDS) - listed)
    identical = runs["a"] == runs["b"] and threaded["1"] == threaded["3"]
    same_as_inprocess = all(threaded["1"][k] == runs["a"][k] for k in threaded["1"])
    ok = identical and same_as_inprocess and not missing and len(runs["a"]) > 0
    assert verdict(11, ok, f"{len(runs['a'])} reports byte-identical across runs and thread counts={identical}, "
                           f"{len(REQUIRED_IDS)} required ids, missing={missing}")
