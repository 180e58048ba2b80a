"""Registry of every verifiable identity with a seeded runner.

Each entry has a stable id, a one-line anchor describing the statement it
checks, a suite name and the backends it runs on. A runner receives a
``RunContext`` and returns one ``ResidualReport`` whose id is the entry id.
"""

from __future__ import annotations

import difflib
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import decomposition as dec
from . import fano, identities as idn, potentials as pot, teichmueller as tm
from .backends import Torus, make_backend
from .calculus import contract, d, lie_derivative, liouville, standard_J, standard_omega
from .config import ScenarioConfig, parse_expression
from .fields import EndoField, Scene, ScalarField
from .curvature import Lambda_rho
from .reports import ResidualReport, combine, relative
from .scenes import (
    SceneConfig,
    anticommuting_part,
    random_endo,
    random_form,
    random_perturbation,
    random_scalar,
    random_scene,
    random_vector,
)

ALL = ("torus2", "torus4", "sphere")
TORI = ("torus2", "torus4")
SURFACES = ("torus2", "sphere")


@dataclass(frozen=True)
class RunContext:
    config: ScenarioConfig
    seed: int

    @property
    def backend(self) -> str:
        return self.config.backend

    @property
    def resolution(self) -> int:
        return self.config.effective_resolution

    def tol(self, default: float) -> float:
        return self.config.tol if self.config.tol is not None else default

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([int(self.seed), int(salt)]))


@dataclass(frozen=True)
class Identity:
    id: str
    anchor: str
    suite: str
    backends: tuple
    runner: Callable[[RunContext], ResidualReport] = field(repr=False)
    exploratory: bool = False

    def run(self, ctx: RunContext) -> ResidualReport:
        if ctx.backend not in self.backends:
            raise ValueError(f"identity '{self.id}' does not run on backend '{ctx.backend}'")
        t0 = time.perf_counter()
        rep = self.runner(ctx)
        rep.id = self.id
        rep.seed = ctx.seed
        rep.runtime = time.perf_counter() - t0
        return rep


# ---------------------------------------------------------------------------
# scenes

_BANDS = {"torus2": 3, "torus4": 1, "sphere": 2}


def scene_config(ctx: RunContext, **kw) -> SceneConfig:
    b = ctx.backend
    base = dict(backend=b, resolution=ctx.resolution, band=_BANDS[b],
                structure_amp=0.1 if b == "torus4" else 0.2, volume_amp=0.2 if b == "torus4" else 0.3)
    base.update(kw)
    return SceneConfig(**base)


@lru_cache(maxsize=16)
def _random_scene(cfg: SceneConfig, seed: int) -> Scene:
    return random_scene(cfg, seed)


def scene(ctx: RunContext, **kw) -> Scene:
    return _random_scene(scene_config(ctx, **kw), ctx.seed)


@lru_cache(maxsize=8)
def _standard(backend: str, resolution: int) -> Scene:
    g = make_backend(backend, resolution)
    om = standard_omega(g)
    return Scene(g, om, standard_J(g), liouville(om))


def standard(ctx: RunContext) -> Scene:
    return _standard(ctx.backend, ctx.resolution)


def _band(ctx) -> int:
    return _BANDS[ctx.backend]


def tangent(ctx, sc: Scene, salt: int, symmetric: bool = False, amp: float = 0.3) -> EndoField:
    return random_perturbation(sc.omega, sc.J, ctx.rng(salt), _band(ctx), amp, symmetric=symmetric)


# ---------------------------------------------------------------------------
# Ricci form and Lambda


def _run_pairing(ctx):
    sc = scene(ctx)
    return idn.check_omega_rho_pairing(sc.rho, sc.J, tangent(ctx, sc, 1), tangent(ctx, sc, 2), tol=ctx.tol(1e-12))


def _run_ricci_routes(ctx):
    sc = scene(ctx)
    return idn.check_ricci_routes(sc.rho, sc.J, sc.omega, tol=ctx.tol(1e-8 if ctx.backend == "sphere" else 1e-9))


def _run_ricci_equivariance(ctx):
    sc = scene(ctx)
    b = ctx.rng(3).uniform(0, 2 * np.pi, 2)
    return tm.check_ricci_equivariance(sc.rho, sc.J, tm.SHEAR, tuple(b), tol=ctx.tol(1e-9))


def _alpha(ctx, sc, salt):
    return random_form(sc.geom, sc.geom.dim - 2, ctx.rng(salt), _band(ctx), 1.0)


def _run_ricci_moment(ctx):
    sc = scene(ctx)
    return idn.check_ricci_moment(sc.rho, sc.J, tangent(ctx, sc, 1), _alpha(ctx, sc, 2), tol=ctx.tol(1e-6),
                                  h=ctx.config.fd_step)


def _run_connection_independence(ctx):
    sc = scene(ctx)
    return idn.check_connection_independence(sc.rho, sc.J, tangent(ctx, sc, 1), extra_seed=ctx.seed,
                                             tol=ctx.tol(1e-9))


def _run_lambda_identities(ctx):
    sc = scene(ctx)
    v = random_vector(sc.geom, ctx.rng(2), _band(ctx))
    return idn.check_lambda_identities(sc.rho, sc.J, tangent(ctx, sc, 1), v, tol=ctx.tol(1e-7), h=ctx.config.fd_step)


def _run_lambda_weak(ctx):
    sc = standard(ctx)
    v = random_vector(sc.geom, ctx.rng(2), _band(ctx))
    return idn.check_lambda_weak(sc.omega, sc.J, tangent(ctx, sc, 1), v, tol=ctx.tol(1e-8))


# ---------------------------------------------------------------------------
# pairs with fixed volume


def _run_trautwein(ctx):
    sc = scene(ctx, volume="liouville", compatible=False)
    g = sc.geom
    mu1, mu2 = (random_form(g, 1, ctx.rng(s), _band(ctx), 0.3) for s in (1, 2))
    return idn.check_trautwein_form(sc.omega, mu1, mu2, random_scalar(g, ctx.rng(3), _band(ctx)), tol=ctx.tol(1e-9))


def _run_product_form(ctx):
    sc = scene(ctx, volume="liouville", compatible=False)
    g = sc.geom
    mu1, mu2 = (random_form(g, 1, ctx.rng(s), _band(ctx), 0.3) for s in (1, 2))
    return idn.check_product_form(sc.omega, sc.J, mu1, mu2, tangent(ctx, sc, 3), tangent(ctx, sc, 4),
                                  ctx.config.hbar, tol=ctx.tol(1e-9))


def _run_pair_moment(ctx):
    sc = scene(ctx, volume="liouville", compatible=False)
    g = sc.geom
    lam = idn.volume_preserving_potential(random_form(g, 1, ctx.rng(1), _band(ctx), 0.3), sc.omega)
    return idn.check_se_moment(sc.omega, sc.J, lam, tangent(ctx, sc, 2, amp=0.1), _alpha(ctx, sc, 3),
                               ctx.config.hbar, tol=ctx.tol(1e-6), h=ctx.config.fd_step)


def _run_tangency(ctx):
    sc = scene(ctx, volume="liouville")
    X = random_vector(sc.geom, ctx.rng(1), _band(ctx))
    return idn.check_tangency_compatible(sc.omega, sc.J, d(contract(X, sc.omega)), lie_derivative(X, sc.J),
                                         tol=ctx.tol(1e-8))


def _run_weitzenboeck(ctx):
    sc = standard(ctx)
    X = random_vector(sc.geom, ctx.rng(1), _band(ctx))
    return idn.check_weitzenboeck(sc.omega, sc.J, X, tol=ctx.tol(1e-6))


# ---------------------------------------------------------------------------
# scalar curvature


def _compatible_scene(ctx):
    return scene(ctx, volume="liouville")


def _run_structure_form(ctx):
    sc = _compatible_scene(ctx)
    H = random_scalar(sc.geom, ctx.rng(3), _band(ctx))
    return idn.check_structure_form(sc.omega, sc.J, tangent(ctx, sc, 1, True), tangent(ctx, sc, 2, True), H,
                                    tol=ctx.tol(1e-7))


def _run_scalar_total(ctx):
    sc = _compatible_scene(ctx)
    return idn.check_scalar_total(sc.omega, sc.J, tol=ctx.tol(1e-9))


def _run_scalar_moment(ctx):
    sc = _compatible_scene(ctx)
    H = random_scalar(sc.geom, ctx.rng(2), _band(ctx))
    return idn.check_scalar_moment(sc.omega, sc.J, tangent(ctx, sc, 1, True), H, tol=ctx.tol(1e-6),
                                   h=ctx.config.fd_step)


def _run_scalar_routes(ctx):
    sc = _compatible_scene(ctx)
    F = random_scalar(sc.geom, ctx.rng(1), _band(ctx))
    return idn.check_scalar_operator_routes(sc.omega, sc.J, F, tol=ctx.tol(1e-6), h=ctx.config.fd_step)


def _run_scalar_pairing(ctx):
    sc = _compatible_scene(ctx)
    F, G = (random_scalar(sc.geom, ctx.rng(s), _band(ctx)) for s in (1, 2))
    return idn.check_LS2(sc.omega, sc.J, F, G, tol=ctx.tol(1e-6), h=ctx.config.fd_step)


def _run_harmonic(ctx):
    sc = _compatible_scene(ctx)
    return idn.check_harmonic_representative(sc.omega, sc.J, tangent(ctx, sc, 1, True), tol=ctx.tol(1e-6),
                                             h=ctx.config.fd_step)


def _run_matsushima(ctx):
    sc = _compatible_scene(ctx)
    F, G = (random_scalar(sc.geom, ctx.rng(s), _band(ctx)) for s in (1, 2))
    return idn.check_matsushima(sc.omega, sc.J, F, G, tol=ctx.tol(1e-6), h=ctx.config.fd_step)


# ---------------------------------------------------------------------------
# Teichmueller space of the torus and the Kaehler-Einstein formula


def _run_cy_volume(ctx):
    sc = _compatible_scene(ctx)
    return tm.check_cy_volume(sc.J, sc.omega, tol=ctx.tol(1e-9))


def _run_torus_split(ctx):
    sc = _compatible_scene(ctx)
    return tm.check_torus_lambda_split(sc.J, tangent(ctx, sc, 1, True), sc.omega, tol=ctx.tol(1e-9))


def _run_wp_oracle(ctx):
    rng = ctx.rng(1)
    n = 1 if ctx.backend == "torus2" else 2
    if ctx.seed == 0 and n == 1:
        J, J1, J2 = tm.WITNESS
    else:
        J = tm.random_constant_structure(rng, n)
        J1, J2 = tm.random_constant_tangent(J, rng), tm.random_constant_tangent(J, rng)
    return tm.check_wp_oracle(J, J1, J2, Torus(n, 4), tol=ctx.tol(1e-10))


def _run_wp_type(ctx):
    sc = _compatible_scene(ctx)
    return tm.check_wp_type(sc.J, tangent(ctx, sc, 1, True), tangent(ctx, sc, 2, True), sc.omega, tol=ctx.tol(1e-10))


def _run_wp_closed(ctx):
    g = Torus(1, 16)
    rng = ctx.rng(1)
    tau0 = complex(rng.uniform(-0.4, 0.4), rng.uniform(0.9, 1.4))
    direction = random_endo(g, rng, 2, 0.3)
    rep = tm.wp_closedness_check(tm.tau_family(tau0, direction, g), step=0.02, tol=ctx.tol(1e-6))
    if not rep.details["richardson_confirmed"]:
        rep.passed = False
    return rep


def _run_wp_kernel(ctx):
    sc = _compatible_scene(ctx)
    X = random_vector(sc.geom, ctx.rng(2), _band(ctx))
    return tm.check_wp_gauge_kernel(sc.J, tangent(ctx, sc, 1, True), X, sc.omega, tol=ctx.tol(1e-9))


def _run_dolbeault(ctx):
    g = make_backend("torus4", ctx.resolution)
    J = EndoField.constant(g, tm.random_constant_structure(ctx.rng(1), 2))
    X = random_vector(g, ctx.rng(2), 1)
    generic = anticommuting_part(J, random_endo(g, ctx.rng(3), 1, 0.3))
    return tm.check_dolbeault(J, X, generic, tol=ctx.tol(1e-7), h=ctx.config.fd_step)


def _round_tangents(ctx, k=2):
    sc = standard(ctx)
    return sc, [tangent(ctx, sc, s, True) for s in range(1, k + 1)]


def _run_ke_decomposition(ctx):
    sc, (Jh,) = _round_tangents(ctx, 1)
    fs = _fano_scene(ctx.resolution, None)
    d1 = dec.ke_decompose(Jh, sc.omega, sc.J, ctx.config.hbar)
    rep = dec.decomposition_checks(d1, Jh, fs, tol=ctx.tol(1e-8))
    lam = Lambda_rho(sc.J, Jh, fs.rho_J)
    formula = dec.ke_lambda_formula(d1.F, d1.G, sc.omega, sc.J, ctx.config.hbar, d1.X)
    parts = dict(rep.details["components"], lambda_formula=relative((lam - formula).norm_inf(), lam.norm_inf()))
    return combine("ke_decomposition", parts, rep.tolerance)


def _run_wp_ke(ctx):
    sc, (J1, J2) = _round_tangents(ctx)
    return tm.check_wp_ke(sc.J, J1, J2, ctx.config.hbar, sc.omega, tol=ctx.tol(1e-9))


def _run_wp_ke_lambda(ctx):
    sc, (J1, J2) = _round_tangents(ctx)
    H1, H2 = (random_scalar(sc.geom, ctx.rng(s), _band(ctx)) for s in (5, 6))
    A1 = dec.ke_decompose(J1, sc.omega, sc.J, ctx.config.hbar).A
    A2 = dec.ke_decompose(J2, sc.omega, sc.J, ctx.config.hbar).A
    K1 = tm.hamiltonian_gauge(sc.J, H1, sc.omega) + A1
    K2 = tm.hamiltonian_gauge(sc.J, H2, sc.omega) + A2
    return tm.check_wp_ke(sc.J, K1, K2, ctx.config.hbar, sc.omega, tol=ctx.tol(1e-9), require_lambda=True)


# ---------------------------------------------------------------------------
# Fano-normalized structures on the sphere


@lru_cache(maxsize=8)
def _fano_scene(resolution: int, seed: int | None) -> fano.FanoScene:
    """Round structure for seed None, otherwise a seeded compatible perturbation."""
    base = _standard("sphere", resolution)
    om = base.omega
    J = base.J if seed is None else fano.sphere_perturbation(om, seed)
    return fano.solve_theta(J, om)


def fscene(ctx) -> fano.FanoScene:
    return _fano_scene(ctx.resolution, ctx.seed)


def ftangent(ctx, fs, salt, amp=0.2) -> EndoField:
    return random_perturbation(fs.omega, fs.J, ctx.rng(salt), 2, amp)


@lru_cache(maxsize=8)
def _kernel(resolution: int, seed: int | None, band: int) -> dec.KernelResult:
    return dec.holomorphic_kernel(_fano_scene(resolution, seed), band=band)


def _run_fano_normalization(ctx):
    return fano.check_fano_normalization(fscene(ctx), tol=ctx.tol(1e-8))


def _run_theta_potential(ctx):
    return fano.check_theta_potential(_fano_scene(ctx.resolution, None), fscene(ctx), tol=ctx.tol(1e-8))


def _run_fano_split(ctx):
    fs = fscene(ctx)
    return fano.check_fano_split(fs, ftangent(ctx, fs, 1), tol=ctx.tol(1e-8))


def _run_donaldson_form(ctx):
    fs = fscene(ctx)
    return fano.check_donaldson_antisymmetry(fs, ftangent(ctx, fs, 1), ftangent(ctx, fs, 2), tol=ctx.tol(1e-10))


def _run_donaldson_metric(ctx):
    fs = fscene(ctx)
    return fano.check_donaldson_metric(fs, [ftangent(ctx, fs, 10 + k) for k in range(12)], tol=ctx.tol(1e-9))


def _run_don_moment(ctx):
    fs = fscene(ctx)
    H = random_scalar(fs.geom, ctx.rng(2), 2)
    return fano.check_don_moment(fs, ftangent(ctx, fs, 1), H, tol=ctx.tol(1e-6), h=ctx.config.fd_step)


def _run_operators(ctx):
    fs = fscene(ctx)
    F, G = (random_scalar(fs.geom, ctx.rng(s), 4) for s in (1, 2))
    return fano.check_operator_adjointness(fs, F, G, tol=ctx.tol(1e-9))


def _run_theta_variation(ctx):
    fs = fscene(ctx)
    return fano.check_theta_hat(fs, ftangent(ctx, fs, 1), tol=ctx.tol(1e-6), h=ctx.config.fd_step)


def _run_fano_decomposition(ctx):
    fs = fscene(ctx)
    Jh = ftangent(ctx, fs, 1)
    return dec.decomposition_checks(dec.fano_decompose(Jh, fs), Jh, fs, tol=ctx.tol(1e-8))


def _run_berndtsson(ctx):
    fs = _fano_scene(ctx.resolution, None)
    ker = _kernel(ctx.resolution, None, 6)
    rng = ctx.rng(1)
    pairs = [(random_scalar(fs.geom, rng, 4), random_scalar(fs.geom, rng, 4)) for _ in range(20)]
    return dec.check_berndtsson(fs, pairs, ker, expected_dimension=6, tol=ctx.tol(1e-8))


def _run_holomorphic_pairing(ctx):
    fs = _fano_scene(ctx.resolution, None)
    ker = _kernel(ctx.resolution, None, 6)
    rng = ctx.rng(1)
    i, j = rng.choice(ker.dimension, 2)
    (F, G), (Fh, Gh) = ker.pairs[i], ker.pairs[j]
    rep = dec.check_fgfg(F, G, Fh, Gh, fs, tol=ctx.tol(1e-7))
    if not rep.details["precondition"]:
        rep.passed = False
    return rep


def _run_nondegeneracy(ctx):
    fs = fscene(ctx)
    Jh = ftangent(ctx, fs, 1)
    return dec.energy_identity(dec.fano_decompose(Jh, fs), Jh, fs, tol=ctx.tol(1e-6))


def _run_closedness(ctx):
    fs = fscene(ctx)
    dirs = [random_perturbation(fs.omega, fs.J, ctx.rng(s), 2, 1.0) for s in (1, 2, 3)]
    rep = fano.check_dsymp_closed(fs.J, dirs, fs.omega, step=0.02, tol=ctx.tol(1e-6))
    if not rep.details["richardson_confirmed"]:
        rep.passed = False
    return rep


def _run_equivariance(ctx):
    g = make_backend("sphere", ctx.resolution)
    om = standard_omega(g)
    J = fano.sphere_perturbation(om, ctx.seed)
    H = random_scalar(g, ctx.rng(1), 2, 1.0)
    return fano.check_equivariance(J, H, 0.3, steps=32, tol=ctx.tol(1e-6))


def _run_gradient(kind):
    def run(ctx):
        fs = fscene(ctx)
        return fano.check_gradient(fs, ftangent(ctx, fs, 1), kind, tol=ctx.tol(1e-6), h=ctx.config.fd_step)

    return run


# ---------------------------------------------------------------------------
# potentials, geodesics and flows on the round sphere


@lru_cache(maxsize=4)
def _space(resolution: int) -> pot.PotentialSpace:
    return pot.round_space(resolution)


def potential(ctx, salt: int, amp: float = 0.1) -> ScalarField:
    base = _space(ctx.resolution)
    return random_scalar(base.geom, ctx.rng(salt), 2, amp)


def _run_kahler_potential(ctx):
    return pot.check_kahler_potential(potential(ctx, 1, 0.3), _space(ctx.resolution), tol=ctx.tol(1e-9))


@lru_cache(maxsize=4)
def _geodesic(resolution: int, h0: str, h1: str, slices: int, maxiter: int) -> pot.GeodesicResult:
    base = _space(resolution)
    return pot.geodesic_solve(parse_expression(h0, base.geom), parse_expression(h1, base.geom), base,
                              slices=slices, maxiter=maxiter)


def geodesic(ctx) -> pot.GeodesicResult:
    c = ctx.config
    return _geodesic(ctx.resolution, c.geodesic_start, c.h1, c.slices, c.maxiter)


def _run_mabuchi_metric(ctx):
    return pot.check_mabuchi_metric(geodesic(ctx), tol=ctx.tol(1e-4))


def _run_geodesic(ctx):
    return pot.check_geodesic(geodesic(ctx), tol=ctx.tol(1e-6))


def _run_ding_convexity(ctx):
    return pot.check_ding_convexity(geodesic(ctx), _space(ctx.resolution), tol=ctx.tol(1e-6))


def _run_mabuchi_paths(ctx):
    base = _space(ctx.resolution)
    return pot.check_mabuchi_paths(potential(ctx, 1, 0.2), potential(ctx, 2, 0.1), base, tol=ctx.tol(1e-6))


def _run_ding_gradient(ctx):
    base = _space(ctx.resolution)
    return pot.check_ding_gradient(potential(ctx, 1, 0.2), potential(ctx, 2, 1.0), base, tol=ctx.tol(1e-6))


def _run_theta_routes(ctx):
    return pot.check_theta_routes(potential(ctx, 1, 0.3), _space(ctx.resolution), tol=ctx.tol(1e-7))


def _run_entropy(ctx):
    return pot.check_entropy_routes(potential(ctx, 1, 0.3), _space(ctx.resolution), tol=ctx.tol(1e-10))


@lru_cache(maxsize=4)
def _flow(resolution: int, kind: str, h0: str, dt: float, steps: int, target: float) -> pot.FlowTrace:
    base = _space(resolution)
    return pot.run_flow(parse_expression(h0, base.geom), base, pot.FlowConfig(kind, dt, steps, target))


def flow_trace(ctx, kind: str | None = None) -> pot.FlowTrace:
    c = ctx.config
    kind = kind or c.flow
    steps = c.steps if kind == "kr" else min(c.steps, 500)
    return _flow(ctx.resolution, kind, c.h0, c.dt, steps, c.target)


def _run_kr_flow(ctx):
    return pot.check_flow_convergence(flow_trace(ctx, "kr"), ctx.config.target, ctx.config.steps)


def _run_ding_flow(ctx):
    return pot.check_ding_flow(flow_trace(ctx, "ding"), tol=ctx.tol(1e-10))


def _run_monotonicity(ctx):
    return pot.check_monotonicity(flow_trace(ctx, "kr"), tol=ctx.tol(1e-6))


def _run_probe(ctx):
    base = _space(ctx.resolution)
    c = ctx.config
    return pot.check_stability_probe(parse_expression(c.h0, base.geom), base, c.dt, min(c.steps, 2000),
                                     tol=ctx.tol(1e-8))


# ---------------------------------------------------------------------------
# the registry

_S = ("sphere",)
_T2 = ("torus2",)

CATALOG: tuple[Identity, ...] = (
    # ricci
    Identity("symplectic_pairing", "trace pairing on the tangent space of almost complex structures with a volume form",
             "ricci", ALL, _run_pairing),
    Identity("ricci_form_routes", "Ricci form of a volume form and J; conformal change of the volume; round sphere",
             "ricci", ALL, _run_ricci_routes),
    Identity("ricci_equivariance", "naturality of the Ricci form under diffeomorphisms", "ricci", _T2,
             _run_ricci_equivariance),
    Identity("ricci_moment_map", "twice the Ricci form is a moment map for volume-preserving diffeomorphisms",
             "ricci", SURFACES, _run_ricci_moment),
    Identity("lambda_connection_independence", "Lambda does not depend on the torsion-free volume connection",
             "lambda", ALL, _run_connection_independence),
    Identity("lambda_identities", "d Lambda = 2 Ric-hat, its integrated form, and Lambda along Lie derivatives",
             "lambda", ALL, _run_lambda_identities),
    Identity("lambda_weak_form", "weak form of Lambda through the dbar operator on vector fields", "lambda", ALL,
             _run_lambda_weak),
    # pairs
    Identity("pair_symplectic_form", "form on symplectic forms of fixed volume via normalized primitives",
             "pairs", TORI, _run_trautwein),
    Identity("pair_product_form", "product symplectic form on pairs (omega, J)", "pairs", TORI, _run_product_form),
    Identity("pair_moment_map", "moment map 2(Ric - omega/hbar) on pairs with fixed volume", "pairs", TORI,
             _run_pair_moment),
    Identity("compatible_tangency", "tangent vectors to compatible pairs satisfy the linearized compatibility",
             "pairs", ALL, _run_tangency),
    Identity("weitzenboeck", "Weitzenboeck formula for the symmetric part of L_X J", "pairs", ALL, _run_weitzenboeck),
    # scalar
    Identity("structure_symplectic_form", "pairing on compatible structures and its metric", "scalar", ALL,
             _run_structure_form),
    Identity("scalar_curvature_total", "scalar curvature, its total integral and the mean value c_omega",
             "scalar", ALL, _run_scalar_total),
    Identity("scalar_moment_map", "scalar curvature as a moment map for Hamiltonian diffeomorphisms", "scalar",
             SURFACES, _run_scalar_moment),
    Identity("scalar_operator_routes", "operator L as the derivative of scalar curvature along J L_v J", "scalar",
             SURFACES, _run_scalar_routes),
    Identity("scalar_operator_pairing", "L is symmetric and given by the trace pairing of L_v J", "scalar",
             SURFACES, _run_scalar_pairing),
    Identity("harmonic_representative", "Hamiltonian correction making a tangent vector harmonic", "scalar",
             SURFACES, _run_harmonic),
    Identity("matsushima", "bracket pairing and derivative of scalar curvature along L_v J", "scalar", SURFACES,
             _run_matsushima),
    # teichmueller
    Identity("calabi_yau_volume", "Ricci-flat volume form of a complex structure with c_1 = 0", "teichmueller",
             _T2, _run_cy_volume),
    Identity("lambda_split", "split of Lambda into -df o J + dg + harmonic", "teichmueller", _T2, _run_torus_split),
    Identity("weil_petersson_form", "Weil-Petersson form against the constant-coefficient formula", "teichmueller",
             TORI, _run_wp_oracle),
    Identity("weil_petersson_type", "Weil-Petersson form is antisymmetric and of type (1,1)", "teichmueller", _T2,
             _run_wp_type),
    Identity("weil_petersson_closedness", "closedness of the Weil-Petersson form over a tau family",
             "teichmueller", _T2, _run_wp_closed),
    Identity("weil_petersson_kernel", "Lie derivatives of J are null directions of the Weil-Petersson form",
             "teichmueller", _T2, _run_wp_kernel),
    Identity("dolbeault_consistency", "dbar squared vanishes: linearized Nijenhuis tensor on L_X J", "teichmueller",
             ("torus4",), _run_dolbeault),
    Identity("ke_decomposition", "Hodge-type decomposition of a tangent vector on a Kaehler-Einstein background",
             "teichmueller", _S, _run_ke_decomposition),
    Identity("weil_petersson_ke", "Weil-Petersson form on a Kaehler-Einstein background via the decomposition",
             "teichmueller", _S, _run_wp_ke),
    Identity("weil_petersson_ke_lambda", "Kaehler-Einstein Weil-Petersson form through Lambda", "teichmueller",
             _S, _run_wp_ke_lambda),
    # fano
    Identity("fano_normalization", "volume rho_J with Ric(rho_J, J) = omega and unit mass", "fano", _S,
             _run_fano_normalization),
    Identity("theta_potential", "density ratio theta is constant exactly for Kaehler-Einstein structures", "fano",
             _S, _run_theta_potential),
    Identity("fano_lambda_split", "split of Lambda(J, Jhat) into f and g for rho_J", "fano", _S, _run_fano_split),
    Identity("donaldson_form", "symplectic form on compatible complex structures", "fano", _S,
             _run_donaldson_form),
    Identity("donaldson_metric", "metric from the symplectic form and Jhat -> -J Jhat is positive definite",
             "fano", _S, _run_donaldson_metric),
    Identity("donaldson_moment_map", "moment map 2(rho/V - rho_J): form, closed formula and finite difference",
             "fano", _S, _run_don_moment),
    Identity("operators_L_B", "L symmetric and B antisymmetric for the rho_J inner product", "fano", _S,
             _run_operators),
    Identity("theta_variation", "derivative of theta along Jhat equals f theta", "fano", _S, _run_theta_variation),
    Identity("fano_decomposition", "decomposition Jhat = gauge part + A with Lambda(J, A) = 0", "fano", _S,
             _run_fano_decomposition),
    Identity("berndtsson_gap", "Berndtsson inequality and its equality case on the holomorphic kernel", "fano",
             _S, _run_berndtsson),
    Identity("holomorphic_pairing", "pairing identity for holomorphic potentials", "fano", _S,
             _run_holomorphic_pairing),
    Identity("donaldson_nondegeneracy", "energy split of a tangent vector: A part plus twice the gap", "fano", _S,
             _run_nondegeneracy),
    Identity("donaldson_closedness", "closedness of the symplectic form by differences on a family", "fano", _S,
             _run_closedness),
    Identity("theta_equivariance", "theta transforms naturally under Hamiltonian diffeomorphisms", "fano", _S,
             _run_equivariance),
    Identity("gradient_energy", "gradient of the energy 1/2 int (1/V - theta)^2 rho", "fano", _S,
             _run_gradient("energy")),
    Identity("gradient_entropy", "gradient of the entropy int log(V theta) theta rho", "fano", _S,
             _run_gradient("entropy")),
    # potentials
    Identity("kahler_potential", "omega_h is the Ricci form of e^h rho_J and is positive", "potentials", _S,
             _run_kahler_potential),
    Identity("mabuchi_metric", "constant speed of geodesics in the Mabuchi metric", "potentials", _S,
             _run_mabuchi_metric),
    Identity("monge_ampere_geodesic", "geodesic equation for Kaehler potentials", "potentials", _S,
             _run_geodesic),
    Identity("mabuchi_functional", "path independence of the integrated Mabuchi 1-form", "potentials", _S,
             _run_mabuchi_paths),
    Identity("ding_gradient", "differential of the Ding functional", "potentials", _S, _run_ding_gradient),
    Identity("theta_potential_routes", "theta_h through e^h rho_J and through the Hessian determinant",
             "potentials", _S, _run_theta_routes),
    Identity("ding_convexity", "convexity of the Ding functional along geodesics", "potentials", _S,
             _run_ding_convexity),
    Identity("entropy_potential", "entropy of theta_h and its form through the convex function B", "potentials",
             _S, _run_entropy),
    # flows
    Identity("kr_flow", "Kaehler-Ricci flow of potentials converges to the Einstein metric", "flows", _S,
             _run_kr_flow),
    Identity("ding_flow", "Ding flow decreases the Ding functional", "flows", _S, _run_ding_flow),
    Identity("flow_monotonicity", "entropy non-increasing and dF/dt <= -H along the Kaehler-Ricci flow", "flows",
             _S, _run_monotonicity),
    Identity("stability_probe", "infimum of the theta energy and lower bound of F along a long run", "flows", _S,
             _run_probe, exploratory=True),
)

BY_ID = {ident.id: ident for ident in CATALOG}
SUITES = tuple(dict.fromkeys(ident.suite for ident in CATALOG))


def list_suites() -> list[dict]:
    """Every identity with its anchor, suite and backends, in a stable order."""
    return [{"id": i.id, "anchor": i.anchor, "suite": i.suite, "backends": list(i.backends),
             "exploratory": i.exploratory} for i in CATALOG]


def suggest(name: str) -> str | None:
    matches = difflib.get_close_matches(name, list(SUITES) + list(BY_ID), n=1, cutoff=0.5)
    return matches[0] if matches else None


def resolve(names, backend: str) -> list[Identity]:
    """Identities selected by suite names or ids, restricted to ``backend``, ordered by id."""
    chosen = {}
    for name in names:
        if name == "all":
            members = CATALOG
        elif name in SUITES:
            members = [i for i in CATALOG if i.suite == name]
        elif name in BY_ID:
            members = [BY_ID[name]]
        else:
            hint = suggest(name)
            raise KeyError(f"unknown suite '{name}'" + (f"; did you mean '{hint}'?" if hint else ""))
        for ident in members:
            if backend in ident.backends:
                chosen[ident.id] = ident
    return [chosen[k] for k in sorted(chosen)]
