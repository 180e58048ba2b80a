"""Kaehler potentials on a Fano background: deformed forms, the Ding, Mabuchi and He
functionals, Monge-Ampere geodesics and the Ding and Kaehler-Ricci flows."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse.linalg

from .calculus import (
    cov_ref,
    covector_norm_sq,
    d,
    density,
    endo_identity,
    integrate,
    integrate_density,
    liouville,
    metric_matrix,
    one_form_circ,
    tangent_det,
    volume_form,
)
from .curvature import c_omega, scalar_curvature
from .fields import EndoField, FormField, ScalarField, _min_tangent_eig, as_endo
from .reports import ResidualReport, combine, relative

GAUSS_NODES = 8


class PositivityError(ValueError):
    """omega_h fails to be positive on J-lines at some nodes."""

    def __init__(self, nodes: np.ndarray, min_value: float):
        self.nodes = nodes
        self.min_value = min_value
        super().__init__(f"omega_h not positive at {len(nodes)} nodes (min {min_value:.3e})")


@dataclass(frozen=True, eq=False)
class PotentialSpace:
    """Base data (omega, J, rho_J) for potentials; theta_J = rho_J / (omega^n/n!)."""

    omega: FormField
    J: EndoField
    theta_J: ScalarField
    volume: float

    @classmethod
    def from_fano(cls, scene) -> "PotentialSpace":
        return cls(scene.omega, as_endo(scene.J), scene.theta, scene.volume)

    @property
    def geom(self):
        return self.omega.geom

    @property
    def rho(self) -> FormField:
        return liouville(self.omega)

    @property
    def rho_J(self) -> FormField:
        return volume_form(self.theta_J * density(self.rho))

    def potential(self, values) -> "KahlerPotential":
        vals = values.values if isinstance(values, ScalarField) else np.asarray(values, dtype=float)
        return KahlerPotential(ScalarField(self.geom, np.broadcast_to(vals, self.geom.shape).copy()), self)

    def zero(self) -> "KahlerPotential":
        return self.potential(np.zeros(self.geom.shape))


def round_space(resolution: int = 24) -> PotentialSpace:
    from .backends import Sphere
    from .calculus import standard_J, standard_omega

    geom = Sphere(resolution)
    omega = standard_omega(geom)
    V = integrate(liouville(omega))
    return PotentialSpace(omega, standard_J(geom), ScalarField.constant(geom, 1.0 / V), V)


@dataclass(frozen=True, eq=False)
class KahlerPotential:
    h: ScalarField
    base: PotentialSpace

    @property
    def omega_h(self) -> FormField:
        return omega_h(self.h, self.base)

    @property
    def rho_h(self) -> FormField:
        return rho_h(self.h, self.base)

    def validate(self) -> "KahlerPotential":
        check_positive(self.h, self.base)
        return self


def omega_h(h: ScalarField, base: PotentialSpace) -> FormField:
    """omega + 1/2 d(dh o J)."""
    return base.omega + d(one_form_circ(d(h), base.J)) * 0.5


def check_positive(h: ScalarField, base: PotentialSpace) -> float:
    G = metric_matrix(omega_h(h, base), base.J)
    lam = _min_tangent_eig(h.geom, G)
    bad = np.argwhere(lam <= 0)
    if bad.size:
        raise PositivityError(bad, float(lam.min()))
    return float(lam.min())


def rho_h(h: ScalarField, base: PotentialSpace) -> FormField:
    return liouville(omega_h(h, base))


def theta_h(h: ScalarField, base: PotentialSpace) -> ScalarField:
    """e^h rho_J / (rho_h int e^h rho_J)."""
    e = h.apply(np.exp)
    Z = integrate_density(e, base.rho_J)
    return e * base.theta_J * density(base.rho) / (density(rho_h(h, base)) * Z)


def hessian_endo(h: ScalarField) -> EndoField:
    """Covariant Hessian of h for the reference metric, as an endomorphism."""
    g = h.geom
    H = cov_ref(g, g.grad(h.values), 1)  # [k, i] = nabla_k d_i h
    return EndoField(g, 0.5 * (H + np.swapaxes(H, 0, 1)))


def _require_reference_metric(base: PotentialSpace):
    g = base.geom
    ident = endo_identity(g).comps
    if np.max(np.abs(metric_matrix(base.omega, base.J) - ident)) > 1e-10:
        raise NotImplementedError("the determinant route needs omega(., J.) to be the reference metric")


def theta_h_determinant(h: ScalarField, base: PotentialSpace) -> ScalarField:
    """(int e^h rho_J)^{-1} e^h theta_J det(1 - Hess/2 + J Hess J/2)^{-1/2}."""
    _require_reference_metric(base)
    g = h.geom
    Hs = hessian_endo(h)
    J = base.J
    M = endo_identity(g) - Hs * 0.5 + (J @ Hs @ J) * 0.5
    det = tangent_det(g, M.comps)
    if np.any(det <= 0):
        raise PositivityError(np.argwhere(det <= 0), float(det.min()))
    e = h.apply(np.exp)
    Z = integrate_density(e, base.rho_J)
    return e * base.theta_J * ScalarField(g, det ** -0.5) / Z


def check_theta_routes(h: ScalarField, base: PotentialSpace, tol: float = 1e-7) -> ResidualReport:
    a, b = theta_h(h, base), theta_h_determinant(h, base)
    r = relative((a - b).norm_inf(), a.norm_inf())
    return ResidualReport("theta_potential_routes", r, relative((a - b).norm_l2(), a.norm_l2()), tol,
                          details={"mass": integrate(volume_form(a * density(rho_h(h, base))))})


# ---------------------------------------------------------------------------
# functionals


def _gauss(n: int = GAUSS_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def functional_I(h: ScalarField, base: PotentialSpace, nodes: int = GAUSS_NODES) -> float:
    """int_0^1 (1/V) int h rho_{th} dt."""
    ts, ws = _gauss(nodes)
    return sum(w * integrate_density(h, rho_h(h * t, base)) for t, w in zip(ts, ws)) / base.volume


def ding_F(h: ScalarField, base: PotentialSpace) -> float:
    return functional_I(h, base) - math.log(integrate_density(h.apply(np.exp), base.rho_J))


def ding_differential(h: ScalarField, hhat: ScalarField, base: PotentialSpace) -> float:
    """int hhat (1/V - theta_h) rho_h."""
    return integrate_density(hhat * (1.0 / base.volume - theta_h(h, base)), rho_h(h, base))


def check_ding_gradient(h: ScalarField, hhat: ScalarField, base: PotentialSpace, tol: float = 1e-6,
                        step: float = 1e-3) -> ResidualReport:
    from .curvature import central_difference

    fd, spread = central_difference(lambda t: ding_F(h + hhat * t, base), step)
    exact = ding_differential(h, hhat, base)
    scale = integrate_density(hhat.apply(np.abs), rho_h(h, base)) / base.volume
    r = relative(fd - exact, scale)
    return ResidualReport("ding_gradient", r, r, tol, details={"difference": fd, "formula": exact,
                                                              "fd_spread": abs(spread)})


def mabuchi_differential(h: ScalarField, hhat: ScalarField, base: PotentialSpace) -> float:
    """int (S_{omega_h} - c_omega) hhat rho_h."""
    om = omega_h(h, base)
    S = scalar_curvature(om, base.J)
    return integrate_density((S - c_omega(base.omega, base.J)) * hhat, liouville(om))


def mabuchi_functional(h: ScalarField, base: PotentialSpace, bend: ScalarField | None = None,
                       nodes: int = 12) -> float:
    """Integral of the Mabuchi 1-form along t h + t(1-t) bend (straight when bend is None)."""
    ts, ws = _gauss(nodes)
    total = 0.0
    for t, w in zip(ts, ws):
        pos, vel = h * t, h
        if bend is not None:
            pos = pos + bend * (t * (1 - t))
            vel = vel + bend * (1 - 2 * t)
        total += w * mabuchi_differential(pos, vel, base)
    return total


def check_mabuchi_paths(h: ScalarField, bend: ScalarField, base: PotentialSpace, tol: float = 1e-6,
                        nodes: int = 12) -> ResidualReport:
    a = mabuchi_functional(h, base, None, nodes)
    b = mabuchi_functional(h, base, bend, nodes)
    ts, ws = _gauss(nodes)
    scale = max(sum(w * abs(mabuchi_differential(h * t, h, base)) for t, w in zip(ts, ws)), 1e-300)
    r = relative(a - b, scale)
    return ResidualReport("mabuchi_path_independence", r, r, tol, details={"straight": a, "bent": b})


def b_function(x, V: float):
    """x log(V x) + 1/V - x."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("B is defined for positive arguments")
    return x * np.log(V * x) + 1.0 / V - x


def he_H_J(h: ScalarField, base: PotentialSpace) -> float:
    """int log(V theta_h) theta_h rho_h."""
    th = theta_h(h, base)
    return integrate_density((th * base.volume).apply(np.log) * th, rho_h(h, base))


def he_H_J_via_B(h: ScalarField, base: PotentialSpace) -> float:
    th = theta_h(h, base)
    return integrate_density(th.apply(lambda x: b_function(x, base.volume)), rho_h(h, base))


def theta_energy(h: ScalarField, base: PotentialSpace) -> float:
    """int (1/V - theta_h)^2 rho_h."""
    dev = theta_h(h, base) - 1.0 / base.volume
    return integrate_density(dev * dev, rho_h(h, base))


# ---------------------------------------------------------------------------
# geodesics


@dataclass
class GeodesicResult:
    times: np.ndarray
    path: list  # ScalarField per time node
    residual: float  # max over interior nodes of the pointwise equation residual
    galerkin_residual: float
    endpoint_error: float
    iterations: int
    energies: np.ndarray = field(default_factory=lambda: np.zeros(0))


def geodesic_residual_nodes(path, dt: float, base: PotentialSpace) -> list[ScalarField]:
    """d_tt h + 1/2 |d d_t h|_h^2 at interior nodes (central differences in time)."""
    out = []
    for j in range(1, len(path) - 1):
        acc = (path[j + 1] - path[j] * 2.0 + path[j - 1]) * (1.0 / dt**2)
        vel = (path[j + 1] - path[j - 1]) * (1.0 / (2 * dt))
        out.append(acc + covector_norm_sq(d(vel), omega_h(path[j], base), base.J) * 0.5)
    return out


def geodesic_solve(h0: ScalarField, h1: ScalarField, base: PotentialSpace, slices: int = 20,
                   amplitude_guard: float = 0.3, tol: float = 1e-11, maxiter: int = 60) -> GeodesicResult:
    """Discrete Monge-Ampere geodesic by damped Newton-Krylov on the interior nodes.

    Unknowns live in the backend's solver space (coefficients on the sphere,
    grid values on the torus); the time-second-difference operator is inverted
    exactly as preconditioner.
    """
    g = h0.geom
    if max(h0.norm_inf(), h1.norm_inf()) > amplitude_guard:
        raise ValueError(f"endpoint amplitude exceeds the smooth-geodesic guard {amplitude_guard}")
    check_positive(h0, base)
    check_positive(h1, base)
    m = slices
    dt = 1.0 / m
    v0, v1 = g.to_vec(h0.values), g.to_vec(h1.values)
    nv = v0.size
    ts = np.linspace(0.0, 1.0, m + 1)

    def assemble(x):
        X = x.reshape(m - 1, nv)
        return [v0] + list(X) + [v1]

    def residual(x):
        vecs = assemble(x)
        path = [ScalarField(g, g.from_vec(v)) for v in vecs]
        res = geodesic_residual_nodes(path, dt, base)
        return np.concatenate([g.to_vec(r.values) for r in res])

    # tridiagonal second difference with Dirichlet ends
    main = np.full(m - 1, -2.0 / dt**2)
    off = np.full(m - 2, 1.0 / dt**2)
    D2 = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    D2inv = np.linalg.inv(D2)

    def precond(r):
        return (D2inv @ r.reshape(m - 1, nv)).ravel()

    M = scipy.sparse.linalg.LinearOperator(((m - 1) * nv,) * 2, matvec=precond)
    x0 = np.concatenate([(1 - t) * v0 + t * v1 for t in ts[1:-1]])
    counter = {"n": 0}

    def cb(*_):
        counter["n"] += 1

    rnorm = np.max(np.abs(residual(x0)))
    if rnorm <= tol:
        x = x0
    else:
        x = scipy.optimize.newton_krylov(residual, x0, inner_M=M, f_tol=tol, maxiter=maxiter,
                                         line_search="armijo", callback=cb)
    vecs = assemble(x)
    path = [h0] + [ScalarField(g, g.from_vec(v)) for v in vecs[1:-1]] + [h1]
    for p in path:
        check_positive(p, base)
    res_nodes = geodesic_residual_nodes(path, dt, base)
    pointwise = max((r.norm_inf() for r in res_nodes), default=0.0)
    galerkin = float(np.max(np.abs(residual(x)))) if m > 1 else 0.0
    endpoint = max((path[0] - h0).norm_inf(), (path[-1] - h1).norm_inf())
    speeds = [(path[j + 1] - path[j - 1]) * (1 / (2 * dt)) for j in range(1, m)]
    energies = np.array([integrate_density(v * v, rho_h(path[j + 1], base)) for j, v in enumerate(speeds)])
    return GeodesicResult(ts, path, pointwise, galerkin, endpoint, counter["n"], energies)


def check_ding_convexity(geo: GeodesicResult, base: PotentialSpace, tol: float = 1e-6) -> ResidualReport:
    vals = np.array([ding_F(p, base) for p in geo.path])
    dt = geo.times[1] - geo.times[0]
    second = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / dt**2
    # F is dimensionless and O(1) for admissible potentials, so the bound is absolute
    worst = max(0.0, -float(second.min())) if second.size else 0.0
    return ResidualReport("ding_convexity", worst, worst, tol,
                          details={"second_differences": second, "values": vals})


# ---------------------------------------------------------------------------
# flows


@dataclass
class FlowConfig:
    kind: str = "kr"  # "kr" or "ding"
    dt: float = 1e-2
    steps: int = 5000
    target: float = 1e-6  # stop once sup |theta - 1/V| is below this
    max_halvings: int = 20
    snapshot_every: int = 0


@dataclass
class FlowTrace:
    kind: str
    times: list = field(default_factory=list)
    F: list = field(default_factory=list)
    I: list = field(default_factory=list)
    H: list = field(default_factory=list)
    theta_sup: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    monotone_F: list = field(default_factory=list)
    monotone_H: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    rejected: int = 0
    converged: bool = False
    final: ScalarField | None = None

    @property
    def accepted_steps(self) -> int:
        return max(len(self.times) - 1, 0)

    def rows(self):
        for k in range(len(self.times)):
            yield {"t": self.times[k], "F": self.F[k], "H": self.H[k], "theta_sup": self.theta_sup[k],
                   "dt": self.dt[k]}


def _flow_rhs(h: ScalarField, base: PotentialSpace, kind: str) -> ScalarField:
    th = theta_h(h, base)
    if kind == "kr":
        return (th * base.volume).apply(np.log)
    if kind == "ding":
        return th - 1.0 / base.volume
    raise ValueError(f"unknown flow '{kind}'")


def _record(trace: FlowTrace, t: float, h: ScalarField, base: PotentialSpace, dt: float):
    I = functional_I(h, base)
    F = I - math.log(integrate_density(h.apply(np.exp), base.rho_J))
    th = theta_h(h, base)
    rh = rho_h(h, base)
    dev = th - 1.0 / base.volume
    H = integrate_density((th * base.volume).apply(np.log) * th, rh)
    if trace.F:
        trace.monotone_F.append(F <= trace.F[-1])
        trace.monotone_H.append(H <= trace.H[-1])
    trace.times.append(t)
    trace.F.append(F)
    trace.I.append(I)
    trace.H.append(H)
    trace.theta_sup.append(dev.norm_inf())
    trace.dt.append(dt)
    trace.energy.append(integrate_density(dev * dev, rh))


def run_flow(h0: ScalarField, base: PotentialSpace, cfg: FlowConfig) -> FlowTrace:
    """Semi-implicit stepping; the linearized Laplacian part c Delta/2 is implicit.

    c = 1 for the Kaehler-Ricci flow and 1/V for the Ding flow. A step that
    loses positivity of omega_h is rejected and retried with half the step.
    """
    g = h0.geom
    check_positive(h0, base)
    c = 1.0 if cfg.kind == "kr" else 1.0 / base.volume
    trace = FlowTrace(cfg.kind)
    h, t, dt = h0, 0.0, cfg.dt
    _record(trace, t, h, base, dt)
    for step in range(cfg.steps):
        if trace.theta_sup[-1] <= cfg.target:
            trace.converged = True
            break
        rhs = _flow_rhs(h, base, cfg.kind)
        for _ in range(cfg.max_halvings + 1):
            lin = ScalarField(g, g.laplacian(h.values)) * (0.5 * c)
            explicit = h + (rhs + lin) * dt
            new = ScalarField(g, g.spectral_apply(explicit.values, lambda l, s=dt: 1.0 / (1.0 + 0.5 * c * s * l)))
            try:
                check_positive(new, base)
                break
            except ValueError:
                trace.rejected += 1
                dt *= 0.5
        else:
            raise RuntimeError("flow step rejected after the maximal number of halvings")
        h, t = new, t + dt
        _record(trace, t, h, base, dt)
        if cfg.snapshot_every and step % cfg.snapshot_every == 0:
            trace.snapshots.append((t, h.values.copy()))
    else:
        trace.converged = trace.theta_sup[-1] <= cfg.target
    trace.final = h
    return trace


def kr_flow(h0: ScalarField, base: PotentialSpace, dt: float = 1e-2, steps: int = 5000,
            target: float = 1e-6) -> FlowTrace:
    return run_flow(h0, base, FlowConfig("kr", dt, steps, target))


def ding_flow(h0: ScalarField, base: PotentialSpace, dt: float = 1e-2, steps: int = 500,
              target: float = 1e-6) -> FlowTrace:
    return run_flow(h0, base, FlowConfig("ding", dt, steps, target))


def check_monotonicity(trace: FlowTrace, tol: float = 1e-6) -> ResidualReport:
    """Discrete Lyapunov inequalities along a flow trace.

    H_{k+1} - H_k <= tol * scale and F_{k+1} - F_k <= -dt (H_k + H_{k+1})/2 + tol * scale * dt;
    the worst violation (in units of scale) is reported.
    """
    F, H, ts = np.asarray(trace.F), np.asarray(trace.H), np.asarray(trace.times)
    scale = max(np.max(np.abs(F)) if F.size else 0.0, np.max(np.abs(H)) if H.size else 0.0, 1e-12)
    if F.size < 2:
        return ResidualReport("flow_monotonicity", 0.0, 0.0, tol, details={"steps": 0})
    dts = np.diff(ts)
    h_excess = np.diff(H) / scale
    f_excess = (np.diff(F) + dts * 0.5 * (H[1:] + H[:-1])) / (dts * scale)
    f_increase = np.diff(F) / scale
    if trace.kind == "kr":
        parts = {"entropy_increase": float(max(h_excess.max(), 0.0)),
                 "ding_decay": float(max(f_excess.max(), 0.0))}
        bad = np.flatnonzero((h_excess > tol) | (f_excess > tol))
    else:
        parts = {"ding_increase": float(max(f_increase.max(), 0.0))}
        bad = np.flatnonzero(f_increase > tol)
    first_bad = int(bad[0]) if bad.size else None
    return combine("flow_monotonicity", parts, tol, details={"first_violation": first_bad,
                                                              "steps": int(F.size - 1), "scale": scale})


def stability_probe(h0: ScalarField, base: PotentialSpace, dt: float = 1e-2, steps: int = 2000) -> dict:
    """Exploratory: running minima of the theta energy and of F along a long KR run."""
    trace = run_flow(h0, base, FlowConfig("kr", dt, steps, target=0.0))
    energy = np.asarray(trace.energy)
    F = np.asarray(trace.F)
    return {"steps": trace.accepted_steps, "energy_inf": float(energy.min()),
            "energy_final": float(energy[-1]), "F_running_min": np.minimum.accumulate(F).tolist()[-1],
            "F_min": float(F.min()), "F_final": float(F[-1]), "rejected": trace.rejected}


# ---------------------------------------------------------------------------
# further checks


def check_kahler_potential(h: ScalarField, base: PotentialSpace, tol: float = 1e-9) -> ResidualReport:
    """omega_h is the Ricci form of e^h rho_J (conformal route), has the class of omega and is positive."""
    from .calculus import volume_form as vol
    from .curvature import ricci_form

    om = omega_h(h, base)
    ric = ricci_form(vol(h.apply(np.exp) * density(base.rho_J)), base.J)
    margin = check_positive(h, base)
    parts = {"ricci_route": relative((ric - om).norm_inf(), om.norm_inf()),
             "class": relative(integrate(om) - integrate(base.omega), integrate(base.rho))}
    return combine("kahler_potential", parts, tol, details={"positivity_margin": margin})


def check_mabuchi_metric(geo: GeodesicResult, tol: float = 1e-4) -> ResidualReport:
    """Speed of a geodesic in the Mabuchi metric is constant; the spread is O(dt^2)."""
    e = np.asarray(geo.energies)
    spread = float(np.ptp(e) / max(np.mean(e), 1e-300)) if e.size else 0.0
    return ResidualReport("mabuchi_metric", spread, spread, tol,
                          details={"energies": e, "positive": bool(np.all(e > 0))})


def check_geodesic(geo: GeodesicResult, tol: float = 1e-6) -> ResidualReport:
    scale = max(max(p.norm_inf() for p in geo.path), 1e-300)
    parts = {"interior": geo.residual, "endpoints": geo.endpoint_error / scale}
    return combine("monge_ampere_geodesic", parts, tol,
                   details={"galerkin_residual": geo.galerkin_residual, "newton_iterations": geo.iterations,
                            "slices": len(geo.times) - 1})


def check_entropy_routes(h: ScalarField, base: PotentialSpace, tol: float = 1e-10, step: float = 1e-4) -> ResidualReport:
    """The entropy through theta log(V theta) and through the convex function B, with B'(x) = log(V x)."""
    from .curvature import central_difference

    a, b = he_H_J(h, base), he_H_J_via_B(h, base)
    th = theta_h(h, base).values
    V = base.volume
    fd, _ = central_difference(lambda t: b_function(th + t, V), step)
    deriv = relative(float(np.max(np.abs(fd - np.log(V * th)))), float(np.max(np.abs(np.log(V * th)))) + 1.0)
    parts = {"entropy_routes": relative(a - b, max(abs(a), abs(b), 1e-300)),
             "B_derivative": deriv,
             "B_minimum": abs(float(b_function(1.0 / V, V))) * V,
             "B_nonnegative": 0.0 if float(np.min(b_function(th, V))) >= -1e-15 else 1.0}
    return combine("entropy_potential", parts, max(tol, 1e-8), details={"entropy": a})


def check_stability_probe(h0: ScalarField, base: PotentialSpace, dt: float = 1e-2, steps: int = 2000,
                          tol: float = 1e-8) -> ResidualReport:
    """Long KR run: on a Kaehler-Einstein background the theta energy tends to zero and F stays bounded."""
    probe = stability_probe(h0, base, dt, steps)
    e0 = theta_energy(h0, base)
    parts = {"energy_infimum": probe["energy_inf"] / max(e0, 1e-300),
             "F_bounded": 0.0 if np.isfinite(probe["F_min"]) else 1.0}
    return combine("stability_probe", parts, tol, details=probe)


def check_flow_convergence(trace: FlowTrace, target: float = 1e-6, max_steps: int = 5000) -> ResidualReport:
    """sup |theta - 1/V| reaches ``target`` within ``max_steps`` accepted steps (ratio reported)."""
    final = trace.theta_sup[-1] if trace.theta_sup else math.inf
    within = trace.accepted_steps <= max_steps
    ratio = final / target if within else math.inf
    return ResidualReport(f"{trace.kind}_flow", ratio, ratio, 1.0,
                          details={"final_theta_sup": final, "accepted_steps": trace.accepted_steps,
                                   "rejected_steps": trace.rejected, "final_time": trace.times[-1],
                                   "converged": trace.converged})


def check_ding_flow(trace: FlowTrace, tol: float = 1e-10) -> ResidualReport:
    """F is non-increasing along the Ding flow (worst relative increase)."""
    F = np.asarray(trace.F)
    scale = max(float(np.max(np.abs(F))), 1e-300)
    worst = float(max(np.max(np.diff(F)), 0.0)) / scale if F.size > 1 else 0.0
    return ResidualReport("ding_flow", worst, worst, tol,
                          details={"F_initial": float(F[0]), "F_final": float(F[-1]), "steps": trace.accepted_steps,
                                   "theta_sup_final": trace.theta_sup[-1]})
