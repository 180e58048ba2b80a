"""Fano-normalized structures: the density ratio theta, the symplectic form on the
space of compatible complex structures, its moment map and two energy functionals."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .backends import Geometry
from .calculus import (
    density,
    hamiltonian_vf,
    integrate,
    integrate_density,
    lie_derivative,
    liouville,
    omega_rho_pair,
    power_over_factorial,
    solve_elliptic,
    standard_omega,
    volume_form,
    wedge,
)
from .curvature import central_difference, j_path, renormalize, ricci_form
from .decomposition import dc_laplacian, lambda_split
from .fields import EndoField, FormField, ScalarField, as_endo
from .identities import abs_integral
from .reports import ResidualReport, combine, digest, relative, richardson_confirmed
from .scenes import random_structure, rng_for


@dataclass
class FanoScene:
    """A compatible J with theta normalized so that Ric(theta rho, J) = omega and int theta rho = 1."""

    omega: FormField
    J: EndoField
    theta: ScalarField
    potential: ScalarField
    rho: FormField
    rho_J: FormField
    volume: float
    ricci_residual: float

    @property
    def geom(self) -> Geometry:
        return self.omega.geom


def solve_theta(J, omega: FormField | None = None, tol: float = 1e-11) -> FanoScene:
    J = as_endo(J)
    geom = J.geom
    omega = omega if omega is not None else standard_omega(geom)
    rho = liouville(omega)
    ric = ricci_form(rho, J)
    wn1 = power_over_factorial(omega, geom.n - 1)
    rhs = density(wedge(omega - ric, wn1)) / density(rho) * 2.0
    volume = integrate(rho)
    if abs(integrate_density(rhs, rho)) > 1e-8 * volume * max(1.0, rhs.norm_inf()):
        raise ValueError("first Chern class and [omega] disagree; no Fano normalization exists")
    u = solve_elliptic(lambda w: dc_laplacian(w, J, omega), rhs - integrate_density(rhs, rho) / volume, tol=tol,
                       atol=1e-13 * np.sqrt(volume))
    e = u.apply(np.exp)
    theta = e / integrate_density(e, rho)
    rho_J = volume_form(theta * density(rho))
    resid = (ricci_form(rho_J, J) - omega).norm_inf() / omega.norm_inf()
    return FanoScene(omega, J, theta, u, rho, rho_J, volume, float(resid))


def is_kaehler_einstein(scene: FanoScene, tol: float = 1e-8) -> bool:
    return (scene.theta - 1.0 / scene.volume).norm_inf() * scene.volume <= tol


# ---------------------------------------------------------------------------
# symplectic form and metric


def donaldson_form(J1hat, J2hat, scene: FanoScene, return_splits: bool = False):
    """1/2 int tr(J1hat J J2hat) rho_J - int (f1 g2 - g1 f2) rho_J."""
    s1, s2 = lambda_split(J1hat, scene), lambda_split(J2hat, scene)
    val = omega_rho_pair(J1hat, J2hat, scene.J, scene.rho_J) \
        - integrate_density(s1.f * s2.g - s1.g * s2.f, scene.rho_J)
    return (val, s1, s2) if return_splits else val


def donaldson_metric(J1hat, J2hat, scene: FanoScene) -> float:
    return donaldson_form(J1hat, -(scene.J @ as_endo(J2hat)), scene)


def moment_mu(scene: FanoScene, H: ScalarField) -> float:
    """<mu(J), H> = 2 int H (rho/V - rho_J)."""
    return 2.0 * integrate_density(H * (1.0 / scene.volume - scene.theta), scene.rho)


def check_don_moment(scene: FanoScene, Jhat, H: ScalarField, tol: float = 1e-6, h: float = 1e-4,
                     seed: int | None = None) -> ResidualReport:
    """Three routes to dmu(J)Jhat paired with H: the symplectic form against L_{v_H}J,
    the closed formula -2 int H f rho_J, and a finite difference of the moment map."""
    t0 = time.perf_counter()
    gauge = lie_derivative(hamiltonian_vf(H, scene.omega), scene.J)
    via_form = donaldson_form(Jhat, gauge, scene)
    sp = lambda_split(Jhat, scene)
    closed = -2.0 * integrate_density(H * sp.f, scene.rho_J)
    fd, spread = central_difference(lambda t: moment_mu(solve_theta(j_path(scene.J, Jhat, t), scene.omega), H), h)
    scale = max(2.0 * abs_integral(H * sp.f, scene.rho_J), abs(via_form), 1e-300)
    parts = {"form_vs_closed": relative(via_form - closed, scale),
             "closed_vs_difference": relative(closed - fd, scale)}
    return combine("symplectic_moment_map", parts, tol, seed=seed,
                   details={"form": via_form, "closed": closed, "difference": fd, "fd_spread": abs(spread)},
                   digests={"J": digest(scene.J), "Jhat": digest(Jhat), "H": digest(H)},
                   runtime=time.perf_counter() - t0)


def check_theta_hat(scene: FanoScene, Jhat, tol: float = 1e-6, h: float = 1e-4,
                    seed: int | None = None) -> ResidualReport:
    """Derivative of theta along Jhat equals f theta, f from the split of Lambda(J, Jhat)."""
    fd, _ = central_difference(lambda t: solve_theta(j_path(scene.J, Jhat, t), scene.omega).theta, h)
    f = lambda_split(Jhat, scene).f
    pred = f * scene.theta
    r = relative((fd - pred).norm_inf(), max(fd.norm_inf(), pred.norm_inf()))
    return ResidualReport("theta_variation", r, relative((fd - pred).norm_l2(), pred.norm_l2()), tol, seed=seed)


# ---------------------------------------------------------------------------
# functionals and their gradients


def energy_E(scene: FanoScene) -> float:
    """1/2 int (1/V - theta)^2 rho."""
    return 0.5 * integrate_density((scene.theta - 1.0 / scene.volume) * (scene.theta - 1.0 / scene.volume), scene.rho)


def grad_E(scene: FanoScene) -> EndoField:
    v = hamiltonian_vf(scene.theta, scene.omega)
    return (scene.J @ lie_derivative(v, scene.J)) * -0.5


def he_H_omega(scene: FanoScene) -> float:
    """int log(V theta) theta rho."""
    return integrate_density((scene.theta * scene.volume).apply(np.log) * scene.theta, scene.rho)


def grad_H(scene: FanoScene) -> EndoField:
    v = hamiltonian_vf(scene.theta.apply(np.log), scene.omega)
    return (scene.J @ lie_derivative(v, scene.J)) * -0.5


def check_gradient(scene: FanoScene, Jhat, functional: str = "energy", tol: float = 1e-6, h: float = 1e-4,
                   seed: int | None = None) -> ResidualReport:
    """Finite-difference derivative of the functional against the metric pairing with its gradient."""
    value, grad = {"energy": (energy_E, grad_E), "entropy": (he_H_omega, grad_H)}[functional]
    fd, spread = central_difference(lambda t: value(solve_theta(j_path(scene.J, Jhat, t), scene.omega)), h)
    pred = donaldson_metric(Jhat, grad(scene), scene)
    f = lambda_split(Jhat, scene).f
    weight = scene.theta if functional == "energy" else scene.theta.apply(np.log)
    closed = integrate_density(f * weight, scene.rho_J)
    scale = max(abs_integral(f * weight, scene.rho_J), 1e-300)
    parts = {"metric_vs_difference": relative(pred - fd, scale), "closed_vs_difference": relative(closed - fd, scale)}
    return combine(f"gradient_{functional}", parts, tol, seed=seed,
                   details={"difference": fd, "metric": pred, "closed": closed, "fd_spread": abs(spread)})


# ---------------------------------------------------------------------------
# closedness of the symplectic form on explicit families


def linear_family(J0, directions):
    """p -> (J(p), [dJ/dp_i]) for J(p) = renormalize(J0 + sum p_i K_i) in real dimension two."""
    J0 = as_endo(J0)
    Ks = [as_endo(K) for K in directions]
    if J0.geom.dim != 2:
        raise ValueError("closed-form family derivatives are implemented in real dimension two")

    def family(p):
        M = J0 + sum((K * float(pi) for K, pi in zip(Ks, p)), EndoField.zeros(J0.geom))
        c = (M @ M).trace() * -0.5  # M^2 = -c on tangent planes
        cinv = c.apply(lambda x: x ** -0.5)
        J = M * cinv
        tangents = []
        for K in Ks:
            dc = (M @ K).trace() * -1.0
            tangents.append(K * cinv - M * (cinv * cinv * cinv * dc * 0.5))
        return J, tangents

    return family


def _omega_at(family, omega, p, i, j, cache):
    key = (tuple(np.round(p, 15)), i, j)
    if key not in cache:
        J, T = family(p)
        sc = solve_theta(J, omega)
        val, si, sj = donaldson_form(T[i], T[j], sc, return_splits=True)
        cache[key] = (val, si, sj)
    return cache[key]


def _cyclic(family, omega, s, cache):
    def partial(axis, i, j):
        e = np.zeros(3)
        e[axis] = s
        return (_omega_at(family, omega, e, i, j, cache)[0] - _omega_at(family, omega, -e, i, j, cache)[0]) / (2 * s)

    dOmega = partial(0, 1, 2) - partial(1, 0, 2) + partial(2, 0, 1)
    e0, e1 = np.eye(3)[0] * s, np.eye(3)[1] * s
    f2_plus, f2_minus = _omega_at(family, omega, e0, 1, 2, cache)[1].f, _omega_at(family, omega, -e0, 1, 2, cache)[1].f
    f1_plus, f1_minus = _omega_at(family, omega, e1, 0, 2, cache)[1].f, _omega_at(family, omega, -e1, 0, 2, cache)[1].f
    mixed = (f2_plus - f2_minus) / (2 * s) - (f1_plus - f1_minus) / (2 * s)
    return dOmega, mixed


def check_dsymp_closed(J0, directions, omega: FormField | None = None, step: float = 0.02, tol: float = 1e-6,
                       seed: int | None = None) -> ResidualReport:
    """d(Omega)(d1, d2, d3) on a three-parameter family, at steps s and s/2.

    Central differences of a closed form give a residual that is O(s^2) and
    shrinks by four on halving; the extrapolated value must vanish.
    """
    t0 = time.perf_counter()
    J0 = as_endo(J0)
    omega = omega if omega is not None else standard_omega(J0.geom)
    fam = linear_family(J0, directions)
    cache: dict = {}
    d1, m1 = _cyclic(fam, omega, step, cache)
    d2, m2 = _cyclic(fam, omega, step / 2, cache)
    scale = max(abs(_omega_at(fam, omega, np.zeros(3), i, j, cache)[0])
                for i, j in itertools.combinations(range(3), 2))
    extrap = (4 * d2 - d1) / 3
    ratio = abs(d1 / d2) if d2 != 0 else float("inf")
    mixed_extrap = (m2 * 4.0 - m1) * (1.0 / 3.0)
    fscale = max(_omega_at(fam, omega, np.zeros(3), 0, 1, cache)[1].f.norm_inf(), 1e-300)
    parts = {"extrapolated": relative(extrap, scale), "mixed_partials": mixed_extrap.norm_inf() / fscale}
    return combine("symplectic_closedness", parts, tol, seed=seed,
                   details={"residual_step": d1, "residual_half_step": d2, "halving_ratio": ratio,
                            "richardson_confirmed": richardson_confirmed(d1, d2, scale),
                            "scale": scale, "mixed_step": m1.norm_inf() / fscale,
                            "mixed_half_step": m2.norm_inf() / fscale},
                   runtime=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# pulling back by Hamiltonian diffeomorphisms of the sphere


class AmbientPolynomial:
    """A polynomial on R^3 whose restriction to the unit sphere matches a band-limited field."""

    def __init__(self, exponents, coefs):
        self.exponents = np.asarray(exponents)
        self.coefs = np.asarray(coefs)

    @classmethod
    def fit(cls, H: ScalarField, degree: int | None = None) -> "AmbientPolynomial":
        geom = H.geom
        if degree is None:
            c = np.abs(geom.to_coeffs(H.values))
            big = np.flatnonzero(c > 1e-12 * max(c.max(), 1e-300))
            degree = int(np.floor(np.sqrt(big.max()))) if big.size else 0
        exps = [e for e in itertools.product(range(degree + 1), repeat=3) if sum(e) <= degree]
        pts = geom.points.reshape(3, -1)
        V = np.stack([np.prod(pts ** np.array(e)[:, None], axis=0) for e in exps], axis=1)
        sw = np.sqrt(np.broadcast_to(geom.weights, geom.shape).ravel())
        coef, *_ = np.linalg.lstsq(V * sw[:, None], H.values.ravel() * sw, rcond=None)
        return cls(exps, coef)

    def _mono(self, pts, shift):
        e = self.exponents + shift
        ok = np.all(e >= 0, axis=1)
        e = np.maximum(e, 0)
        return np.stack([np.prod(pts ** ee[:, None], axis=0) for ee in e], axis=0) * ok[:, None]

    def value(self, pts):
        return self.coefs @ self._mono(pts, np.zeros(3, int))

    def grad(self, pts):
        out = []
        for a in range(3):
            sh = -np.eye(3, dtype=int)[a]
            out.append((self.coefs * self.exponents[:, a]) @ self._mono(pts, sh))
        return np.array(out)

    def hess(self, pts):
        out = np.zeros((3, 3) + pts.shape[1:])
        for a in range(3):
            for b in range(3):
                sh = -np.eye(3, dtype=int)[a] - np.eye(3, dtype=int)[b]
                w = self.exponents[:, a] * (self.exponents[:, b] - (a == b))
                out[a, b] = (self.coefs * w) @ self._mono(pts, sh)
        return out


def hamiltonian_flow(H: ScalarField, t: float, steps: int = 64):
    """Time-t flow of v_H from every grid point (RK4 on positions and Jacobians).

    Returns points (3, P) and Jacobians (3, 3, P).
    """
    geom = H.geom
    if geom.normal() is None:
        raise ValueError("Hamiltonian pullbacks are implemented on the sphere")
    poly = AmbientPolynomial.fit(H)
    y = geom.points.reshape(3, -1).astype(float)
    Y = np.broadcast_to(np.eye(3)[..., None], (3, 3, y.shape[1])).copy()

    def rhs(y, Y):
        gP = poly.grad(y)
        v = np.cross(gP, y, axis=0)
        HY = np.einsum("ab...,bc...->ac...", poly.hess(y), Y)
        dY = np.cross(HY, y[:, None, :], axis=0) + np.cross(gP[:, None, :], Y, axis=0)
        return v, dY

    dt = t / steps
    for _ in range(steps):
        k1 = rhs(y, Y)
        k2 = rhs(y + 0.5 * dt * k1[0], Y + 0.5 * dt * k1[1])
        k3 = rhs(y + 0.5 * dt * k2[0], Y + 0.5 * dt * k2[1])
        k4 = rhs(y + dt * k3[0], Y + dt * k3[1])
        y = y + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        Y = Y + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return y, Y


def perturb_J_by_hamiltonian(J, H: ScalarField, t: float, steps: int = 64) -> EndoField:
    """The pullback phi_t^* J for the Hamiltonian flow phi_t of H."""
    J = as_endo(J)
    geom = J.geom
    y, Y = hamiltonian_flow(H, t, steps)
    x = geom.points.reshape(3, -1)
    Jphi = geom.evaluate(J.comps, y)  # (3, 3, P)
    Px = np.eye(3)[..., None] - x[:, None, :] * x[None, :, :]
    ny = y / np.linalg.norm(y, axis=0)
    Atil = np.einsum("ab...,bc...->ac...", Y, Px) + ny[:, None, :] * x[None, :, :]
    Ainv = np.moveaxis(np.linalg.inv(np.moveaxis(Atil, (0, 1), (-2, -1))), (-2, -1), (0, 1))
    out = np.einsum("ab...,bc...,cd...,de...->ae...", Px, Ainv, Jphi, Atil, optimize=True)
    out = np.einsum("ab...,bc...->ac...", out, Px)
    return EndoField(geom, out.reshape((3, 3) + geom.shape))


def sphere_perturbation(omega: FormField, seed: int, band: int = 2, amp: float = 0.2) -> EndoField:
    """A compatible, generally non-Kaehler-Einstein structure near the round one."""
    return random_structure(omega, rng_for(seed), band, amp, compatible=True)


def check_equivariance(J, H: ScalarField, t: float, steps: int = 64, tol: float = 1e-6) -> ResidualReport:
    """theta of the pulled-back structure equals theta composed with the flow."""
    J = as_endo(J)
    geom = J.geom
    Jt = renormalize(perturb_J_by_hamiltonian(J, H, t, steps))
    th_t = solve_theta(Jt).theta
    y, _ = hamiltonian_flow(H, t, steps)
    th_phi = geom.evaluate(solve_theta(J).theta.values, y).reshape(geom.shape)
    r = np.max(np.abs(th_t.values - th_phi)) / np.max(np.abs(th_phi))
    return ResidualReport("theta_equivariance", r, r, tol)


# ---------------------------------------------------------------------------
# scene invariants, the operators L and B, form and metric structure


def check_fano_normalization(scene: FanoScene, tol: float = 1e-8, seed: int | None = None) -> ResidualReport:
    """Ric(rho_J, J) = omega, int rho_J = 1, positivity of theta and the conformal route to rho_J."""
    from .curvature import ricci_conformal

    mass = integrate(scene.rho_J)
    via_conformal = ricci_conformal(ricci_form(scene.rho, scene.J), scene.theta.apply(np.log), scene.J)
    parts = {"ricci_equals_omega": scene.ricci_residual, "unit_mass": abs(mass - 1.0),
             "conformal_route": relative((via_conformal - scene.omega).norm_inf(), scene.omega.norm_inf()),
             "positivity": 0.0 if float(np.min(scene.theta.values)) > 0 else 1.0}
    return combine("fano_normalization", parts, tol, seed=seed,
                   details={"theta_spread": float(np.ptp(scene.theta.values)) * scene.volume,
                            "kaehler_einstein": is_kaehler_einstein(scene)})


def check_theta_potential(round_scene: FanoScene, perturbed: FanoScene, tol: float = 1e-8,
                          seed: int | None = None) -> ResidualReport:
    """theta = 1/V exactly for the round structure; a non-Einstein structure has non-constant theta."""
    round_dev = (round_scene.theta - 1.0 / round_scene.volume).norm_inf() * round_scene.volume
    spread = float(np.ptp(perturbed.theta.values)) * perturbed.volume
    parts = {"round_constant": round_dev, "perturbed_nonconstant": 0.0 if spread > 1e3 * tol else 1.0}
    return combine("theta_potential", parts, tol, seed=seed, details={"perturbed_spread": spread})


def check_fano_split(scene: FanoScene, Jhat, tol: float = 1e-8, seed: int | None = None) -> ResidualReport:
    from .calculus import d, one_form_circ
    from .curvature import Lambda_rho

    lam = Lambda_rho(scene.J, Jhat, scene.rho_J)
    sp = lambda_split(Jhat, scene)
    recon = d(sp.g) - one_form_circ(d(sp.f), scene.J)
    parts = {"reconstruction": relative((lam - recon).norm_inf(), lam.norm_inf()),
             "f_mean": relative(integrate_density(sp.f, scene.rho_J), sp.f.norm_inf()),
             "g_mean": relative(integrate_density(sp.g, scene.rho_J), sp.g.norm_inf())}
    return combine("fano_lambda_split", parts, tol, seed=seed)


def check_operator_adjointness(scene: FanoScene, F: ScalarField, G: ScalarField, tol: float = 1e-9,
                               seed: int | None = None) -> ResidualReport:
    """L is symmetric and B antisymmetric for the rho_J inner product; L kills constants."""
    from .decomposition import inner_J, op_B, op_L

    LF, LG, BF, BG = op_L(F, scene), op_L(G, scene), op_B(F, scene), op_B(G, scene)
    a, b = inner_J(LF, G, scene), inner_J(F, LG, scene)
    c, e = inner_J(BF, G, scene), inner_J(F, BG, scene)
    scale = max(abs_integral(LF * G, scene.rho_J), abs_integral(F * LG, scene.rho_J),
                abs_integral(BF * G, scene.rho_J), 1e-300)
    one = ScalarField.constant(scene.geom, 1.0)
    parts = {"L_symmetric": relative(a - b, scale), "B_antisymmetric": relative(c + e, scale),
             "L_constants": relative(op_L(one, scene).norm_inf(), LF.norm_inf() / max(F.norm_inf(), 1e-300))}
    return combine("operators_L_B", parts, tol, seed=seed)


def check_donaldson_antisymmetry(scene: FanoScene, J1hat, J2hat, tol: float = 1e-10,
                                 seed: int | None = None) -> ResidualReport:
    a, s1, s2 = donaldson_form(J1hat, J2hat, scene, return_splits=True)
    b = donaldson_form(J2hat, J1hat, scene)
    scale = max(0.5 * abs_integral(ScalarField(scene.geom, np.einsum(
        "ab...,bc...,ca...->...", as_endo(J1hat).comps, scene.J.comps, as_endo(J2hat).comps)), scene.rho_J)
        + abs_integral(s1.f * s2.g, scene.rho_J) + abs_integral(s1.g * s2.f, scene.rho_J), 1e-300)
    r = relative(a + b, scale)
    return ResidualReport("donaldson_form", r, r, tol, seed=seed, details={"value": a})


def donaldson_gram(scene: FanoScene, directions) -> np.ndarray:
    """Gram matrix of the Donaldson metric, reusing one Lambda split per direction and rotated direction."""
    dirs = [as_endo(x) for x in directions]
    rot = [-(scene.J @ x) for x in dirs]
    sd = [lambda_split(x, scene) for x in dirs]
    sr = [lambda_split(x, scene) for x in rot]
    n = len(dirs)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            G[i, j] = omega_rho_pair(dirs[i], rot[j], scene.J, scene.rho_J) \
                - integrate_density(sd[i].f * sr[j].g - sd[i].g * sr[j].f, scene.rho_J)
    return G


def check_donaldson_metric(scene: FanoScene, directions, tol: float = 1e-9, seed: int | None = None) -> ResidualReport:
    """Gram matrix symmetric and positive definite; the smallest eigenvalue is the reported margin."""
    G = donaldson_gram(scene, directions)
    asym = np.max(np.abs(G - G.T)) / max(np.max(np.abs(G)), 1e-300)
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    margin = float(ev[0] / ev[-1])
    parts = {"symmetry": float(asym), "positive_definite": 0.0 if ev[0] > 0 else 1.0}
    return combine("donaldson_metric", parts, tol, seed=seed,
                   details={"min_eigenvalue": float(ev[0]), "max_eigenvalue": float(ev[-1]),
                            "relative_margin": margin})
