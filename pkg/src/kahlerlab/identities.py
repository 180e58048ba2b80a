"""Residual checks for the moment-map identities and their auxiliary formulas.

Every check evaluates both sides through separate code paths and returns a
``ResidualReport``.  Integral identities are normalized by the integral of
the absolute value of the largest integrand involved; pointwise identities
by the largest sup norm among their terms.  Both choices are scale free.
"""

from __future__ import annotations

import time

import numpy as np

from .calculus import (
    SolverError,
    contract,
    d,
    density,
    divergence,
    eval_form,
    hamiltonian_vf,
    integrate,
    integrate_density,
    krylov,
    l2_inner_endo,
    lie_derivative,
    liouville,
    metric_and_adjoint,
    nabla_vector,
    omega_rho_pair,
    one_form_circ,
    poisson_bracket,
    power_over_factorial,
    solve_elliptic,
    standard_J,
    vf_from_alpha,
    wedge,
)
from .curvature import (
    Lambda_rho,
    central_difference,
    j_path,
    ric_hat,
    ricci_form,
    scalar_curvature,
    scalar_hat_via_lambda,
)
from .fields import EndoField, FormField, ScalarField, VectorField, as_endo
from .reports import ResidualReport, combine, digest, relative


def _tr3(A, B, C) -> np.ndarray:
    return np.einsum("ab...,bc...,ca...->...", as_endo(A).comps, as_endo(B).comps, as_endo(C).comps, optimize=True)


def _tr2(A, B) -> np.ndarray:
    return np.einsum("ab...,ba...->...", as_endo(A).comps, as_endo(B).comps)


def abs_integral(values, rho: FormField) -> float:
    """int |values| rho; the natural error scale of int values rho."""
    vals = values.values if isinstance(values, ScalarField) else np.asarray(values)
    return rho.geom.integrate_scalar(np.abs(vals * density(rho).values))


def _top_abs(top: FormField) -> float:
    return top.geom.integrate_scalar(np.abs(density(top).values))


def _pointwise(lhs, rhs, *terms) -> float:
    diff = (lhs - rhs).norm_inf()
    scale = max([lhs.norm_inf(), rhs.norm_inf()] + [t.norm_inf() for t in terms])
    return relative(diff, scale)


def pairing_trace(Jhat, J, B, rho: FormField) -> float:
    """1/2 int tr(Jhat J B) rho."""
    return omega_rho_pair(Jhat, B, J, rho)


def scalar_hat_fd(omega: FormField, J, Jhat, h: float = 1e-4) -> ScalarField:
    est, _ = central_difference(lambda t: scalar_curvature(omega, j_path(J, Jhat, t)), h)
    return est


# ---------------------------------------------------------------------------
# the Ricci moment map and Lambda


def check_ricci_moment(rho: FormField, J, Jhat, alpha: FormField, tol: float = 1e-7, h: float = 1e-4,
                       seed: int | None = None) -> ResidualReport:
    t0 = time.perf_counter()
    Y = vf_from_alpha(alpha, rho)
    LYJ = lie_derivative(Y, J)
    top = wedge(ric_hat(rho, J, Jhat, h=h), alpha) * 2.0
    lhs = integrate(top)
    integrand = ScalarField(rho.geom, 0.5 * _tr3(Jhat, J, LYJ))
    rhs = integrate_density(integrand, rho)
    scale = max(_top_abs(top), abs_integral(integrand, rho))
    r = relative(lhs - rhs, scale)
    return ResidualReport("ricci_moment_map", r, r, tol, seed=seed,
                          digests={"J": digest(J), "Jhat": digest(Jhat), "alpha": digest(alpha)},
                          details={"lhs": lhs, "rhs": rhs, "scale": scale},
                          runtime=time.perf_counter() - t0)


def lambda_rhs(rho: FormField, J, v: VectorField, ric: FormField | None = None) -> FormField:
    """2 iota(v) Ric - d f_v o J + d f_{Jv}."""
    ric = ric if ric is not None else ricci_form(rho, J)
    Jv = as_endo(J) @ v
    fv, fJv = divergence(v, rho), divergence(Jv, rho)
    return contract(v, ric) * 2.0 - one_form_circ(d(fv), J) + d(fJv)


def check_lambda_identities(rho: FormField, J, Jhat, v: VectorField, tol: float = 1e-7, h: float = 1e-4,
                            ctx=None, seed: int | None = None) -> ResidualReport:
    """Three identities: dLambda = 2 Ric-hat, its integrated form against iota(v)rho,
    and the closed formula for Lambda(J, L_v J)."""
    t0 = time.perf_counter()
    conn = ctx if ctx is not None else rho
    lam = Lambda_rho(J, Jhat, conn)
    rh2 = ric_hat(rho, J, Jhat, h=h) * 2.0
    r1 = _pointwise(d(lam), rh2)

    LvJ = lie_derivative(v, J)
    top = wedge(lam, contract(v, rho))
    integrand = ScalarField(rho.geom, 0.5 * _tr3(Jhat, J, LvJ))
    lhs2, rhs2 = integrate(top), integrate_density(integrand, rho)
    r2 = relative(lhs2 - rhs2, max(_top_abs(top), abs_integral(integrand, rho)))

    ric = ricci_form(rho, J)
    left3 = Lambda_rho(J, LvJ, conn)
    right3 = lambda_rhs(rho, J, v, ric)
    r3 = _pointwise(left3, right3, contract(v, ric) * 2.0)
    return combine("lambda_identities", {"exterior_derivative": r1, "integrated": r2, "lie_direction": r3},
                   tol, seed=seed, digests={"J": digest(J), "Jhat": digest(Jhat), "v": digest(v)},
                   details={"integrated_sides": [lhs2, rhs2]}, runtime=time.perf_counter() - t0)


def dbar_vector(J, v: VectorField) -> EndoField:
    """(nabla v + J nabla v J)/2 for the reference (Levi-Civita) connection of a Kaehler backend."""
    B = nabla_vector(v)
    Jm = as_endo(J)
    return (B + Jm @ B @ Jm) * 0.5


def check_lambda_weak(omega: FormField, J, Jhat, v: VectorField, tol: float = 1e-8,
                      seed: int | None = None) -> ResidualReport:
    """Weak form of Lambda = iota(2 J dbar* Jhat*) omega on a Kaehler backend.

    Tested as int Lambda(v) rho = -2 <dbar v, Jhat*> with <A, B> = 1/2 int tr(A* B) rho,
    together with the pointwise relation L_v J = 2 J dbar v.
    """
    t0 = time.perf_counter()
    rho = liouville(omega)
    Jm = as_endo(J)
    db = dbar_vector(Jm, v)
    LvJ = lie_derivative(v, Jm)
    r_lie = _pointwise(LvJ, Jm @ db * 2.0)
    lam = Lambda_rho(Jm, Jhat, rho)
    top = wedge(lam, contract(v, rho))
    lhs = integrate(top)
    Jhat_star = metric_and_adjoint(omega, Jm, Jhat)
    rhs = -l2_inner_endo(db, Jhat_star, omega, Jm, rho)
    scale = max(_top_abs(top), abs_integral(_tr2(Jhat, db), rho))
    r_weak = relative(lhs - rhs, scale)
    return combine("lambda_weak_form", {"lie_vs_dbar": r_lie, "weak_pairing": r_weak}, tol, seed=seed,
                   details={"sides": [lhs, rhs]}, runtime=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# pairs (omega, J) with fixed volume


def _h1_basis(geom) -> list[FormField]:
    if geom.normal() is not None:
        return []
    out = []
    for a in range(geom.D):
        comps = geom.zeros(geom.D)
        comps[a] = 1.0
        out.append(FormField(geom, 1, comps))
    return out


def lefschetz_normalize(lam: FormField, omega: FormField) -> FormField:
    """Add the closed (constant) 1-form making lam ^ omega^{n-1}/(n-1)! exact."""
    g = omega.geom
    basis = _h1_basis(g)
    if not basis:
        return lam
    wn1 = power_over_factorial(omega, g.n - 1)
    M = np.array([[integrate(wedge(wedge(bi, wn1), bj)) for bj in basis] for bi in basis])
    b = np.array([integrate(wedge(wedge(lam, wn1), bj)) for bj in basis])
    try:
        c = np.linalg.solve(M, -b)
    except np.linalg.LinAlgError as exc:
        raise SolverError("Lefschetz map is singular for this class") from exc
    out = lam
    for ci, bi in zip(c, basis):
        out = out + bi * float(ci)
    return out


def volume_preserving_potential(mu: FormField, omega: FormField, J0=None, tol: float = 1e-11) -> FormField:
    """lam = mu + du o J0 with d lam ^ omega^{n-1} = 0, then Lefschetz-normalized.

    The operator u -> d(du o J0) ^ omega^{n-1}/(n-1)! / rho is the Laplacian of
    the Kaehler metric of (omega, J0), so one elliptic solve suffices.
    """
    g = omega.geom
    J0 = J0 if J0 is not None else standard_J(g)
    wn1 = power_over_factorial(omega, g.n - 1)
    rho = liouville(omega)
    rr = density(rho)

    def op(u: ScalarField) -> ScalarField:
        return density(wedge(d(one_form_circ(d(u), J0)), wn1)) / rr

    rhs = -(density(wedge(d(mu), wn1)) / rr)
    u = solve_elliptic(op, rhs, tol=tol)
    return lefschetz_normalize(mu + one_form_circ(d(u), J0), omega)


def check_se_moment(omega: FormField, J, lam_hat: FormField, Jhat, alpha: FormField, hbar: float = 1.0,
                    tol: float = 1e-6, h: float = 1e-4, seed: int | None = None) -> ResidualReport:
    """Moment map 2(Ric - omega/hbar) for pairs with fixed volume rho = omega^n/n!.

    The tangent vector is (d lam_hat, Jhat); lam_hat should already satisfy the
    Lefschetz normalization and d lam_hat ^ omega^{n-1} = 0.
    """
    t0 = time.perf_counter()
    g = omega.geom
    rho = liouville(omega)
    wn1 = power_over_factorial(omega, g.n - 1)
    omega_hat = d(lam_hat)
    tangency = density(wedge(omega_hat, wn1)).norm_inf() / max(omega_hat.norm_inf(), 1e-300)

    Y = vf_from_alpha(alpha, rho)
    LYJ = lie_derivative(Y, J)
    lhs_top = wedge((ric_hat(rho, J, Jhat, h=h) - omega_hat * (1.0 / hbar)) * 2.0, alpha)
    lhs = integrate(lhs_top)
    tr_part = ScalarField(g, 0.5 * _tr3(Jhat, J, LYJ))
    form_top = wedge(wedge(lam_hat, contract(Y, omega)), wn1) * (2.0 / hbar)
    rhs = integrate_density(tr_part, rho) - integrate(form_top)
    scale = max(_top_abs(lhs_top), abs_integral(tr_part, rho), _top_abs(form_top))
    r = relative(lhs - rhs, scale)
    return ResidualReport("pair_moment_map", r, r, tol, seed=seed,
                          digests={"J": digest(J), "Jhat": digest(Jhat), "lam_hat": digest(lam_hat)},
                          details={"lhs": lhs, "rhs": rhs, "scale": scale, "volume_tangency": tangency},
                          runtime=time.perf_counter() - t0)


def check_tangency_compatible(omega: FormField, J, omega_hat: FormField, Jhat, tol: float = 1e-8,
                              seed: int | None = None) -> ResidualReport:
    """omega_hat(u,v) - omega_hat(Ju,Jv) = omega(Jhat u, J v) + omega(J u, Jhat v) at every node."""
    W, Wh = omega.full(), omega_hat.full()
    Jm, Jh = as_endo(J).comps, as_endo(Jhat).comps
    left = Wh - np.einsum("ai...,ab...,bj...->ij...", Jm, Wh, Jm, optimize=True)
    right = np.einsum("ai...,ab...,bj...->ij...", Jh, W, Jm, optimize=True) + np.einsum("ai...,ab...,bj...->ij...", Jm, W, Jh, optimize=True)
    diff = np.max(np.abs(left - right))
    inputs = np.max(np.abs(Wh)) + np.max(np.abs(Jh)) * np.max(np.abs(W))
    scale = max(np.max(np.abs(left)), np.max(np.abs(right)), inputs)
    r = relative(diff, scale)
    return ResidualReport("compatible_tangency", r, r, tol, seed=seed,
                          digests={"omega_hat": digest(omega_hat), "Jhat": digest(Jhat)})


def check_weitzenboeck(omega: FormField, J, X: VectorField, tol: float = 1e-6,
                       seed: int | None = None) -> ResidualReport:
    t0 = time.perf_counter()
    rho = liouville(omega)
    Jm = as_endo(J)
    A = lie_derivative(X, Jm)
    S = A + metric_and_adjoint(omega, Jm, A)
    lhs = 0.25 * l2_inner_endo(S, S, omega, Jm, rho)
    half_norm = 0.5 * l2_inner_endo(A, A, omega, Jm, rho)
    JX = Jm @ X
    fX, fJX = divergence(X, rho), divergence(JX, rho)
    ric_term = eval_form(ricci_form(rho, Jm), X, JX) * 2.0
    pot = fX * fX + fJX * fJX - ric_term
    rhs = half_norm + integrate_density(pot, rho)
    scale = max(abs(lhs), abs(half_norm), abs_integral(fX * fX, rho) + abs_integral(fJX * fJX, rho),
                abs_integral(ric_term, rho))
    r = relative(lhs - rhs, scale)
    return ResidualReport("weitzenboeck", r, r, tol, seed=seed, digests={"X": digest(X), "J": digest(J)},
                          details={"lhs": lhs, "rhs": rhs}, runtime=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# scalar curvature as a moment map


def check_scalar_moment(omega: FormField, J, Jhat, H: ScalarField, tol: float = 1e-6, h: float = 1e-4,
                        seed: int | None = None) -> ResidualReport:
    t0 = time.perf_counter()
    rho = liouville(omega)
    S_hat = scalar_hat_fd(omega, J, Jhat, h)
    lhs = integrate_density(S_hat * H, rho)
    LvJ = lie_derivative(hamiltonian_vf(H, omega), J)
    integrand = ScalarField(omega.geom, 0.5 * _tr3(Jhat, J, LvJ))
    rhs = integrate_density(integrand, rho)
    scale = max(abs_integral(S_hat * H, rho), abs_integral(integrand, rho))
    r = relative(lhs - rhs, scale)
    return ResidualReport("scalar_moment_map", r, r, tol, seed=seed,
                          digests={"J": digest(J), "Jhat": digest(Jhat), "H": digest(H)},
                          details={"lhs": lhs, "rhs": rhs}, runtime=time.perf_counter() - t0)


def hamiltonian_deformation(omega: FormField, J, F: ScalarField) -> EndoField:
    """J L_{v_F} J, the complexified gauge direction generated by F."""
    Jm = as_endo(J)
    return Jm @ lie_derivative(hamiltonian_vf(F, omega), Jm)


def scalar_L_operator(omega: FormField, J, F: ScalarField, mode: str = "finite_difference",
                      h: float = 1e-4) -> ScalarField:
    """L F = S-hat(J, J L_{v_F} J)."""
    direction = hamiltonian_deformation(omega, J, F)
    if mode == "finite_difference":
        return scalar_hat_fd(omega, J, direction, h)
    if mode == "via_lambda":
        return scalar_hat_via_lambda(omega, J, direction)
    raise ValueError(f"unknown mode '{mode}'")


def check_LS2(omega: FormField, J, F: ScalarField, G: ScalarField, tol: float = 1e-6, h: float = 1e-4,
              seed: int | None = None) -> ResidualReport:
    t0 = time.perf_counter()
    rho = liouville(omega)
    LF = scalar_L_operator(omega, J, F, h=h)
    LG = scalar_L_operator(omega, J, G, h=h)
    AF = lie_derivative(hamiltonian_vf(F, omega), J)
    AG = lie_derivative(hamiltonian_vf(G, omega), J)
    pair = ScalarField(omega.geom, 0.5 * _tr2(AF, AG))
    lhs = integrate_density(LF * G, rho)
    rhs = integrate_density(pair, rho)
    other = integrate_density(LG * F, rho)
    scale = max(abs_integral(LF * G, rho), abs_integral(pair, rho), abs_integral(LG * F, rho))
    parts = {"pairing": relative(lhs - rhs, scale), "symmetry": relative(lhs - other, scale)}
    return combine("scalar_operator_pairing", parts, tol, seed=seed, details={"sides": [lhs, rhs, other]},
                   runtime=time.perf_counter() - t0)


def harmonic_solve(omega: FormField, J, Jhat, tol: float = 1e-10, maxiter: int = 500) -> ScalarField:
    """Mean-zero H with S-hat(J, Jhat - J L_{v_H} J) = 0 (Krylov on the fourth-order operator)."""
    g = omega.geom
    rho = liouville(omega)
    rhs = scalar_hat_via_lambda(omega, J, Jhat)

    def apply(vec):
        u = ScalarField(g, g.from_vec(vec))
        return g.to_vec(scalar_L_operator(omega, J, u, mode="via_lambda").values)

    def precond(vec):
        return g.to_vec(g.spectral_apply(g.from_vec(vec), lambda lam: 1.0 / (lam * lam + lam + 1.0)))

    sol = krylov(apply, g.to_vec(rhs.values), precond, tol=tol, maxiter=maxiter)
    H = ScalarField(g, g.from_vec(sol))
    return H - integrate_density(H, rho) / integrate(rho)


def check_harmonic_representative(omega: FormField, J, Jhat, tol: float = 1e-6, h: float = 1e-4,
                                  seed: int | None = None) -> ResidualReport:
    """Solve for H, then confirm S-hat(J, Jhat - J L_{v_H}J) = 0 by finite differences."""
    t0 = time.perf_counter()
    H = harmonic_solve(omega, J, Jhat)
    rest = as_endo(Jhat) - hamiltonian_deformation(omega, J, H)
    S_rest = scalar_hat_fd(omega, J, rest, h)
    S_full = scalar_hat_fd(omega, J, Jhat, h)
    r = relative(S_rest.norm_inf(), S_full.norm_inf())
    return ResidualReport("harmonic_representative", r, r, tol, seed=seed,
                          details={"H_sup": H.norm_inf()}, runtime=time.perf_counter() - t0)


def check_matsushima(omega: FormField, J, F: ScalarField, G: ScalarField, tol: float = 1e-6, h: float = 1e-4,
                     seed: int | None = None) -> ResidualReport:
    t0 = time.perf_counter()
    rho = liouville(omega)
    Jm = as_endo(J)
    AF = lie_derivative(hamiltonian_vf(F, omega), Jm)
    AG = lie_derivative(hamiltonian_vf(G, omega), Jm)
    lhs = omega_rho_pair(AF, AG, Jm, rho)
    S = scalar_curvature(omega, Jm)
    FG = poisson_bracket(F, G, omega)
    rhs = integrate_density(S * FG, rho)
    scale = max(abs_integral(0.5 * _tr3(AF, Jm, AG), rho), abs_integral(S * FG, rho))
    r_form = relative(lhs - rhs, scale)
    S_hat = scalar_hat_fd(omega, Jm, AF, h)
    SF = poisson_bracket(S, F, omega)
    # on flat scenes both sides vanish; the size of the direction AF then sets the scale
    r_point = relative((S_hat - SF).norm_inf(),
                       max(S_hat.norm_inf(), SF.norm_inf(), (1.0 + S.norm_inf()) * AF.norm_inf()))
    return combine("matsushima", {"bracket_pairing": r_form, "scalar_variation": r_point}, tol, seed=seed,
                   details={"pairing_sides": [lhs, rhs]}, runtime=time.perf_counter() - t0)



# ---------------------------------------------------------------------------
# two routes to the Ricci form, connection independence, the basic pairings


def _chern_pairing(geom) -> float:
    """Expected int Ric ^ omega^{n-1}/(n-1)! for the standard omega: 2 pi chi on the sphere, 0 on tori."""
    return 4.0 * np.pi if geom.normal() is not None else 0.0


def check_ricci_routes(rho: FormField, J, omega: FormField, tol: float = 1e-9,
                       seed: int | None = None) -> ResidualReport:
    """Ricci form of rho against the conformal route from omega^n/n!, its closedness and its Chern pairing."""
    from .calculus import power_over_factorial as pof
    from .curvature import ricci_conformal

    t0 = time.perf_counter()
    g = rho.geom
    base = liouville(omega)
    f = (density(rho) / density(base)).apply(np.log)
    ric = ricci_form(rho, J)
    via_conformal = ricci_conformal(ricci_form(base, J), f, J)
    scale = max(ric.norm_inf(), via_conformal.norm_inf(), 1.0)
    top = wedge(ric, pof(omega, g.n - 1))
    parts = {"conformal_route": relative((ric - via_conformal).norm_inf(), scale),
             "closed": relative(d(ric).norm_inf(), scale) if g.dim > 2 else 0.0,
             "chern_pairing": relative(integrate(top) - _chern_pairing(g), max(_top_abs(top), 1.0))}
    if g.normal() is not None:
        round_ric = ricci_form(base, standard_J(g))
        parts["round_sphere"] = relative((round_ric - omega).norm_inf(), omega.norm_inf())
    return combine("ricci_form_routes", parts, tol, seed=seed, digests={"J": digest(J), "rho": digest(rho)},
                   runtime=time.perf_counter() - t0)


def check_connection_independence(rho: FormField, J, Jhat, extra_seed: int = 0, tol: float = 1e-9,
                                  seed: int | None = None) -> ResidualReport:
    """Lambda and Ric computed with two torsion-free rho-preserving connections."""
    from .curvature import build_volume_connection, trace_free_symmetric

    g = rho.geom
    rng = np.random.default_rng(np.random.SeedSequence([int(extra_seed), 17]))
    a = np.stack([g.random_scalar(rng, 2, 0.5) for _ in range(g.D)])
    if g.normal() is not None:
        a = g.project(a)
    c1 = build_volume_connection(rho)
    c2 = build_volume_connection(rho, extra=trace_free_symmetric(g, a))
    l1, l2 = Lambda_rho(J, Jhat, c1), Lambda_rho(J, Jhat, c2)
    r1, r2 = ricci_form(rho, J, c1), ricci_form(rho, J, c2)
    parts = {"lambda": relative((l1 - l2).norm_inf(), l1.norm_inf()),
             "ricci": relative((r1 - r2).norm_inf(), max(r1.norm_inf(), 1.0)),
             "torsion": c2.torsion_residual(), "volume": c2.volume_residual()}
    return combine("lambda_connection_independence", parts, tol, seed=seed,
                   details={"connection_difference": float(np.max(np.abs(c2.S - c1.S)))})


def check_omega_rho_pairing(rho: FormField, J, J1hat, J2hat, tol: float = 1e-12,
                            seed: int | None = None) -> ResidualReport:
    """The trace pairing on tangent vectors: antisymmetric and invariant under Jhat -> J Jhat."""
    Jm = as_endo(J)
    a = omega_rho_pair(J1hat, J2hat, Jm, rho)
    b = omega_rho_pair(J2hat, J1hat, Jm, rho)
    c = omega_rho_pair(Jm @ as_endo(J1hat), Jm @ as_endo(J2hat), Jm, rho)
    scale = max(0.5 * abs_integral(_tr3(J1hat, Jm, J2hat), rho), 1e-300)
    return combine("symplectic_pairing", {"antisymmetry": relative(a + b, scale),
                                          "complex_invariance": relative(a - c, scale)}, tol, seed=seed,
                   details={"value": a})


def check_structure_form(omega: FormField, J, J1hat, J2hat, H: ScalarField, tol: float = 1e-10,
                         seed: int | None = None) -> ResidualReport:
    """The pairing on omega-compatible structures: the metric Omega(J1, -J J2) is symmetric
    and positive, and L_v J is metric-symmetric for a Hamiltonian v."""
    rho = liouville(omega)
    Jm = as_endo(J)
    g12 = omega_rho_pair(J1hat, -(Jm @ as_endo(J2hat)), Jm, rho)
    g21 = omega_rho_pair(J2hat, -(Jm @ as_endo(J1hat)), Jm, rho)
    g11 = omega_rho_pair(J1hat, -(Jm @ as_endo(J1hat)), Jm, rho)
    trace_sq = 0.5 * integrate_density(ScalarField(omega.geom, _tr2(J1hat, J1hat)), rho)
    LvJ = lie_derivative(hamiltonian_vf(H, omega), Jm)
    sym = relative((LvJ - metric_and_adjoint(omega, Jm, LvJ)).norm_inf(), LvJ.norm_inf())
    scale = max(abs(g11), abs(g12), 1e-300)
    parts = {"metric_symmetry": relative(g12 - g21, scale), "metric_is_trace": relative(g11 - trace_sq, scale),
             "positivity": 0.0 if g11 > 0 else 1.0, "hamiltonian_symmetric": sym}
    return combine("structure_symplectic_form", parts, tol, seed=seed, details={"norm_sq": g11})


def trautwein_form(lam1: FormField, lam2: FormField, omega: FormField) -> float:
    """int lam1 ^ lam2 ^ omega^{n-1}/(n-1)! for normalized primitives lam_i."""
    return integrate(wedge(wedge(lam1, lam2), power_over_factorial(omega, omega.geom.n - 1)))


def product_form(pair1, pair2, omega: FormField, J, hbar: float = 1.0) -> float:
    """Symplectic form on pairs: the trace pairing minus 2/hbar times the form on primitives.

    Each ``pair`` is (lam_hat, Jhat) with d lam_hat the variation of omega.
    """
    (l1, J1), (l2, J2) = pair1, pair2
    return omega_rho_pair(J1, J2, J, liouville(omega)) - (2.0 / hbar) * trautwein_form(l1, l2, omega)


def exactness_defect(lam: FormField, omega: FormField) -> float:
    """Largest pairing of lam ^ omega^{n-1} with a closed constant 1-form (zero iff exact on a torus)."""
    basis = _h1_basis(omega.geom)
    wn1 = power_over_factorial(omega, omega.geom.n - 1)
    vals = [abs(integrate(wedge(wedge(lam, wn1), b))) for b in basis]
    return max(vals) if vals else 0.0


def check_trautwein_form(omega: FormField, mu1: FormField, mu2: FormField, gauge: ScalarField,
                         tol: float = 1e-9, seed: int | None = None) -> ResidualReport:
    """Normalized primitives: volume tangency and exactness hold, the form is antisymmetric
    and does not change when a primitive is shifted by an exact 1-form."""
    lam1 = volume_preserving_potential(mu1, omega)
    lam2 = volume_preserving_potential(mu2, omega)
    wn1 = power_over_factorial(omega, omega.geom.n - 1)
    a = trautwein_form(lam1, lam2, omega)
    b = trautwein_form(lam2, lam1, omega)
    shifted = trautwein_form(lam1 + d(gauge), lam2, omega)
    scale = max(_top_abs(wedge(wedge(lam1, lam2), wn1)), 1e-300)
    lam_scale = max(lam1.norm_inf(), lam2.norm_inf())
    tangency = max(density(wedge(d(l), wn1)).norm_inf() for l in (lam1, lam2)) \
        / max(d(mu1).norm_inf(), d(mu2).norm_inf(), 1e-300)
    exact = max(exactness_defect(lam1, omega), exactness_defect(lam2, omega)) / (lam_scale * integrate(liouville(omega)))
    parts = {"antisymmetry": relative(a + b, scale), "primitive_gauge": relative(a - shifted, scale),
             "volume_tangency": tangency, "exactness": exact}
    return combine("pair_symplectic_form", parts, tol, seed=seed, details={"value": a})


def check_product_form(omega: FormField, J, mu1: FormField, mu2: FormField, J1hat, J2hat, hbar: float = 1.0,
                       tol: float = 1e-9, seed: int | None = None) -> ResidualReport:
    """Antisymmetry of the product form and agreement of its trace part with a direct quadrature."""
    lam1 = volume_preserving_potential(mu1, omega)
    lam2 = volume_preserving_potential(mu2, omega)
    rho = liouville(omega)
    a = product_form((lam1, J1hat), (lam2, J2hat), omega, J, hbar)
    b = product_form((lam2, J2hat), (lam1, J1hat), omega, J, hbar)
    direct = 0.5 * rho.geom.integrate_scalar(_tr3(J1hat, J, J2hat) * density(rho).values) \
        - (2.0 / hbar) * trautwein_form(lam1, lam2, omega)
    scale = max(0.5 * abs_integral(_tr3(J1hat, J, J2hat), rho)
                + (2.0 / abs(hbar)) * _top_abs(wedge(wedge(lam1, lam2), power_over_factorial(omega, omega.geom.n - 1))),
                1e-300)
    return combine("pair_product_form", {"antisymmetry": relative(a + b, scale),
                                         "direct_quadrature": relative(a - direct, scale)}, tol, seed=seed,
                   details={"value": a})


def check_scalar_total(omega: FormField, J, tol: float = 1e-9, seed: int | None = None) -> ResidualReport:
    """Total scalar curvature and its mean c_omega against the topological values."""
    from .curvature import c_omega, scalar_curvature_from_ricci

    g = omega.geom
    rho = liouville(omega)
    S = scalar_curvature(omega, J)
    total = integrate_density(S, rho)
    expected = 2.0 * _chern_pairing(g)
    V = integrate(rho)
    scale = max(abs_integral(S, rho), 1.0)
    c = c_omega(omega, J)
    parts = {"total": relative(total - expected, scale), "mean": relative(c - expected / V, scale / V),
             "ricci_trace": relative((S - scalar_curvature_from_ricci(ricci_form(rho, J), omega)).norm_inf(),
                                     max(S.norm_inf(), 1.0))}
    return combine("scalar_curvature_total", parts, tol, seed=seed, details={"total": total, "c_omega": c})


def check_scalar_operator_routes(omega: FormField, J, F: ScalarField, tol: float = 1e-6, h: float = 1e-4,
                                 seed: int | None = None) -> ResidualReport:
    """L F by differentiating the scalar curvature against the Lambda route."""
    fd = scalar_L_operator(omega, J, F, "finite_difference", h)
    lam = scalar_L_operator(omega, J, F, "via_lambda")
    r = relative((fd - lam).norm_inf(), max(fd.norm_inf(), lam.norm_inf()))
    return ResidualReport("scalar_operator_routes", r, relative((fd - lam).norm_l2(), lam.norm_l2()), tol,
                          seed=seed, digests={"F": digest(F)})
