"""Weil-Petersson geometry: flat-torus Teichmueller points, the Calabi-Yau volume,
the Weil-Petersson form with its closedness and type checks, and the
Kaehler-Einstein formula evaluated through the decomposition."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .backends import Torus
from .calculus import (
    density,
    eval_form,
    hamiltonian_vf,
    integrate,
    integrate_density,
    liouville,
    omega_rho_pair,
    power_over_factorial,
    solve_elliptic,
    standard_omega,
    volume_form,
    wedge,
)
from .curvature import (
    Lambda_rho,
    central_difference,
    nijenhuis,
    nijenhuis_linearization,
    renormalize,
    ricci_form,
)
from .decomposition import dc_laplacian, ke_decompose, split_one_form
from .fields import EndoField, FormField, ScalarField, VectorField, as_endo
from .reports import ResidualReport, combine, relative, richardson_confirmed


# ---------------------------------------------------------------------------
# Teichmueller points of the flat torus


def tau_matrix(tau: complex) -> np.ndarray:
    """Constant complex structure of R^2/(Z + tau Z) written on the standard lattice."""
    a, b = tau.real, tau.imag
    if b <= 0:
        raise ValueError("tau must lie in the upper half plane")
    return np.array([[a, -(a * a + b * b)], [1.0, -a]]) / b


@dataclass(frozen=True)
class TorusTeichPoint:
    tau: complex | None = None
    matrix: tuple | None = None
    n: int = 1

    def J(self, geom: Torus | None = None) -> EndoField:
        geom = geom if geom is not None else Torus(self.n, 4)
        mat = tau_matrix(self.tau) if self.tau is not None else np.asarray(self.matrix, dtype=float)
        if not np.allclose(mat @ mat, -np.eye(geom.D), atol=1e-12):
            raise ValueError("matrix does not square to -1")
        W = standard_omega(geom).full()[(...,) + (0,) * geom.D]
        G = W @ mat
        if np.linalg.eigvalsh(0.5 * (G + G.T)).min() <= 0:
            raise ValueError("structure is not tamed by the standard symplectic form")
        return EndoField.constant(geom, mat)


def random_constant_structure(rng, n: int = 1, spread: float = 0.8) -> np.ndarray:
    """A random constant omega-compatible J on T^{2n}: J = P J0 P^{-1} with P symplectic."""
    D = 2 * n
    J0 = np.zeros((D, D))
    for a in range(n):
        J0[2 * a + 1, 2 * a], J0[2 * a, 2 * a + 1] = 1.0, -1.0
    # symplectic P = expm(J0 S) with S symmetric
    S = rng.normal(size=(D, D)) * spread / math.sqrt(D)
    S = 0.5 * (S + S.T)
    from scipy.linalg import expm

    P = expm(J0 @ S)
    return P @ J0 @ np.linalg.inv(P)


def random_constant_tangent(J: np.ndarray, rng) -> np.ndarray:
    """Constant g-symmetric Jhat anticommuting with a constant J."""
    D = J.shape[0]
    W = np.zeros((D, D))
    for a in range(D // 2):
        W[2 * a, 2 * a + 1], W[2 * a + 1, 2 * a] = 1.0, -1.0
    G = 0.5 * (W @ J + (W @ J).T)
    P = rng.normal(size=(D, D))
    P = 0.5 * (P + np.linalg.solve(G, P.T @ G))
    return 0.5 * (P + J @ P @ J)


# ---------------------------------------------------------------------------
# Calabi-Yau volume


def cy_volume(J, omega: FormField | None = None, tol: float = 1e-11) -> FormField:
    """The volume rho_J with Ric(rho_J, J) = 0 and int rho_J = int omega^n/n!."""
    J = as_endo(J)
    geom = J.geom
    omega = omega if omega is not None else standard_omega(geom)
    rho = liouville(omega)
    V = integrate(rho)
    ric = ricci_form(rho, J)
    rhs = density(wedge(ric, power_over_factorial(omega, geom.n - 1))) / density(rho) * -2.0
    if rhs.norm_inf() <= 1e-14:
        return rho
    rhs = rhs - integrate_density(rhs, rho) / V
    u = solve_elliptic(lambda w: dc_laplacian(w, J, omega), rhs, tol=tol, atol=1e-14 * math.sqrt(V))
    e = u.apply(np.exp)
    return volume_form(e * density(rho) * (V / integrate_density(e, rho)))


def cy_residual(J, rho_J: FormField) -> float:
    return ricci_form(rho_J, J).norm_inf()


# ---------------------------------------------------------------------------
# Weil-Petersson form


def _check_dbar_closed(J, Jhat, tol: float):
    J = as_endo(J)
    if J.geom.dim <= 2:
        return 0.0
    defect = nijenhuis_linearization(J, Jhat).norm_inf()
    if defect > tol:
        raise ValueError(f"tangent vector is not dbar-closed (defect {defect:.2e})")
    return defect


def wp_form(J, J1hat, J2hat, omega: FormField | None = None, rho_J: FormField | None = None,
            dbar_tol: float = 1e-6) -> float:
    """1/2 int tr(J1hat J J2hat) rho_J - int (f1 g2 - f2 g1) rho_J."""
    J = as_endo(J)
    omega = omega if omega is not None else standard_omega(J.geom)
    _check_dbar_closed(J, J1hat, dbar_tol)
    _check_dbar_closed(J, J2hat, dbar_tol)
    rho_J = rho_J if rho_J is not None else cy_volume(J, omega)
    s1 = split_one_form(Lambda_rho(J, J1hat, rho_J), J, rho_J, omega)
    s2 = split_one_form(Lambda_rho(J, J2hat, rho_J), J, rho_J, omega)
    return omega_rho_pair(J1hat, J2hat, J, rho_J) - integrate_density(s1.f * s2.g - s2.f * s1.g, rho_J)


def check_wp_type(J, J1hat, J2hat, omega=None, tol: float = 1e-10) -> ResidualReport:
    """Antisymmetry and (1,1)-type: Omega(J J1, J J2) = Omega(J1, J2)."""
    J = as_endo(J)
    a = wp_form(J, J1hat, J2hat, omega)
    b = wp_form(J, J @ as_endo(J1hat), J @ as_endo(J2hat), omega)
    c = wp_form(J, J2hat, J1hat, omega)
    scale = max(abs(a), _trace_scale(J, J1hat, J2hat, omega), 1e-300)
    return combine("weil_petersson_type", {"type_11": relative(a - b, scale), "antisymmetry": relative(a + c, scale)},
                   tol, details={"value": a})


def _trace_scale(J, J1hat, J2hat, omega) -> float:
    om = omega if omega is not None else standard_omega(as_endo(J).geom)
    A, B, Jm = as_endo(J1hat).comps, as_endo(J2hat).comps, as_endo(J).comps
    tr = np.abs(np.einsum("ab...,bc...,ca...->...", A, Jm, B, optimize=True))
    return 0.5 * integrate_density(ScalarField(om.geom, tr), liouville(om))


def constant_family(J0: np.ndarray, directions, geom: Torus, h: float = 1e-4):
    """p -> (J(p), tangents) for J(p) = renormalize(J0 + sum p_i K_i); tangents by Richardson differences."""
    base = EndoField.constant(geom, J0)
    Ks = [EndoField.constant(geom, K) if not isinstance(K, EndoField) else K for K in directions]

    def point(p):
        M = base + sum((K * float(x) for K, x in zip(Ks, p)), EndoField.zeros(geom))
        return renormalize(M)

    def family(p):
        p = np.asarray(p, dtype=float)
        tangents = []
        for i in range(len(Ks)):
            e = np.zeros(len(Ks))
            e[i] = 1.0
            est, _ = central_difference(lambda t: point(p + t * e), h)
            tangents.append(est)
        return point(p), tangents

    return family


def tau_family(tau0: complex, direction: EndoField | None, geom: Torus, h: float = 1e-4):
    """(Re tau, Im tau, s) -> renormalize(J(tau) + s K(tau)) with K the J(tau)-anticommuting part of ``direction``."""
    from .scenes import anticommuting_part

    def point(p):
        Jt = EndoField.constant(geom, tau_matrix(tau0 + complex(p[0], p[1])))
        if direction is None:
            return Jt
        return renormalize(Jt + anticommuting_part(Jt, direction) * float(p[2]))

    def family(p):
        p = np.asarray(p, dtype=float)
        tangents = []
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            est, _ = central_difference(lambda t: point(p + t * e), h)
            tangents.append(est)
        return point(p), tangents

    return family


def wp_closedness_check(family, step: float = 0.02, omega: FormField | None = None, tol: float = 1e-6,
                        pairing=None) -> ResidualReport:
    """Central-difference d(Omega)(d1, d2, d3) at steps s and s/2 around p = 0."""
    t0 = time.perf_counter()
    cache: dict = {}

    def value(p, i, j):
        key = (tuple(np.round(p, 14)), i, j)
        if key not in cache:
            J, T = family(p)
            om = omega if omega is not None else standard_omega(J.geom)
            cache[key] = (pairing or wp_form)(J, T[i], T[j], om)
        return cache[key]

    def cyclic(s):
        def partial(axis, i, j):
            e = np.zeros(3)
            e[axis] = s
            return (value(e, i, j) - value(-e, i, j)) / (2 * s)

        return partial(0, 1, 2) - partial(1, 0, 2) + partial(2, 0, 1)

    d1, d2 = cyclic(step), cyclic(step / 2)
    scale = max(abs(value(np.zeros(3), i, j)) for i, j in itertools.combinations(range(3), 2))
    extrap = (4 * d2 - d1) / 3
    ratio = abs(d1 / d2) if d2 != 0 else float("inf")
    return combine("weil_petersson_closedness", {"extrapolated": relative(extrap, scale)}, tol,
                   details={"residual_step": d1, "residual_half_step": d2, "halving_ratio": ratio,
                            "richardson_confirmed": richardson_confirmed(d1, d2, scale),
                            "scale": scale}, runtime=time.perf_counter() - t0)


def gauge_direction(J, X: VectorField) -> EndoField:
    from .calculus import lie_derivative

    return lie_derivative(X, as_endo(J))


# ---------------------------------------------------------------------------
# Kaehler-Einstein formula


@dataclass
class WPKEResult:
    value: float  # 1/2 int tr(A1 J A2) rho
    expanded: float
    lambda_form: float | None
    scale: float

    def residual(self) -> float:
        r = relative(self.value - self.expanded, self.scale)
        if self.lambda_form is not None:
            r = max(r, relative(self.value - self.lambda_form, self.scale))
        return r


def wp_ke_form(J, J1hat, J2hat, hbar: float = 1.0, omega: FormField | None = None,
               ke_tol: float = 1e-8) -> WPKEResult:
    """Evaluate the WP form on a Kaehler-Einstein background three ways.

    The A-part formula, its expansion through the decomposition potentials and,
    when both directions have vanishing f-part, the formula in terms of Lambda.
    """
    J = as_endo(J)
    geom = J.geom
    omega = omega if omega is not None else standard_omega(geom)
    rho = liouville(omega)
    if (ricci_form(rho, J) - omega * (1.0 / hbar)).norm_inf() > ke_tol:
        raise ValueError("background is not Kaehler-Einstein with the given hbar")
    d1, d2 = ke_decompose(J1hat, omega, J, hbar), ke_decompose(J2hat, omega, J, hbar)
    value = omega_rho_pair(d1.A, d2.A, J, rho)
    c = 2.0 / hbar
    lap = lambda u: dc_laplacian(u, J, omega)
    X1 = d1.X if d1.X is not None else VectorField.zeros(geom)
    X2 = d2.X if d2.X is not None else VectorField.zeros(geom)
    x_term = integrate_density(eval_form(omega, X1, X2), rho)
    expanded = (omega_rho_pair(J1hat, J2hat, J, rho) - c * x_term
                + integrate_density((lap(d1.F) - d1.F * c) * lap(d2.G) - (lap(d1.G) - d1.G * c) * lap(d2.F), rho))
    lam_val = None
    if max(d1.f.norm_inf(), d2.f.norm_inf()) <= 1e-9 * max(as_endo(J1hat).norm_inf(), as_endo(J2hat).norm_inf()):
        l1, l2 = Lambda_rho(J, J1hat, rho), Lambda_rho(J, J2hat, rho)
        top = wedge(wedge(l1, l2), power_over_factorial(omega, geom.n - 1))
        lam_val = omega_rho_pair(J1hat, J2hat, J, rho) - 0.5 * hbar * integrate(top)
    scale = max(_trace_scale(J, J1hat, J2hat, omega), abs(c * x_term), 1e-300)
    return WPKEResult(value, expanded, lam_val, scale)


# ---------------------------------------------------------------------------
# lattice diffeomorphisms of the torus


def torus_pullback_scalar(f: np.ndarray, geom: Torus, A: np.ndarray, b=None) -> np.ndarray:
    """(f o phi) for phi(x) = A x + b with A integral, computed on Fourier coefficients."""
    A = np.asarray(A, dtype=int)
    b = np.zeros(geom.D) if b is None else np.asarray(b, dtype=float)
    M = geom.M
    axes = tuple(range(-geom.D, 0))
    F = np.fft.fftn(f, axes=axes)
    freqs = np.fft.fftfreq(M, 1.0 / M).astype(int)
    K = np.stack(np.meshgrid(*([freqs] * geom.D), indexing="ij")).reshape(geom.D, -1)  # (D, M^D)
    Kp = A.T @ K
    Fl = F.reshape(F.shape[:-geom.D] + (-1,))
    size = np.max(np.abs(Fl), axis=tuple(range(Fl.ndim - 1))) if Fl.ndim > 1 else np.abs(Fl)
    keep = size > 1e-15 * max(size.max(), 1e-300)
    outside = np.any(np.abs(Kp) > M // 2 - 1, axis=0)
    if np.any(outside & (size > 1e-12 * max(size.max(), 1e-300))):
        raise ValueError("pulled-back field exceeds the grid band; refine the grid")
    keep &= ~outside
    phase = np.exp(1j * (b @ K[:, keep]))
    target = np.ravel_multi_index(tuple(Kp[:, keep] % M), (M,) * geom.D)
    out = np.zeros_like(Fl)
    out[..., target] = Fl[..., keep] * phase
    out = out.reshape(F.shape)
    return np.fft.ifftn(out, axes=tuple(range(-geom.D, 0))).real


def torus_pullback_endo(E, A, b=None) -> EndoField:
    """phi^* E (x) = A^{-1} E(phi x) A."""
    E = as_endo(E)
    g = E.geom
    A = np.asarray(A, dtype=float)
    moved = torus_pullback_scalar(E.comps, g, A.astype(int), b)
    Ainv = np.linalg.inv(A)
    return EndoField(g, np.einsum("ab,bc...,cd->ad...", Ainv, moved, A))


def torus_pullback_density(rho: FormField, A, b=None) -> FormField:
    g = rho.geom
    moved = torus_pullback_scalar(density(rho).values, g, np.asarray(A, dtype=int), b)
    return volume_form(ScalarField(g, moved * np.linalg.det(np.asarray(A, dtype=float))))


def wp_matrix_oracle(J: np.ndarray, J1hat: np.ndarray, J2hat: np.ndarray, volume: float) -> float:
    """1/2 tr(J1hat J J2hat) times the volume, for constant data."""
    return 0.5 * float(np.trace(J1hat @ J @ J2hat)) * volume


def hamiltonian_gauge(J, H: ScalarField, omega: FormField | None = None) -> EndoField:
    from .calculus import lie_derivative

    omega = omega if omega is not None else standard_omega(H.geom)
    return lie_derivative(hamiltonian_vf(H, omega), as_endo(J))


# ---------------------------------------------------------------------------
# further checks on the flat torus

SHEAR = np.array([[1, 1], [0, 1]])


def check_ricci_equivariance(rho: FormField, J, A=SHEAR, b=(0.3, 0.1), tol: float = 1e-9,
                             seed: int | None = None) -> ResidualReport:
    """Ric(phi^* rho, phi^* J) = phi^* Ric(rho, J) for an affine lattice map phi of T^2."""
    J = as_endo(J)
    if J.geom.dim != 2:
        raise ValueError("the lattice pullback of 2-forms is implemented on T^2")
    ric = ricci_form(rho, J)
    lhs = ricci_form(torus_pullback_density(rho, A, b), torus_pullback_endo(J, A, b))
    rhs = torus_pullback_density(ric, A, b)
    r = relative((lhs - rhs).norm_inf(), max(ric.norm_inf(), 1.0))
    return ResidualReport("ricci_equivariance", r, r, tol, seed=seed, details={"map": np.asarray(A).tolist(),
                                                                             "shift": list(b)})


def check_cy_volume(J, omega: FormField | None = None, tol: float = 1e-9, seed: int | None = None) -> ResidualReport:
    J = as_endo(J)
    omega = omega if omega is not None else standard_omega(J.geom)
    rho_J = cy_volume(J, omega)
    V = integrate(liouville(omega))
    ric0 = ricci_form(liouville(omega), J)
    parts = {"ricci_flat": relative(cy_residual(J, rho_J), max(ric0.norm_inf(), 1.0)),
             "total_volume": relative(integrate(rho_J) - V, V)}
    return combine("calabi_yau_volume", parts, tol, seed=seed, details={"initial_ricci": ric0.norm_inf()})


def check_torus_lambda_split(J, Jhat, omega: FormField | None = None, tol: float = 1e-9,
                             seed: int | None = None) -> ResidualReport:
    """Lambda(J, Jhat) = -df o J + dg + harmonic for the Calabi-Yau volume of J."""
    J = as_endo(J)
    omega = omega if omega is not None else standard_omega(J.geom)
    rho_J = cy_volume(J, omega)
    lam = Lambda_rho(J, Jhat, rho_J)
    sp = split_one_form(lam, J, rho_J, omega)
    from .calculus import d, one_form_circ

    recon = d(sp.g) - one_form_circ(d(sp.f), J) + sp.harmonic
    parts = {"reconstruction": relative((lam - recon).norm_inf(), lam.norm_inf()),
             "f_mean": relative(integrate_density(sp.f, rho_J), sp.f.norm_inf() * integrate(rho_J)),
             "g_mean": relative(integrate_density(sp.g, rho_J), sp.g.norm_inf() * integrate(rho_J))}
    return combine("lambda_split", parts, tol, seed=seed)


WITNESS = (np.array([[0.0, -1.0], [1.0, 0.0]]), np.diag([1.0, -1.0]), np.array([[0.0, 1.0], [1.0, 0.0]]))


def check_wp_oracle(J: np.ndarray, J1hat: np.ndarray, J2hat: np.ndarray, geom: Torus | None = None,
                    tol: float = 1e-10, seed: int | None = None) -> ResidualReport:
    """Field-level Weil-Petersson form on constant data against the matrix formula."""
    geom = geom if geom is not None else Torus(J.shape[0] // 2, 4)
    field_value = wp_form(EndoField.constant(geom, J), EndoField.constant(geom, J1hat),
                          EndoField.constant(geom, J2hat))
    oracle = wp_matrix_oracle(J, J1hat, J2hat, geom.volume)
    scale = max(abs(oracle), 0.5 * float(np.abs(J1hat).sum() * np.abs(J2hat).sum()) * geom.volume, 1e-300)
    r = relative(field_value - oracle, scale)
    return ResidualReport("weil_petersson_form", r, r, tol, seed=seed,
                          details={"field": field_value, "oracle": oracle})


def check_wp_gauge_kernel(J, Jhat, X: VectorField, omega: FormField | None = None, tol: float = 1e-9,
                          seed: int | None = None) -> ResidualReport:
    """Lie derivatives L_X J are null directions: Omega(Jhat, L_X J) = 0 for every admissible Jhat."""
    J = as_endo(J)
    gauge = gauge_direction(J, X)
    val = wp_form(J, Jhat, gauge, omega)
    scale = max(_trace_scale(J, Jhat, gauge, omega), 1e-300)
    r = relative(val, scale)
    return ResidualReport("weil_petersson_kernel", r, r, tol, seed=seed, details={"value": val, "scale": scale})


def check_dolbeault(J, X: VectorField, generic, tol: float = 1e-7, h: float = 1e-4,
                    seed: int | None = None) -> ResidualReport:
    """dbar o dbar = 0 through the linearized Nijenhuis tensor: N(J) = 0 and N'(J)(L_X J) = 0.

    ``generic`` is an anti-linear direction used as a control; its defect is reported.
    """
    J = as_endo(J)
    gauge = gauge_direction(J, X)
    N0 = nijenhuis(J).norm_inf()
    Ngauge = nijenhuis_linearization(J, gauge, h).norm_inf()
    Ngen = nijenhuis_linearization(J, generic, h).norm_inf()
    parts = {"integrable": N0, "gauge_closed": relative(Ngauge, gauge.norm_inf())}
    return combine("dolbeault_consistency", parts, tol, seed=seed,
                   details={"generic_defect": relative(Ngen, as_endo(generic).norm_inf())})


def check_wp_ke(J, J1hat, J2hat, hbar: float = 1.0, omega: FormField | None = None, tol: float = 1e-9,
                require_lambda: bool = False, seed: int | None = None) -> ResidualReport:
    """Weil-Petersson form on a Kaehler-Einstein background: A-part against its expansion and,
    when available, against the Lambda formula."""
    res = wp_ke_form(J, J1hat, J2hat, hbar, omega)
    parts = {"expansion": relative(res.value - res.expanded, res.scale)}
    if res.lambda_form is not None:
        parts["lambda_formula"] = relative(res.value - res.lambda_form, res.scale)
    elif require_lambda:
        parts["lambda_formula"] = float("inf")
    ident = "weil_petersson_ke_lambda" if require_lambda else "weil_petersson_ke"
    return combine(ident, parts, tol, seed=seed, details={"value": res.value, "expanded": res.expanded,
                                                          "lambda_form": res.lambda_form})
