"""Hodge-type solves: one-form splitting, the L and B operators, holomorphic
potentials and the decomposition of tangent vectors to the space of complex structures."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .backends import Geometry
from .calculus import (
    contract,
    cov_ref,
    d,
    density,
    hamiltonian_vf,
    integrate,
    integrate_density,
    krylov,
    l2_inner_endo,
    lie_derivative,
    liouville,
    metric_and_adjoint,
    metric_inner,
    one_form_circ,
    poisson_bracket,
    power_over_factorial,
    solve_elliptic,
    standard_omega,
    trace_pair,
    wedge,
)
from .curvature import Lambda_rho
from .fields import EndoField, FormField, ScalarField, VectorField, as_endo
from .identities import abs_integral
from .reports import ResidualReport, combine, relative


# ---------------------------------------------------------------------------
# splitting a 1-form


@dataclass
class SplitResult:
    """lam = -df o J + dg + harmonic, with f and g mean-zero for the passed volume."""

    f: ScalarField
    g: ScalarField
    harmonic: FormField
    residual: float


def dc_laplacian(u: ScalarField, J, omega: FormField) -> ScalarField:
    """d(du o J) ^ omega^{n-1}/(n-1)! divided by omega^n/n!.

    For a Kaehler pair this is the positive Laplacian of the metric omega(., J.).
    """
    g = u.geom
    top = wedge(d(one_form_circ(d(u), J)), power_over_factorial(omega, g.n - 1))
    return density(top) / density(liouville(omega))


def codifferential_ref(a: FormField) -> ScalarField:
    """d* of a 1-form for the reference metric (flat or round)."""
    g = a.geom
    grad = cov_ref(g, a.comps, 1)  # [k, i] = nabla_k a_i
    return ScalarField(g, -np.einsum("kk...->...", grad))


def _remove_mean(f: ScalarField, rho: FormField) -> ScalarField:
    return f - integrate_density(f, rho) / integrate(rho)


def split_one_form(lam: FormField, J, rho: FormField, omega: FormField | None = None,
                   tol: float = 1e-11) -> SplitResult:
    g = lam.geom
    omega = omega if omega is not None else standard_omega(g)
    wn1 = power_over_factorial(omega, g.n - 1)
    rhs = -(density(wedge(d(lam), wn1)) / density(liouville(omega)))
    if rhs.norm_inf() > 0:
        floor = 1e-13 * lam.norm_inf() * np.sqrt(g.volume)
        f = solve_elliptic(lambda u: dc_laplacian(u, J, omega), rhs, tol=tol, atol=floor)
    else:
        f = ScalarField(g, np.zeros(g.shape))
    f = _remove_mean(f, rho)
    beta = lam + one_form_circ(d(f), J)
    gg = ScalarField(g, g.inv_laplacian(codifferential_ref(beta).values))
    gg = _remove_mean(gg, rho)
    rest = beta - d(gg)
    if g.normal() is None:
        harmonic = FormField(g, 1, np.broadcast_to(g.zero_mode(rest.comps)[(...,) + (None,) * g.D],
                                                   rest.comps.shape).copy())
    else:
        harmonic = FormField.zeros(g, 1)
    resid = (rest - harmonic).norm_inf() / max(lam.norm_inf(), 1e-300)
    return SplitResult(f, gg, harmonic, float(resid))


# ---------------------------------------------------------------------------
# operators attached to a scene carrying a density ratio theta


def op_L(F: ScalarField, scene) -> ScalarField:
    """L F = d*dF - <v_theta, v_F>/theta."""
    om, J, th = scene.omega, scene.J, scene.theta
    vT, vF = hamiltonian_vf(th, om), hamiltonian_vf(F, om)
    return dc_laplacian(F, J, om) - metric_inner(om, J, vT, vF) / th


def op_B(F: ScalarField, scene) -> ScalarField:
    """B F = {theta, F}/theta."""
    return poisson_bracket(scene.theta, F, scene.omega) / scene.theta


def inner_J(a: ScalarField, b: ScalarField, scene) -> float:
    return integrate_density(a * b, scene.rho_J)


def system_operator(F: ScalarField, G: ScalarField, scene) -> tuple[ScalarField, ScalarField]:
    """(L F + B G - 2F, L G - B F - 2G); its kernel generates holomorphic vector fields."""
    return (op_L(F, scene) + op_B(G, scene) - F * 2.0, op_L(G, scene) - op_B(F, scene) - G * 2.0)


def _basis(geom: Geometry, band: int) -> list[np.ndarray]:
    if geom.normal() is not None:
        return [geom.harmonic(l, m) for l in range(band + 1) for m in range(-l, l + 1)]
    out = [np.ones(geom.shape)]
    for k in itertools.product(range(-band, band + 1), repeat=geom.D):
        if all(c == 0 for c in k) or next(c for c in k if c != 0) < 0:
            continue
        out += [geom.mode_field(k, "cos"), geom.mode_field(k, "sin")]
    return out


@dataclass
class KernelResult:
    pairs: list  # (F, G) ScalarField pairs, orthonormal for <.,.>_J summed over both slots
    eigenvalues: np.ndarray
    threshold: float
    asymmetry: float

    @property
    def dimension(self) -> int:
        return len(self.pairs)


def holomorphic_kernel(scene, band: int = 6, threshold: float = 1e-6) -> KernelResult:
    """Small-eigenvalue subspace of the self-adjoint system operator (Galerkin, generalized eigenproblem)."""
    g = scene.omega.geom
    basis = [ScalarField(g, b) for b in _basis(g, band)]
    nb = len(basis)
    zero = ScalarField(g, np.zeros(g.shape))
    cols = []
    for i in range(2 * nb):
        F, G = (basis[i], zero) if i < nb else (zero, basis[i - nb])
        cols.append(system_operator(F, G, scene))
    w = density(scene.rho_J).values * g.weights
    Bm = np.stack([b.values.ravel() for b in basis])  # (nb, P)
    A = np.zeros((2 * nb, 2 * nb))
    for j, (SF, SG) in enumerate(cols):
        A[:nb, j] = Bm @ (SF.values * w).ravel()
        A[nb:, j] = Bm @ (SG.values * w).ravel()
    mass1 = (Bm * w.ravel()) @ Bm.T
    M = scipy.linalg.block_diag(mass1, mass1)
    asym = float(np.max(np.abs(A - A.T)) / np.max(np.abs(A)))
    evals, evecs = scipy.linalg.eigh(0.5 * (A + A.T), M)
    cut = threshold * np.max(np.abs(evals))
    pairs = []
    for k in np.flatnonzero(np.abs(evals) < cut):
        c = evecs[:, k]
        F = ScalarField(g, np.tensordot(c[:nb], np.stack([b.values for b in basis]), axes=1))
        G = ScalarField(g, np.tensordot(c[nb:], np.stack([b.values for b in basis]), axes=1))
        pairs.append((F, G))
    return KernelResult(pairs, evals, cut, asym)


def project_off_kernel(F: ScalarField, G: ScalarField, kernel: KernelResult, scene):
    for KF, KG in kernel.pairs:
        c = (inner_J(F, KF, scene) + inner_J(G, KG, scene)) / (inner_J(KF, KF, scene) + inner_J(KG, KG, scene))
        F, G = F - KF * c, G - KG * c
    return F, G


# ---------------------------------------------------------------------------
# decompositions


@dataclass
class FanoDecomposition:
    """Jhat = L_{v_F} J + L_{J v_G} J + A (+ L_X J)."""

    F: ScalarField
    G: ScalarField
    A: EndoField
    f: ScalarField
    g: ScalarField
    X: VectorField | None = None
    diagnostics: dict = field(default_factory=dict)


def gauge_part(F: ScalarField, G: ScalarField, omega: FormField, J) -> EndoField:
    """L_{v_F + J v_G} J."""
    Jm = as_endo(J)
    w = hamiltonian_vf(F, omega) + Jm @ hamiltonian_vf(G, omega)
    return lie_derivative(w, Jm)


def _pack(geom, F, G):
    return np.concatenate([geom.to_vec(F.values), geom.to_vec(G.values)])


def _unpack(geom, vec):
    half = vec.size // 2
    return ScalarField(geom, geom.from_vec(vec[:half])), ScalarField(geom, geom.from_vec(vec[half:]))


def lambda_split(Jhat, scene) -> SplitResult:
    lam = Lambda_rho(scene.J, Jhat, scene.rho_J)
    return split_one_form(lam, scene.J, scene.rho_J, scene.omega)


def fano_decompose(Jhat, scene, kernel: KernelResult | None = None, tol: float = 1e-10,
                   maxiter: int = 40) -> FanoDecomposition:
    geom = scene.omega.geom
    sp = lambda_split(Jhat, scene)
    rhs_F, rhs_G = sp.g, sp.f
    # the right-hand side is orthogonal to the kernel, so GMRES converges on the
    # singular system; its kernel component is only reported
    kernel_component = 0.0
    if kernel is not None and kernel.pairs:
        pF, pG = project_off_kernel(rhs_F, rhs_G, kernel, scene)
        kernel_component = max((rhs_F - pF).norm_inf(), (rhs_G - pG).norm_inf()) / max(
            rhs_F.norm_inf(), rhs_G.norm_inf(), 1e-300)

    def apply(vec):
        F, G = _unpack(geom, vec)
        LF, LG, BF, BG = op_L(F, scene), op_L(G, scene), op_B(F, scene), op_B(G, scene)
        return _pack(geom, F * 2.0 - LF - BG, G * 2.0 - LG + BF)

    def sym(lam):
        gap = 2.0 - lam
        return np.where(np.abs(gap) >= 1.0, 1.0 / np.where(np.abs(gap) >= 1.0, gap, 1.0), 1.0)

    def precond(vec):
        F, G = _unpack(geom, vec)
        return _pack(geom, ScalarField(geom, geom.spectral_apply(F.values, sym)),
                     ScalarField(geom, geom.spectral_apply(G.values, sym)))

    rhs = _pack(geom, rhs_F, rhs_G)
    if np.linalg.norm(rhs) == 0:
        F = G = ScalarField(geom, np.zeros(geom.shape))
    else:
        F, G = _unpack(geom, krylov(apply, rhs, precond, tol=tol, maxiter=maxiter))
    if kernel is not None and kernel.pairs:
        F, G = project_off_kernel(F, G, kernel, scene)
    A = as_endo(Jhat) - gauge_part(F, G, scene.omega, scene.J)
    return FanoDecomposition(F, G, A, sp.f, sp.g, None,
                             {"split_residual": sp.residual, "kernel_component": kernel_component})


def ke_decompose(Jhat, omega: FormField, J, hbar: float = 1.0) -> FanoDecomposition:
    """Decomposition on a Kaehler-Einstein background with Ric = omega/hbar and rho = omega^n/n!.

    On the round sphere the Laplacian of the Kaehler metric is the reference one, so the
    two scalar equations (2/hbar - Delta) F = g and (2/hbar - Delta) G = f are solved
    spectrally with the kernel of (2/hbar - Delta) removed.
    """
    geom = omega.geom
    rho = liouville(omega)
    lam = Lambda_rho(J, Jhat, rho)
    sp = split_one_form(lam, J, rho, omega)
    c = 2.0 / hbar
    inv = lambda l: np.where(np.abs(c - l) > 1e-9, 1.0 / np.where(np.abs(c - l) > 1e-9, c - l, 1.0), 0.0)
    F = ScalarField(geom, geom.spectral_apply(sp.g.values, inv))
    G = ScalarField(geom, geom.spectral_apply(sp.f.values, inv))
    A = as_endo(Jhat) - gauge_part(F, G, omega, J)
    X = VectorField.zeros(geom)
    return FanoDecomposition(F, G, A, sp.f, sp.g, X, {"split_residual": sp.residual})


def ke_lambda_formula(F: ScalarField, G: ScalarField, omega: FormField, J, hbar: float = 1.0,
                      X: VectorField | None = None) -> FormField:
    """(2/hbar) iota(X) omega + d((2/hbar) F - d*dF) - d((2/hbar) G - d*dG) o J."""
    c = 2.0 / hbar
    out = d(F * c - dc_laplacian(F, J, omega)) - one_form_circ(d(G * c - dc_laplacian(G, J, omega)), J)
    if X is not None:
        out = out + contract(X, omega) * c
    return out


def berndtsson_gap(F: ScalarField, G: ScalarField, scene) -> float:
    om, J = scene.omega, as_endo(scene.J)
    w = hamiltonian_vf(F, om) + J @ hamiltonian_vf(G, om)
    kinetic = integrate_density(metric_inner(om, J, w, w), scene.rho_J)
    return kinetic - 2.0 * integrate_density(F * F + G * G, scene.rho_J)


def check_fgfg(F, G, Fh, Gh, scene, tol: float = 1e-7, kernel_tol: float = 1e-6,
               seed: int | None = None) -> ResidualReport:
    om, J = scene.omega, as_endo(scene.J)
    w = hamiltonian_vf(F, om) + J @ hamiltonian_vf(G, om)
    wh = hamiltonian_vf(Fh, om) + J @ hamiltonian_vf(Gh, om)
    pair = metric_inner(om, J, w, wh)
    lhs = integrate_density(pair, scene.rho_J)
    prod = F * Fh + G * Gh
    rhs = 2.0 * integrate_density(prod, scene.rho_J)
    scale = max(abs_integral(pair, scene.rho_J), 2.0 * abs_integral(prod, scene.rho_J))
    SF, SG = system_operator(F, G, scene)
    kernel_defect = max(SF.norm_inf(), SG.norm_inf()) / max(F.norm_inf() + G.norm_inf(), 1e-300)
    r = relative(lhs - rhs, scale)
    rep = ResidualReport("holomorphic_pairing", r, r, tol, seed=seed,
                         details={"lhs": lhs, "rhs": rhs, "kernel_defect": kernel_defect,
                                  "precondition": kernel_defect <= kernel_tol})
    return rep


def energy_identity(dec: FanoDecomposition, Jhat, scene, tol: float = 1e-6) -> ResidualReport:
    """int (tr(Jhat^2)/2 - f^2 - g^2) rho_J = int tr(A^2)/2 rho_J + 2 (Berndtsson gap of (F, G))."""
    rJ = scene.rho_J
    lhs = 0.5 * trace_pair(Jhat, Jhat, rJ) - integrate_density(dec.f * dec.f + dec.g * dec.g, rJ)
    a_part = 0.5 * trace_pair(dec.A, dec.A, rJ)
    gap = berndtsson_gap(dec.F, dec.G, scene)
    rhs = a_part + 2.0 * gap
    scale = 0.5 * abs(trace_pair(Jhat, Jhat, rJ)) + integrate_density(dec.f * dec.f + dec.g * dec.g, rJ)
    r = relative(lhs - rhs, scale)
    return ResidualReport("decomposition_energy", r, r, tol,
                          details={"lhs": lhs, "A_part": a_part, "gap": gap})


def decomposition_checks(dec: FanoDecomposition, Jhat, scene, tol: float = 1e-8) -> ResidualReport:
    """Structure of a decomposition: reconstruction, Lambda(J, A) = 0, symmetry of A, orthogonality."""
    om, J, rJ = scene.omega, scene.J, scene.rho_J
    gauge = gauge_part(dec.F, dec.G, om, J)
    recon = relative((as_endo(Jhat) - gauge - dec.A).norm_inf(), as_endo(Jhat).norm_inf())
    lamA = relative(Lambda_rho(J, dec.A, rJ).norm_inf(), Lambda_rho(J, Jhat, rJ).norm_inf() + as_endo(Jhat).norm_inf())
    symA = relative((dec.A - metric_and_adjoint(om, J, dec.A)).norm_inf(), as_endo(Jhat).norm_inf())
    nJ = l2_inner_endo(Jhat, Jhat, om, J, rJ)
    ortho = relative(l2_inner_endo(dec.A, gauge, om, J, rJ), nJ)
    return combine("decomposition_structure", {"reconstruction": recon, "lambda_of_A": lamA,
                                               "symmetry_of_A": symA, "orthogonality": ortho}, tol)


def check_berndtsson(scene, pairs, kernel: KernelResult, expected_dimension: int | None = None,
                     tol: float = 1e-8, seed: int | None = None) -> ResidualReport:
    """Gap nonnegative on mean-zero pairs (F, G) and zero on the holomorphic kernel.

    Each gap is divided by its own scale, the kinetic term plus 2 int (F^2 + G^2).
    """
    rJ = scene.rho_J

    def scaled_gap(F, G):
        F, G = _remove_mean(F, rJ), _remove_mean(G, rJ)
        gap = berndtsson_gap(F, G, scene)
        scale = gap + 4.0 * integrate_density(F * F + G * G, rJ)
        return gap / max(scale, 1e-300)

    random_gaps = np.array([scaled_gap(F, G) for F, G in pairs])
    kernel_gaps = np.array([scaled_gap(F, G) for F, G in kernel.pairs])
    parts = {"negative_gap": float(max(0.0, -random_gaps.min())) if random_gaps.size else 0.0,
             "kernel_gap": float(np.max(np.abs(kernel_gaps))) if kernel_gaps.size else 0.0}
    if expected_dimension is not None:
        parts["kernel_dimension"] = 0.0 if kernel.dimension == expected_dimension else 1.0
    return combine("berndtsson_gap", parts, tol, seed=seed,
                   details={"min_random_gap": float(random_gaps.min()) if random_gaps.size else None,
                            "pairs": len(pairs), "kernel_dimension": kernel.dimension,
                            "kernel_eigenvalues": np.sort(np.abs(kernel.eigenvalues))[:kernel.dimension + 2]})
