"""Volume-preserving connections, the Ricci form, Lambda_rho and relatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import Geometry
from .calculus import (
    cov_ref,
    d,
    density,
    endo_identity,
    liouville,
    one_form_circ,
    power_over_factorial,
    reference_volume,
    tangent_inv_sqrt,
    wedge,
)
from .fields import EndoField, FormField, ScalarField, TangentValuedForm, as_endo


def central_difference(fn, h: float = 1e-4, richardson: bool = True):
    """d/dt fn(t) at 0 by central differences, optionally Richardson-extrapolated.

    Returns (estimate, spread) where spread is |D(h/2) - D(h)| as an error proxy.
    """
    Dh = (fn(h) - fn(-h)) * (1.0 / (2 * h))
    if not richardson:
        return Dh, None
    Dh2 = (fn(h / 2) - fn(-h / 2)) * (1.0 / h)
    est = (Dh2 * 4.0 - Dh) * (1.0 / 3.0)
    spread = Dh2 - Dh
    return est, spread


# ---------------------------------------------------------------------------
# connections


@dataclass(frozen=True, eq=False)
class CurvatureContext:
    """nabla = reference connection + S, with S[k, i, j] = (S_{e_k})^i_j."""

    geom: Geometry
    rho: FormField
    f: ScalarField
    S: np.ndarray

    def nabla_endo(self, E) -> np.ndarray:
        E = E if isinstance(E, np.ndarray) else as_endo(E).comps
        out = cov_ref(self.geom, E, 2)
        out = out + np.einsum("kia...,aj...->kij...", self.S, E) - np.einsum("ia...,kaj...->kij...", E, self.S)
        return out

    def nabla_vector(self, V) -> np.ndarray:
        out = cov_ref(self.geom, V.comps, 1)
        return out + np.einsum("kia...,a...->ki...", self.S, V.comps)

    def christoffel(self) -> np.ndarray:
        """Gamma^i_{kj} relative to the reference connection, indexed [i, k, j]."""
        return np.transpose(self.S, (1, 0, 2) + tuple(range(3, self.S.ndim)))

    def torsion_residual(self) -> float:
        return float(np.max(np.abs(self.S - np.swapaxes(self.S, 0, 2))))

    def volume_residual(self) -> float:
        """Max |nabla rho| measured against rho itself."""
        r = density(self.rho).values
        dr = self.geom.grad(r)
        trS = np.einsum("kii...->k...", self.S)
        return float(np.max(np.abs(dr - r * trS)) / np.max(np.abs(r)))

    def curvature_tensor(self) -> np.ndarray:
        """R[k, l, i, j] = (R(e_k, e_l))^i_j; intended for two-dimensional backends."""
        g = self.geom
        nS = cov_ref(g, self.S, 3)  # [m, k, i, j]
        R = nS - np.swapaxes(nS, 0, 1)  # (nabla_k S)_l - (nabla_l S)_k
        SS = np.einsum("kia...,laj...->klij...", self.S, self.S)
        R = R + SS - np.swapaxes(SS, 0, 1)
        return R + reference_curvature(g)


def reference_curvature(g: Geometry) -> np.ndarray:
    if g.normal() is None:
        return np.zeros((g.D,) * 4 + g.shape)
    P = g.projector
    # R(u, v) w = <v, w> u - <u, w> v
    return np.einsum("lj...,ik...->klij...", P, P) - np.einsum("kj...,il...->klij...", P, P)


def trace_free_symmetric(geom: Geometry, a: np.ndarray) -> np.ndarray:
    """T[k, i, j] = c^i a_k a_j with c the reference rotation of a: symmetric in (k, j), trace free."""
    c = np.einsum("ij...,j...->i...", geom.standard_J() if geom.normal() is not None
                  else _bcast_const(geom, geom.standard_J()), a)
    return np.einsum("i...,k...,j...->kij...", c, a, a, optimize=True)


def _bcast_const(geom, mat):
    return mat.reshape(mat.shape + (1,) * len(geom.shape))


def build_volume_connection(rho: FormField, extra: np.ndarray | None = None) -> CurvatureContext:
    """Torsion-free connection preserving rho: S_u v = (df(u) v + df(v) u)/(2n+1), f = log(rho/rho_ref)."""
    g = rho.geom
    r = density(rho).values
    if np.min(r) <= 0:
        raise ValueError("volume form must be positive")
    f = np.log(r)
    df = g.grad(f)
    P = endo_identity(g).comps
    S = (np.einsum("k...,ij...->kij...", df, P) + np.einsum("ik...,j...->kij...", P, df)) / (g.dim + 1)
    if extra is not None:
        S = S + extra
    return CurvatureContext(g, rho, ScalarField(g, f), S)


def _ctx(rho_or_ctx) -> CurvatureContext:
    if isinstance(rho_or_ctx, CurvatureContext):
        return rho_or_ctx
    return build_volume_connection(rho_or_ctx)


# ---------------------------------------------------------------------------
# Ricci form and Lambda


def lambda_nabla(J, ctx) -> FormField:
    """lambda(u) = tr(w -> (nabla_w J) u)."""
    ctx = _ctx(ctx)
    nabJ = ctx.nabla_endo(J)
    return FormField(ctx.geom, 1, np.einsum("iik...->k...", nabJ))


def ricci_form(rho, J, ctx: CurvatureContext | None = None) -> FormField:
    """Ric(u,v) = 1/2 tr(J R(u,v)) + 1/4 tr((nabla_u J) J (nabla_v J)) + 1/2 d lambda(u,v)."""
    ctx = ctx if ctx is not None else _ctx(rho)
    g = ctx.geom
    Jm = as_endo(J).comps
    S = ctx.S
    nabJ_ref = cov_ref(g, Jm, 2)
    nabJ = nabJ_ref + np.einsum("kia...,aj...->kij...", S, Jm) - np.einsum("ia...,kaj...->kij...", Jm, S)

    # 1/2 tr(J R(e_k, e_l)) without forming R
    T = np.einsum("ji...,lij...->l...", Jm, S)
    nT = cov_ref(g, T, 1)  # [k, l]
    trJdS = nT - np.einsum("kji...,lij...->kl...", nabJ_ref, S)
    trJSS = np.einsum("ab...,kbc...,lca...->kl...", Jm, S, S, optimize=True)
    trJR = trJdS - np.swapaxes(trJdS, 0, 1) + trJSS - np.swapaxes(trJSS, 0, 1)
    if g.normal() is not None:
        trJR = trJR + np.swapaxes(Jm, 0, 1) - Jm
    quad = np.einsum("kab...,bc...,lca...->kl...", nabJ, Jm, nabJ, optimize=True)
    lam = FormField(g, 1, np.einsum("iik...->k...", nabJ))
    body = FormField.from_full(g, 0.5 * trJR + 0.25 * quad, 2)
    if g.normal() is not None:
        body = FormField(g, 2, FormField.from_full(g, g.project(body.full()), 2).comps)
    return body + d(lam) * 0.5


def ricci_conformal(base: FormField, f: ScalarField, J) -> FormField:
    """base + 1/2 d(df o J)."""
    return base + d(one_form_circ(d(f), J)) * 0.5


def Lambda_rho(J, Jhat, ctx) -> FormField:
    """Lambda(u) = tr((nabla Jhat) u + 1/2 Jhat J nabla_u J)."""
    ctx = _ctx(ctx)
    Jm, Jh = as_endo(J).comps, as_endo(Jhat).comps
    nabJ = ctx.nabla_endo(Jm)
    nabJh = ctx.nabla_endo(Jh)
    lam = np.einsum("iik...->k...", nabJh) + 0.5 * np.einsum("ab...,bc...,kca...->k...", Jh, Jm, nabJ, optimize=True)
    return FormField(ctx.geom, 1, lam)


def renormalize(K) -> EndoField:
    """K (-K^2)^{-1/2}, the pointwise projection of a near-complex structure."""
    K = as_endo(K)
    g = K.geom
    M = -(K @ K).comps
    return EndoField(g, np.einsum("ij...,jk...->ik...", K.comps, tangent_inv_sqrt(g, M)))


def j_path(J, Jhat, t: float) -> EndoField:
    return renormalize(as_endo(J) + as_endo(Jhat) * t)


def ric_hat(rho, J, Jhat, mode: str = "finite_difference", h: float = 1e-4, ctx=None) -> FormField:
    if mode == "via_lambda":
        return d(Lambda_rho(J, Jhat, ctx if ctx is not None else rho)) * 0.5
    if mode != "finite_difference":
        raise ValueError(f"unknown mode '{mode}'")
    ctx = ctx if ctx is not None else _ctx(rho)
    est, _ = central_difference(lambda t: ricci_form(rho, j_path(J, Jhat, t), ctx), h)
    return est


def scalar_curvature(omega: FormField, J, rho: FormField | None = None) -> ScalarField:
    """S with S rho = 2 Ric ^ omega^{n-1}/(n-1)!, rho = omega^n/n!."""
    g = omega.geom
    rho_w = liouville(omega)
    rho = rho if rho is not None else rho_w
    ric = ricci_form(rho, J)
    top = wedge(ric, power_over_factorial(omega, g.n - 1))
    return density(top) * 2.0 / density(rho_w)


def scalar_curvature_from_ricci(ric: FormField, omega: FormField) -> ScalarField:
    g = omega.geom
    top = wedge(ric, power_over_factorial(omega, g.n - 1))
    return density(top) * 2.0 / density(liouville(omega))


def c_omega(omega: FormField, J) -> float:
    from .calculus import integrate_density

    rho = liouville(omega)
    S = scalar_curvature(omega, J)
    from .calculus import integrate

    return integrate_density(S, rho) / integrate(rho)


def scalar_hat_via_lambda(omega: FormField, J, Jhat) -> ScalarField:
    """Linearized scalar curvature as dLambda ^ omega^{n-1}/(n-1)! / rho (no finite differences)."""
    g = omega.geom
    lam = Lambda_rho(J, Jhat, liouville(omega))
    top = wedge(d(lam), power_over_factorial(omega, g.n - 1))
    return density(top) / density(liouville(omega))


# ---------------------------------------------------------------------------
# Nijenhuis tensor


def nijenhuis(J) -> TangentValuedForm:
    """N(u, v) = J (L_v J) u - (L_{Jv} J) u, stored as N[i, k, l] for u = e_k, v = e_l."""
    Jm = as_endo(J)
    g = Jm.geom
    J = Jm.comps
    nab = cov_ref(g, J, 2)
    A = np.einsum("ia...,lak...->ikl...", J, nab)
    B = np.einsum("ml...,mik...->ikl...", J, nab)
    N = A - B - np.swapaxes(A - B, 1, 2)
    if g.normal() is not None:
        N = g.project(N)
    return TangentValuedForm(g, 2, N)


def nijenhuis_linearization(J, Jhat, h: float = 1e-4) -> TangentValuedForm:
    est, _ = central_difference(lambda t: nijenhuis(j_path(J, Jhat, t)), h)
    return est


def reference_rho(geom: Geometry) -> FormField:
    return reference_volume(geom)
