"""Exterior calculus, metric constructions and Poisson solves on any backend.

Conventions (fixed once, used everywhere):

* Hamiltonian vector fields satisfy iota(v_H) omega = dH.
* The metric of a tame pair is g(u, v) = (omega(u, Jv) + omega(v, Ju)) / 2.
* Orientation is omega^n / n! > 0.
* (a o J)(u) := a(Ju) for a 1-form a.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .backends import Geometry
from .fields import EndoField, FormField, ScalarField, VectorField, as_endo


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to reach its tolerance."""


# ---------------------------------------------------------------------------
# combinatorics of increasing index tuples


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _wedge_table(D: int, j: int, k: int):
    from .backends import multi_indices

    idx_j = {t: c for c, t in enumerate(multi_indices(D, j))}
    idx_k = {t: c for c, t in enumerate(multi_indices(D, k))}
    table = []
    for I in multi_indices(D, j + k):
        terms = []
        for Jt in multi_indices(len(I), j):
            A = tuple(I[p] for p in Jt)
            B = tuple(i for i in I if i not in A)
            terms.append((idx_j[A], idx_k[B], _perm_sign(A + B)))
        table.append(terms)
    return table


@lru_cache(maxsize=None)
def _d_table(D: int, k: int):
    from .backends import multi_indices

    idx_k = {t: c for c, t in enumerate(multi_indices(D, k))}
    table = []
    for I in multi_indices(D, k + 1):
        table.append([(I[m], idx_k[I[:m] + I[m + 1 :]], (-1) ** m) for m in range(k + 1)])
    return table


@lru_cache(maxsize=None)
def _contract_table(D: int, k: int):
    from .backends import multi_indices

    idx_k = {t: c for c, t in enumerate(multi_indices(D, k))}
    table = []
    for Jt in multi_indices(D, k - 1):
        terms = []
        for a in range(D):
            if a in Jt:
                continue
            I = tuple(sorted((a,) + Jt))
            terms.append((a, idx_k[I], (-1) ** I.index(a)))
        table.append(terms)
    return table


def _project_form(geom: Geometry, comps: np.ndarray, k: int) -> np.ndarray:
    if geom.normal() is None or k == 0:
        return comps
    if k == 1:
        return geom.project(comps)
    if k == 2:
        W = FormField(geom, 2, comps).full()
        W = geom.project(W)
        return FormField.from_full(geom, W, 2).comps
    # a tangent form of degree above the intrinsic dimension vanishes
    return np.zeros_like(comps)


# ---------------------------------------------------------------------------
# exterior algebra


def d(form: FormField | ScalarField) -> FormField:
    if isinstance(form, ScalarField):
        form = FormField.from_scalar(form)
    g, k = form.geom, form.degree
    if k >= g.dim:
        raise ValueError(f"degree overflow: d of a {k}-form in dimension {g.dim}")
    grad = g.deriv(form.comps)  # (D, C(D,k), grid)
    out = g.zeros(math.comb(g.D, k + 1))
    for c, terms in enumerate(_d_table(g.D, k)):
        for a, src, sgn in terms:
            out[c] += sgn * grad[a, src]
    return FormField(g, k + 1, _project_form(g, out, k + 1))


def wedge(a: FormField, b: FormField) -> FormField:
    g = a.geom
    j, k = a.degree, b.degree
    if j + k > g.dim:
        raise ValueError(f"degree overflow: {j}+{k} exceeds dimension {g.dim}")
    out = g.zeros(math.comb(g.D, j + k))
    for c, terms in enumerate(_wedge_table(g.D, j, k)):
        for ia, ib, sgn in terms:
            out[c] += sgn * a.comps[ia] * b.comps[ib]
    return FormField(g, j + k, _project_form(g, out, j + k))


def contract(v: VectorField, form: FormField) -> FormField:
    g, k = form.geom, form.degree
    if k < 1:
        raise ValueError("cannot contract a 0-form")
    out = g.zeros(math.comb(g.D, k - 1))
    for c, terms in enumerate(_contract_table(g.D, k)):
        for a, src, sgn in terms:
            out[c] += sgn * v.comps[a] * form.comps[src]
    return FormField(g, k - 1, out)


def eval_form(form: FormField, *vecs: VectorField) -> ScalarField:
    out = form
    for v in vecs:
        out = contract(v, out)
    return out.as_scalar()


def reference_volume(geom: Geometry) -> FormField:
    if geom.normal() is None:
        return FormField(geom, geom.dim, np.ones((1,) + geom.shape))
    x, y, z = geom.normal()
    return FormField(geom, 2, np.array([z, -y, x]))


def density(top: FormField) -> ScalarField:
    """Coefficient of a top-degree form relative to the reference volume."""
    g = top.geom
    if top.degree != g.dim:
        raise ValueError("density needs a top-degree form")
    if g.normal() is None:
        return ScalarField(g, top.comps[0])
    x, y, z = g.normal()
    c = top.comps
    return ScalarField(g, c[2] * x - c[1] * y + c[0] * z)


def volume_form(s: ScalarField | float, geom: Geometry | None = None) -> FormField:
    if isinstance(s, ScalarField):
        return reference_volume(s.geom) * s
    return reference_volume(geom) * float(s)


def integrate(top: FormField) -> float:
    if top.degree != top.geom.dim:
        raise ValueError("integrate expects a top-degree form")
    return top.geom.integrate_scalar(density(top).values)


def integrate_density(f: ScalarField, rho: FormField) -> float:
    """Integral of f against the volume form rho."""
    return f.geom.integrate_scalar(f.values * density(rho).values)


def mean(f: ScalarField, rho: FormField) -> float:
    return integrate_density(f, rho) / integrate(rho)


def power_over_factorial(omega: FormField, k: int) -> FormField:
    """omega^k / k!  (k = 0 gives the constant 0-form 1)."""
    g = omega.geom
    out = FormField(g, 0, np.ones((1,) + g.shape))
    for _ in range(k):
        out = wedge(out, omega)
    return out * (1.0 / math.factorial(k))


def liouville(omega: FormField) -> FormField:
    return power_over_factorial(omega, omega.geom.n)


# ---------------------------------------------------------------------------
# standard data


def standard_omega(geom: Geometry) -> FormField:
    return FormField.from_full(geom, _bcast(geom, geom.standard_omega()), 2)


def standard_J(geom: Geometry) -> EndoField:
    return EndoField(geom, _bcast(geom, geom.standard_J()))


def _bcast(geom: Geometry, arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.shape[-len(geom.shape):] == geom.shape:
        return arr
    return np.broadcast_to(arr.reshape(arr.shape + (1,) * len(geom.shape)), arr.shape + geom.shape).copy()


def endo_identity(geom: Geometry) -> EndoField:
    """Identity on tangent spaces (the tangential projector on the sphere)."""
    if geom.normal() is None:
        return EndoField(geom, geom.identity())
    return EndoField(geom, geom.projector.copy())


def one_form_circ(a: FormField, J) -> FormField:
    """(a o J)(u) = a(Ju)."""
    J = as_endo(J)
    return FormField(a.geom, 1, np.einsum("i...,ij...->j...", a.comps, J.comps))


def apply_endo(E, v: VectorField) -> VectorField:
    return as_endo(E) @ v


def dot(u: VectorField, v: VectorField) -> ScalarField:
    return ScalarField(u.geom, np.einsum("i...,i...->...", u.comps, v.comps))


def pair(a: FormField, v: VectorField) -> ScalarField:
    return ScalarField(v.geom, np.einsum("i...,i...->...", a.comps, v.comps))


# ---------------------------------------------------------------------------
# pointwise linear algebra on tangent planes


def _mat_last(A: np.ndarray) -> np.ndarray:
    return np.moveaxis(A, (0, 1), (-2, -1))


def _mat_first(A: np.ndarray) -> np.ndarray:
    return np.moveaxis(A, (-2, -1), (0, 1))


def _nn(geom: Geometry) -> np.ndarray | None:
    n = geom.normal()
    if n is None:
        return None
    return np.einsum("a...,b...->ab...", n, n)


def tangent_solve(geom: Geometry, M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve M x = b on tangent planes (x tangent) for (D, D, grid) M and (D, grid) b."""
    nn = _nn(geom)
    A = M if nn is None else M + nn
    x = np.linalg.solve(_mat_last(A), np.moveaxis(b, 0, -1)[..., None])[..., 0]
    return np.moveaxis(x, -1, 0)


def tangent_inv(geom: Geometry, M: np.ndarray) -> np.ndarray:
    nn = _nn(geom)
    A = M if nn is None else M + nn
    inv = _mat_first(np.linalg.inv(_mat_last(A)))
    return inv if nn is None else inv - nn


def tangent_det(geom: Geometry, M: np.ndarray) -> np.ndarray:
    nn = _nn(geom)
    A = M if nn is None else M + nn
    return np.linalg.det(_mat_last(A))


def tangent_inv_sqrt(geom: Geometry, M: np.ndarray) -> np.ndarray:
    """M^{-1/2} on tangent planes (M near the identity).

    Newton-Schulz iteration when M is close to the identity, eigendecomposition otherwise.
    """
    nn = _nn(geom)
    A = _mat_last(M if nn is None else M + nn)
    eye = np.eye(A.shape[-1])
    if np.max(np.abs(A - eye)) < 0.5:
        X = np.broadcast_to(eye, A.shape).copy()
        for _ in range(60):
            X_new = 0.5 * X @ (3.0 * eye - A @ X @ X)
            step = np.max(np.abs(X_new - X))
            X = X_new
            if step < 1e-15:
                break
        R = X
    else:
        w, V = np.linalg.eig(A)
        if np.any(w.real <= 0):
            raise ValueError("matrix square root undefined: non-positive eigenvalue")
        R = np.einsum("...ij,...j,...jk->...ik", V, w ** -0.5, np.linalg.inv(V), optimize=True).real
    R = _mat_first(R)
    return R if nn is None else R - nn


# ---------------------------------------------------------------------------
# connections and Lie derivatives


def cov_ref(geom: Geometry, T: np.ndarray, nidx: int) -> np.ndarray:
    """Reference covariant derivative; the direction index is prepended."""
    out = geom.deriv(T)
    if geom.normal() is not None and nidx > 0:
        out = geom.project(out, axes=range(1, 1 + nidx))
    return out


def nabla_vector(v: VectorField) -> EndoField:
    """B with B[i, j] = (nabla_j v)^i for the reference connection."""
    dv = cov_ref(v.geom, v.comps, 1)  # [j, i]
    return EndoField(v.geom, np.swapaxes(dv, 0, 1))


def lie_derivative(v: VectorField, t):
    """Lie derivative of a form (Cartan formula) or of an endomorphism field."""
    if isinstance(t, ScalarField):
        return pair(d(t), v)
    if isinstance(t, FormField):
        g = t.geom
        if t.degree == 0:
            return FormField.from_scalar(pair(d(t), v))
        out = d(contract(v, t))
        if t.degree < g.dim:
            out = out + contract(v, d(t))
        return out
    E = as_endo(t)
    g = E.geom
    nabE = cov_ref(g, E.comps, 2)
    B = nabla_vector(v).comps
    dvE = np.einsum("k...,kij...->ij...", v.comps, nabE)
    comm = np.einsum("ik...,kj...->ij...", B, E.comps) - np.einsum("ik...,kj...->ij...", E.comps, B)
    return EndoField(g, dvE - comm)


def divergence(v: VectorField, rho: FormField) -> ScalarField:
    """f_v with d iota(v) rho = f_v rho."""
    return density(d(contract(v, rho))) / density(rho)


# ---------------------------------------------------------------------------
# symplectic and metric constructions


def hamiltonian_vf(H: ScalarField, omega: FormField) -> VectorField:
    g = H.geom
    W = omega.full()
    dH = d(H).comps
    return VectorField(g, tangent_solve(g, np.swapaxes(W, 0, 1), dH))


def poisson_bracket(F: ScalarField, G: ScalarField, omega: FormField) -> ScalarField:
    return eval_form(omega, hamiltonian_vf(F, omega), hamiltonian_vf(G, omega))


def vf_from_alpha(alpha: FormField, rho: FormField) -> VectorField:
    """The vector field Y with iota(Y) rho = d alpha."""
    g = rho.geom
    if alpha.degree != g.dim - 2:
        raise ValueError("alpha must have degree 2n-2")
    if np.min(density(rho).values) <= 0:
        raise ValueError("volume form must be positive")
    beta = d(alpha).comps
    cols = []
    for a in range(g.D):
        e = np.zeros((g.D,) + g.shape)
        e[a] = 1.0
        cols.append(contract(VectorField(g, e), rho).comps)
    A = np.stack(cols, axis=1)  # (C, D, grid)
    AtA = np.einsum("ca...,cb...->ab...", A, A)
    Atb = np.einsum("ca...,c...->a...", A, beta)
    return VectorField(g, tangent_solve(g, AtA, Atb))


def metric_matrix(omega: FormField, J) -> np.ndarray:
    W = omega.full()
    WJ = np.einsum("ab...,bc...->ac...", W, as_endo(J).comps)
    return 0.5 * (WJ + np.swapaxes(WJ, 0, 1))


def metric_and_adjoint(omega: FormField, J, e) -> EndoField:
    """Pointwise adjoint of ``e`` for the metric (omega(u,Jv) + omega(v,Ju))/2."""
    g = omega.geom
    G = metric_matrix(omega, J)
    Ginv = tangent_inv(g, G)
    E = as_endo(e).comps
    return EndoField(g, np.einsum("ab...,cb...,cd...->ad...", Ginv, E, G, optimize=True))


def metric_inner(omega: FormField, J, u: VectorField, v: VectorField) -> ScalarField:
    G = metric_matrix(omega, J)
    return ScalarField(u.geom, np.einsum("a...,ab...,b...->...", u.comps, G, v.comps, optimize=True))


def covector_norm_sq(a: FormField, omega: FormField, J) -> ScalarField:
    g = a.geom
    Ginv = tangent_inv(g, metric_matrix(omega, J))
    return ScalarField(g, np.einsum("a...,ab...,b...->...", a.comps, Ginv, a.comps, optimize=True))


def omega_rho_pair(J1hat, J2hat, J, rho: FormField) -> float:
    """Omega_rho(J1hat, J2hat) = 1/2 int tr(J1hat J J2hat) rho."""
    A, B, Jm = as_endo(J1hat), as_endo(J2hat), as_endo(J)
    tr = np.einsum("ab...,bc...,ca...->...", A.comps, Jm.comps, B.comps, optimize=True)
    return 0.5 * integrate_density(ScalarField(A.geom, tr), rho)


def trace_pair(A, B, rho: FormField) -> float:
    """int tr(A B) rho."""
    tr = np.einsum("ab...,ba...->...", as_endo(A).comps, as_endo(B).comps)
    return integrate_density(ScalarField(as_endo(A).geom, tr), rho)


def l2_inner_endo(A, B, omega: FormField, J, rho: FormField) -> float:
    """<A, B> = int tr(A* B) rho with the adjoint taken for g = omega(., J.)."""
    Astar = metric_and_adjoint(omega, J, A)
    return trace_pair(Astar, B, rho)


# ---------------------------------------------------------------------------
# elliptic solves


def krylov(apply, rhs_vec: np.ndarray, precond=None, tol: float = 1e-10, maxiter: int = 500,
           restart: int = 80, atol: float = 0.0) -> np.ndarray:
    """Preconditioned GMRES; raises SolverError if the residual stays above max(tol |rhs|, atol)."""
    n = rhs_vec.size
    A = LinearOperator((n, n), matvec=apply, dtype=float)
    M = LinearOperator((n, n), matvec=precond, dtype=float) if precond is not None else None
    bnorm = np.linalg.norm(rhs_vec)
    if bnorm == 0:
        return np.zeros(n)
    x, info = gmres(A, rhs_vec, M=M, rtol=tol, atol=atol, restart=restart, maxiter=maxiter)
    res = np.linalg.norm(apply(x) - rhs_vec) / bnorm
    if not np.isfinite(res) or res > max(10 * tol, 1e-14, 10 * atol / bnorm):
        raise SolverError(f"Krylov solve stalled at relative residual {res:.2e} (info={info})")
    return x


def laplace_beltrami(u: ScalarField, G: np.ndarray | None = None) -> ScalarField:
    """Positive Laplacian d*d u for the metric G (reference metric when None)."""
    g = u.geom
    if G is None:
        return ScalarField(g, g.laplacian(u.values))
    sqrtg = np.sqrt(tangent_det(g, G))
    X = tangent_solve(g, G, g.grad(u.values)) * sqrtg
    div = np.einsum("kk...->...", g.deriv(X))
    return ScalarField(g, -div / sqrtg)


def remove_mean(f: ScalarField, rho: FormField) -> ScalarField:
    return f - mean(f, rho)


def solve_elliptic(op, rhs: ScalarField, shift: float = 0.0, tol: float = 1e-10, maxiter: int = 500,
                   x0_scale: float = 1.0, atol: float = 0.0) -> ScalarField:
    """Solve op(u) = rhs with a reference (Delta + shift)^{-1} preconditioner."""
    g = rhs.geom

    def sym(lam):
        s = lam + shift
        return np.where(np.abs(s) > 1e-12, 1.0 / np.where(np.abs(s) > 1e-12, s, 1.0), x0_scale)

    def apply(vec):
        return g.to_vec(op(ScalarField(g, g.from_vec(vec))).values)

    def precond(vec):
        return g.to_vec(g.spectral_apply(g.from_vec(vec), sym))

    sol = krylov(apply, g.to_vec(rhs.values), precond, tol=tol, maxiter=maxiter, atol=atol)
    return ScalarField(g, g.from_vec(sol))


def poisson_solve(rhs: ScalarField, metric: np.ndarray | None = None, volume: FormField | None = None,
                  tol: float = 1e-10, maxiter: int = 500) -> ScalarField:
    """Mean-zero u with d*du = rhs; d* for ``metric`` (reference metric when None)."""
    g = rhs.geom
    if metric is None:
        vol = volume if volume is not None else reference_volume(g)
        if abs(integrate_density(rhs, reference_volume(g))) > 1e-10 * max(1.0, rhs.norm_inf()) * g.volume:
            raise ValueError("right-hand side must have zero mean")
        u = ScalarField(g, g.inv_laplacian(rhs.values))
        return remove_mean(u, vol)
    vol_g = volume_form(ScalarField(g, np.sqrt(tangent_det(g, metric))))
    if abs(integrate_density(rhs, vol_g)) > 1e-10 * max(1.0, rhs.norm_inf()) * integrate(vol_g):
        raise ValueError("right-hand side must have zero mean for the metric volume")
    u = solve_elliptic(lambda w: laplace_beltrami(w, metric), rhs, tol=tol, maxiter=maxiter)
    return remove_mean(u, volume if volume is not None else vol_g)
