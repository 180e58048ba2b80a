"""Model geometries: flat tori (Fourier) and the round unit sphere (spherical harmonics).

Every backend exposes the same small surface used by the calculus layer:
grid values with component axes first, a componentwise derivative with the
direction index prepended, tangential projection, quadrature weights for the
reference volume, and a spectral Laplacian with its inverse.

On the sphere all tensors live in ambient R^3 components and are kept tangent
by projecting every slot with P = I - n n^T.
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


def multi_indices(D: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(D), k))


class Geometry:
    """Common interface; concrete subclasses fill in the transforms."""

    kind: str = "abstract"
    n: int
    D: int
    shape: tuple[int, ...]
    resolution: int

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def ncomp(self) -> int:
        return int(np.prod(self.shape))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "resolution": int(self.resolution)}

    # indices of k-forms stored by increasing ambient index tuples
    @cached_property
    def _index_cache(self) -> dict:
        return {k: multi_indices(self.D, k) for k in range(self.D + 1)}

    def indices(self, k: int) -> list[tuple[int, ...]]:
        return self._index_cache[k]

    def integrate_scalar(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * f))

    @property
    def volume(self) -> float:
        return float(np.sum(self.weights * np.ones(self.shape)))

    def grad(self, f: np.ndarray) -> np.ndarray:
        return self.deriv(f)

    def project(self, T: np.ndarray, axes=None) -> np.ndarray:
        return T

    def zeros(self, *comp_shape: int) -> np.ndarray:
        return np.zeros(tuple(comp_shape) + self.shape)

    def identity(self) -> np.ndarray:
        eye = np.eye(self.D).reshape((self.D, self.D) + (1,) * len(self.shape))
        return np.broadcast_to(eye, (self.D, self.D) + self.shape).copy()


class Torus(Geometry):
    """(R/2piZ)^{2n} with a uniform grid of ``grid`` points per axis.

    ``resolution`` is the largest Fourier mode per axis that random data may
    carry; the default grid is twice that, which covers 3/2 padding.
    """

    def __init__(self, n: int = 1, resolution: int | None = None, grid: int | None = None):
        if n not in (1, 2):
            raise ValueError("torus backends are T^2 (n=1) or T^4 (n=2)")
        self.n = n
        self.D = 2 * n
        self.kind = "torus2" if n == 1 else "torus4"
        self.resolution = resolution if resolution is not None else (32 if n == 1 else 8)
        self.M = grid if grid is not None else 2 * self.resolution
        if self.M < 2 * self.resolution:
            raise ValueError("grid must hold at least twice the band limit")
        self.shape = (self.M,) * self.D
        self.weights = np.full(self.shape, (TWO_PI / self.M) ** self.D)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "resolution": int(self.resolution), "grid": int(self.M)}

    @cached_property
    def coords(self) -> np.ndarray:
        x = TWO_PI * np.arange(self.M) / self.M
        return np.array(np.meshgrid(*([x] * self.D), indexing="ij"))

    @cached_property
    def _wavenumbers(self) -> list[np.ndarray]:
        M, D = self.M, self.D
        ks = []
        for a in range(D):
            k = np.fft.rfftfreq(M, 1.0 / M) if a == D - 1 else np.fft.fftfreq(M, 1.0 / M)
            shape = [1] * D
            shape[a] = k.size
            ks.append(k.reshape(shape))
        return ks

    @cached_property
    def _dk(self) -> list[np.ndarray]:
        # derivative symbols with the Nyquist mode removed
        out = []
        for k in self._wavenumbers:
            kk = k.copy()
            kk[np.abs(kk) >= self.M / 2] = 0.0
            out.append(1j * kk)
        return out

    @cached_property
    def _ksq(self) -> np.ndarray:
        return sum(k**2 for k in self._wavenumbers)

    def _fft(self, T):
        return np.fft.rfftn(T, axes=tuple(range(-self.D, 0)))

    def _ifft(self, F):
        return np.fft.irfftn(F, s=self.shape, axes=tuple(range(-self.D, 0)))

    def deriv(self, T: np.ndarray) -> np.ndarray:
        F = self._fft(T)
        return np.stack([self._ifft(F * dk) for dk in self._dk])

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Positive Laplacian d*d for the flat metric."""
        return self._ifft(self._fft(f) * self._ksq)

    def inv_laplacian(self, f: np.ndarray) -> np.ndarray:
        F = self._fft(f)
        ksq = self._ksq.copy()
        ksq.flat[0] = 1.0
        F = F / ksq
        F[(0,) * self.D] = 0.0
        return self._ifft(F)

    def smooth(self, f: np.ndarray, band: int | None = None) -> np.ndarray:
        band = self.resolution if band is None else band
        mask = np.ones(1)
        for k in self._wavenumbers:
            mask = mask * (np.abs(k) <= band)
        return self._ifft(self._fft(f) * mask)

    def zero_mode(self, f: np.ndarray) -> np.ndarray:
        return np.mean(f, axis=tuple(range(-self.D, 0)))

    # spectral coefficients: normalized complex rfft coefficients
    def to_coeffs(self, f: np.ndarray) -> np.ndarray:
        return self._fft(f) / self.ncomp

    def from_coeffs(self, c: np.ndarray) -> np.ndarray:
        return self._ifft(c * self.ncomp)

    def coeff_vector(self, f: np.ndarray) -> np.ndarray:
        c = self.to_coeffs(f)
        return np.concatenate([c.real.ravel(), c.imag.ravel()])

    def from_coeff_vector(self, v: np.ndarray) -> np.ndarray:
        half = v.size // 2
        cshape = self._ksq.shape
        return self.from_coeffs((v[:half] + 1j * v[half:]).reshape(cshape))

    # linear-solver space: grid values, spectral preconditioning
    def to_vec(self, f):
        return np.asarray(f, dtype=float).ravel()

    def from_vec(self, v):
        return np.asarray(v).reshape(self.shape)

    def spectral_apply(self, f: np.ndarray, symbol) -> np.ndarray:
        """Apply a radial Fourier multiplier given as a function of |k|^2."""
        return self._ifft(self._fft(f) * symbol(self._ksq))

    def laplace_eigenvalues(self) -> np.ndarray:
        return np.sort(self._ksq.ravel())

    def mode_field(self, k, kind: str = "cos") -> np.ndarray:
        phase = np.tensordot(np.asarray(k, dtype=float), self.coords, axes=(0, 0))
        return np.cos(phase) if kind == "cos" else np.sin(phase)

    def random_scalar(self, rng: np.random.Generator, band: int = 3, amp: float = 1.0) -> np.ndarray:
        """Smooth random field with modes |k|_inf <= band, decaying spectrum, sup norm ``amp``."""
        F = np.zeros(self.shape, dtype=complex)
        for k in itertools.product(range(-band, band + 1), repeat=self.D):
            if all(c == 0 for c in k):
                continue
            if next(c for c in k if c != 0) < 0:
                continue
            scale = math.exp(-0.5 * sum(c * c for c in k))
            a, b = rng.normal(size=2) * scale
            # a cos(k.x) + b sin(k.x) = Re((a - ib) e^{ik.x})
            F[tuple(np.mod(k, self.M))] += 0.5 * (a - 1j * b)
            F[tuple(np.mod(np.negative(k), self.M))] += 0.5 * (a + 1j * b)
        out = np.fft.ifftn(F).real * F.size
        return _normalize_sup(out, amp)

    def standard_J(self) -> np.ndarray:
        J = np.zeros((self.D, self.D))
        for a in range(self.n):
            J[2 * a + 1, 2 * a] = 1.0
            J[2 * a, 2 * a + 1] = -1.0
        return J

    def standard_omega(self) -> np.ndarray:
        """Matrix W with omega(u, v) = u^T W v for omega = sum dx_{2a} ^ dx_{2a+1}."""
        return -self.standard_J()

    def normal(self):
        return None


def _normalize_sup(f: np.ndarray, amp: float) -> np.ndarray:
    """Rescale so that max |f| = amp (random fields are specified by sup norm)."""
    m = np.max(np.abs(f))
    return f * (amp / m) if m > 0 else f


def _gauss_legendre(nlat: int):
    x, w = np.polynomial.legendre.leggauss(nlat)
    order = np.argsort(-x)  # north to south
    return x[order], w[order]


class Sphere(Geometry):
    """Round unit sphere on a Gauss-Legendre x uniform-longitude grid.

    ``resolution`` is the spherical-harmonic truncation degree L used by every
    transform. The grid carries roughly 3L/2 latitudes so that products of
    two band-L fields are integrated exactly.
    """

    kind = "sphere"

    def __init__(self, resolution: int = 24, nlat: int | None = None):
        self.n = 1
        self.D = 3
        self.resolution = L = int(resolution)
        self.nlat = nlat if nlat is not None else (3 * L) // 2 + 2
        if self.nlat < L + 1:
            raise ValueError("need at least L+1 latitudes")
        self.nlon = 2 * self.nlat
        self.shape = (self.nlat, self.nlon)
        x, w = _gauss_legendre(self.nlat)
        self.cos_theta = x
        self.sin_theta = np.sqrt(1.0 - x**2)
        self.phi = TWO_PI * np.arange(self.nlon) / self.nlon
        self._wlat = w
        self.weights = np.outer(w, np.full(self.nlon, TWO_PI / self.nlon))
        self._N, self._dN = self._legendre_tables(x)
        self._scale = np.where(np.arange(L + 1) == 0, 1.0, math.sqrt(2.0))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "resolution": int(self.resolution), "nlat": int(self.nlat)}

    # ---- Legendre tables -------------------------------------------------
    def _legendre_tables(self, x: np.ndarray):
        """Orthonormal associated Legendre functions and their theta derivatives.

        Returned arrays have shape (m, point, l) and vanish for l < m. With
        real harmonics Y_l0 = N_l0 and Y_l(+-m) = sqrt2 N_lm (cos, sin)(m phi)
        the set is orthonormal on the unit sphere.
        """
        L = self.resolution
        s = np.sqrt(1.0 - x**2)
        npts = x.size
        N = np.zeros((L + 1, npts, L + 1))
        dN = np.zeros((L + 1, npts, L + 1))
        pmm = np.full(npts, 1.0 / math.sqrt(4.0 * math.pi))
        dpmm = np.zeros(npts)
        for m in range(L + 1):
            if m > 0:
                c = math.sqrt((2 * m + 1) / (2.0 * m))
                pmm, dpmm = c * s * pmm, c * (x * pmm + s * dpmm)
            N[m, :, m] = pmm
            dN[m, :, m] = dpmm
            if m + 1 <= L:
                c = math.sqrt(2 * m + 3)
                N[m, :, m + 1] = c * x * pmm
                dN[m, :, m + 1] = c * (-s * pmm + x * dpmm)
            for l in range(m + 2, L + 1):
                a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                N[m, :, l] = a * (x * N[m, :, l - 1] - b * N[m, :, l - 2])
                dN[m, :, l] = a * (-s * N[m, :, l - 1] + x * dN[m, :, l - 1] - b * dN[m, :, l - 2])
        return N, dN

    # ---- geometry of the embedding ------------------------------------------
    @cached_property
    def points(self) -> np.ndarray:
        st = self.sin_theta[:, None]
        ct = self.cos_theta[:, None]
        cp, sp = np.cos(self.phi)[None, :], np.sin(self.phi)[None, :]
        return np.array([st * cp + 0 * ct, st * sp + 0 * ct, ct + 0 * cp])

    def normal(self) -> np.ndarray:
        return self.points

    @cached_property
    def e_theta(self) -> np.ndarray:
        ct = self.cos_theta[:, None]
        st = self.sin_theta[:, None]
        cp, sp = np.cos(self.phi)[None, :], np.sin(self.phi)[None, :]
        return np.array([ct * cp, ct * sp, -st + 0 * cp])

    @cached_property
    def e_phi(self) -> np.ndarray:
        cp, sp = np.cos(self.phi)[None, :], np.sin(self.phi)[None, :]
        z = np.zeros((self.nlat, 1))
        return np.array([-sp + z, cp + z, 0 * cp + z])

    @cached_property
    def projector(self) -> np.ndarray:
        nn = np.einsum("a...,b...->ab...", self.points, self.points)
        return self.identity() - nn

    def project(self, T: np.ndarray, axes=None) -> np.ndarray:
        """Project the listed component axes (default: all) onto tangent planes."""
        ncomp_axes = T.ndim - 2
        axes = range(ncomp_axes) if axes is None else axes
        nrm = self.points
        for ax in axes:
            Tm = np.moveaxis(T, ax, 0)
            nt = np.einsum("a...,a...->...", nrm.reshape((3,) + (1,) * (Tm.ndim - 3) + self.shape), Tm)
            Tm = Tm - nrm.reshape((3,) + (1,) * (Tm.ndim - 3) + self.shape) * nt[None]
            T = np.moveaxis(Tm, 0, ax)
        return T

    # ---- transforms -------------------------------------------------------
    def _analysis(self, f: np.ndarray) -> np.ndarray:
        """Grid values (..., nlat, nlon) -> complex coefficients (..., m, l)."""
        L = self.resolution
        G = np.fft.rfft(f, axis=-1)[..., : L + 1] * (TWO_PI / self.nlon)
        c = np.einsum("mil,...im->...ml", self._N, G * self._wlat[:, None])
        return c * self._scale[:, None]

    def _synthesis(self, c: np.ndarray, table=None, phi_factor=None) -> np.ndarray:
        table = self._N if table is None else table
        C = np.einsum("mil,...ml->...im", table, c * self._scale[:, None])
        if phi_factor is not None:
            C = C * phi_factor
        X = np.zeros(C.shape[:-1] + (self.nlon // 2 + 1,), dtype=complex)
        X[..., : self.resolution + 1] = C * (self.nlon / 2.0)
        X[..., 0] *= 2.0
        return np.fft.irfft(X, n=self.nlon, axis=-1)

    def smooth(self, f: np.ndarray, band: int | None = None) -> np.ndarray:
        c = self._analysis(f)
        if band is not None:
            c = c * (np.arange(self.resolution + 1)[None, :] <= band)
        return self._synthesis(c)

    def deriv(self, T: np.ndarray) -> np.ndarray:
        c = self._analysis(T)
        d_theta = self._synthesis(c, self._dN)
        m = np.arange(self.resolution + 1)
        d_phi = self._synthesis(c, phi_factor=1j * m[None, :]) / self.sin_theta[:, None]
        et = self.e_theta.reshape((3,) + (1,) * (T.ndim - 2) + self.shape)
        ep = self.e_phi.reshape((3,) + (1,) * (T.ndim - 2) + self.shape)
        return et * d_theta[None] + ep * d_phi[None]

    @cached_property
    def _ell(self) -> np.ndarray:
        return np.arange(self.resolution + 1, dtype=float)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        l = self._ell
        return self._synthesis(self._analysis(f) * (l * (l + 1))[None, :])

    def inv_laplacian(self, f: np.ndarray) -> np.ndarray:
        l = self._ell
        ev = l * (l + 1)
        ev[0] = 1.0
        c = self._analysis(f) / ev[None, :]
        c[..., 0, 0] = 0.0
        return self._synthesis(c)

    def spectral_apply(self, f: np.ndarray, symbol) -> np.ndarray:
        l = self._ell
        return self._synthesis(self._analysis(f) * symbol(l * (l + 1))[None, :])

    def laplace_eigenvalues(self) -> np.ndarray:
        l = np.arange(self.resolution + 1)
        return np.repeat(l * (l + 1.0), 2 * l + 1)

    # real coefficient packing: index l^2 + l + m
    def to_coeffs(self, f: np.ndarray) -> np.ndarray:
        c = self._analysis(f)
        L = self.resolution
        out = np.zeros(f.shape[:-2] + ((L + 1) ** 2,))
        for l in range(L + 1):
            out[..., l * l + l] = c[..., 0, l].real
            for m in range(1, l + 1):
                out[..., l * l + l + m] = c[..., m, l].real
                out[..., l * l + l - m] = -c[..., m, l].imag
        return out

    def _unpack(self, v: np.ndarray) -> np.ndarray:
        L = self.resolution
        c = np.zeros(v.shape[:-1] + (L + 1, L + 1), dtype=complex)
        for l in range(L + 1):
            c[..., 0, l] = v[..., l * l + l]
            for m in range(1, l + 1):
                c[..., m, l] = v[..., l * l + l + m] - 1j * v[..., l * l + l - m]
        return c

    def from_coeffs(self, v: np.ndarray) -> np.ndarray:
        return self._synthesis(self._unpack(np.asarray(v, dtype=float)))

    coeff_vector = to_coeffs
    from_coeff_vector = from_coeffs

    def to_vec(self, f):
        return self.to_coeffs(np.asarray(f))

    def from_vec(self, v):
        return self.from_coeffs(np.asarray(v))

    def harmonic(self, l: int, m: int) -> np.ndarray:
        if l > self.resolution or abs(m) > l:
            raise ValueError(f"harmonic ({l},{m}) outside band limit {self.resolution}")
        v = np.zeros((self.resolution + 1) ** 2)
        v[l * l + l + m] = 1.0
        return self.from_coeffs(v)

    def random_scalar(self, rng: np.random.Generator, band: int = 4, amp: float = 1.0) -> np.ndarray:
        v = np.zeros((self.resolution + 1) ** 2)
        for l in range(1, min(band, self.resolution) + 1):
            v[l * l : (l + 1) ** 2] = rng.normal(size=2 * l + 1) * math.exp(-0.35 * l)
        return _normalize_sup(self.from_coeffs(v), amp)

    def standard_J(self) -> np.ndarray:
        """J u = n x u as an ambient matrix field: J_ab = -eps_abc n_c."""
        x, y, z = self.points
        zero = np.zeros_like(x)
        return np.array([[zero, -z, y], [z, zero, -x], [-y, x, zero]])

    def standard_omega(self) -> np.ndarray:
        """W with omega(u, v) = u^T W v = n . (u x v), i.e. W = -J."""
        return -self.standard_J()

    # ---- point evaluation (spectral interpolation) --------------------------
    def evaluate(self, f: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Evaluate the band-L expansion of grid values ``f`` at unit vectors ``pts`` (3, P)."""
        c = self._analysis(f)
        return self.evaluate_coeffs(c, pts)

    def evaluate_coeffs(self, c: np.ndarray, pts: np.ndarray, with_grad: bool = False):
        r = np.linalg.norm(pts, axis=0)
        x = np.clip(pts[2] / r, -1.0, 1.0)
        phi = np.arctan2(pts[1], pts[0])
        N, dN = self._legendre_tables(x)
        m = np.arange(self.resolution + 1)
        e = np.exp(1j * np.outer(phi, m))  # (P, m)
        cs = c * self._scale[:, None]
        val = np.einsum("mpl,...ml,pm->...p", N, cs, e).real
        if not with_grad:
            return val
        s = np.sqrt(np.maximum(1.0 - x**2, 1e-300))
        dth = np.einsum("mpl,...ml,pm->...p", dN, cs, e).real
        dph = np.einsum("mpl,...ml,pm->...p", N, cs, e * (1j * m)[None, :]).real / s
        et = np.array([x * np.cos(phi), x * np.sin(phi), -s])
        ep = np.array([-np.sin(phi), np.cos(phi), np.zeros_like(phi)])
        grad = et * dth[..., None, :] + ep * dph[..., None, :] if dth.ndim > 1 else et * dth + ep * dph
        return val, grad


def make_backend(kind: str, resolution: int | None = None, **kw) -> Geometry:
    if kind == "torus2":
        return Torus(1, resolution, **kw)
    if kind == "torus4":
        return Torus(2, resolution, **kw)
    if kind == "sphere":
        return Sphere(resolution if resolution is not None else 24, **kw)
    raise ValueError(f"unknown backend '{kind}' (expected torus2, torus4 or sphere)")
