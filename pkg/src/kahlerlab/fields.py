"""Tensor field containers.

Values are held on the backend grid with component axes first; the spectral
coefficients are one transform away (``coefficients``).  All containers are
treated as immutable: arithmetic returns new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backends import Geometry


def _mul_scalar(comps: np.ndarray, other) -> np.ndarray:
    if isinstance(other, ScalarField):
        return comps * other.values
    if np.isscalar(other):
        return comps * other
    raise TypeError(f"cannot multiply field by {type(other).__name__}")


class _Field:
    geom: Geometry
    comps: np.ndarray

    def _new(self, comps):
        raise NotImplementedError

    def _check(self, other):
        if type(other) is not type(self) or other.geom is not self.geom:
            raise TypeError("fields must share kind and backend")
        if getattr(other, "degree", None) != getattr(self, "degree", None):
            raise ValueError("form degrees differ")

    def __add__(self, other):
        self._check(other)
        return self._new(self.comps + other.comps)

    def __sub__(self, other):
        self._check(other)
        return self._new(self.comps - other.comps)

    def __neg__(self):
        return self._new(-self.comps)

    def __mul__(self, other):
        return self._new(_mul_scalar(self.comps, other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            return self._new(self.comps / other.values)
        return self._new(self.comps / other)

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.comps))) if self.comps.size else 0.0

    def norm_l2(self) -> float:
        sq = np.sum(self.comps.reshape((-1,) + self.geom.shape) ** 2, axis=0)
        return math.sqrt(max(self.geom.integrate_scalar(sq), 0.0))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.comps)))

    @property
    def coefficients(self) -> np.ndarray:
        return self.geom.to_coeffs(self.comps)


@dataclass(frozen=True, eq=False)
class ScalarField(_Field):
    geom: Geometry
    values: np.ndarray

    @property
    def comps(self):
        return self.values

    def _new(self, comps):
        return ScalarField(self.geom, comps)

    def __mul__(self, other):
        if isinstance(other, _Field) and not isinstance(other, ScalarField):
            return other * self
        return self._new(_mul_scalar(self.values, other))

    __rmul__ = __mul__

    def __add__(self, other):
        if np.isscalar(other):
            return self._new(self.values + other)
        return super().__add__(other)

    __radd__ = __add__

    def __sub__(self, other):
        if np.isscalar(other):
            return self._new(self.values - other)
        return super().__sub__(other)

    def __rsub__(self, other):
        return self._new(other - self.values)

    def apply(self, fn) -> "ScalarField":
        return self._new(fn(self.values))

    @classmethod
    def from_coefficients(cls, geom: Geometry, coeffs: np.ndarray) -> "ScalarField":
        return cls(geom, geom.from_coeffs(coeffs))

    @classmethod
    def constant(cls, geom: Geometry, c: float) -> "ScalarField":
        return cls(geom, np.full(geom.shape, float(c)))


@dataclass(frozen=True, eq=False)
class FormField(_Field):
    """k-form stored by components on increasing index tuples of the ambient frame."""

    geom: Geometry
    degree: int
    comps: np.ndarray

    def __post_init__(self):
        expected = (math.comb(self.geom.D, self.degree),) + self.geom.shape
        if self.comps.shape != expected:
            raise ValueError(f"form of degree {self.degree} needs shape {expected}, got {self.comps.shape}")

    def _new(self, comps):
        return FormField(self.geom, self.degree, comps)

    @classmethod
    def zeros(cls, geom: Geometry, degree: int) -> "FormField":
        return cls(geom, degree, geom.zeros(math.comb(geom.D, degree)))

    @classmethod
    def from_scalar(cls, f: ScalarField) -> "FormField":
        return cls(f.geom, 0, f.values[None])

    def as_scalar(self) -> ScalarField:
        if self.degree != 0:
            raise ValueError("only 0-forms convert to scalars")
        return ScalarField(self.geom, self.comps[0])

    def full(self) -> np.ndarray:
        """Antisymmetric array with one axis per slot (degree <= 2)."""
        g = self.geom
        if self.degree == 0:
            return self.comps[0]
        if self.degree == 1:
            return self.comps
        if self.degree == 2:
            W = g.zeros(g.D, g.D)
            for c, (i, j) in enumerate(g.indices(2)):
                W[i, j] = self.comps[c]
                W[j, i] = -self.comps[c]
            return W
        raise NotImplementedError("full() is provided for degree <= 2")

    @classmethod
    def from_full(cls, geom: Geometry, arr: np.ndarray, degree: int) -> "FormField":
        if degree == 0:
            return cls(geom, 0, np.asarray(arr)[None])
        if degree == 1:
            return cls(geom, 1, np.asarray(arr))
        if degree == 2:
            comps = np.stack([0.5 * (arr[i, j] - arr[j, i]) for i, j in geom.indices(2)])
            return cls(geom, 2, comps)
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class VectorField(_Field):
    geom: Geometry
    comps: np.ndarray

    def _new(self, comps):
        return VectorField(self.geom, comps)

    @classmethod
    def zeros(cls, geom: Geometry) -> "VectorField":
        return cls(geom, geom.zeros(geom.D))


@dataclass(frozen=True, eq=False)
class EndoField(_Field):
    """Pointwise matrix E with (E v)^i = E[i, j] v^j."""

    geom: Geometry
    comps: np.ndarray

    def _new(self, comps):
        return EndoField(self.geom, comps)

    @classmethod
    def zeros(cls, geom: Geometry) -> "EndoField":
        return cls(geom, geom.zeros(geom.D, geom.D))

    @classmethod
    def constant(cls, geom: Geometry, mat) -> "EndoField":
        mat = np.asarray(mat, dtype=float)
        return cls(geom, np.broadcast_to(mat.reshape(mat.shape + (1,) * len(geom.shape)), mat.shape + geom.shape).copy())

    def __matmul__(self, other):
        if isinstance(other, EndoField):
            return EndoField(self.geom, np.einsum("ij...,jk...->ik...", self.comps, other.comps))
        if isinstance(other, VectorField):
            return VectorField(self.geom, np.einsum("ij...,j...->i...", self.comps, other.comps))
        raise TypeError("EndoField @ expects EndoField or VectorField")

    @property
    def T(self) -> "EndoField":
        return EndoField(self.geom, np.swapaxes(self.comps, 0, 1))

    def trace(self) -> ScalarField:
        return ScalarField(self.geom, np.einsum("ii...->...", self.comps))


@dataclass(frozen=True, eq=False)
class TangentValuedForm(_Field):
    """Vector-valued k-form, stored as a full array (vector index, slot indices...)."""

    geom: Geometry
    degree: int
    comps: np.ndarray

    def _new(self, comps):
        return TangentValuedForm(self.geom, self.degree, comps)

    def antisymmetry_defect(self) -> float:
        if self.degree < 2:
            return 0.0
        return float(np.max(np.abs(self.comps + np.swapaxes(self.comps, 1, 2))))


@dataclass(frozen=True, eq=False)
class ACStruct:
    """Almost complex structure with an optional symplectic form it is tamed by."""

    J: EndoField
    omega: FormField | None = None
    compatible: bool = False

    @property
    def geom(self) -> Geometry:
        return self.J.geom

    def defects(self) -> dict:
        from .calculus import endo_identity

        g = self.geom
        sq = self.J @ self.J
        out = {"square": float(np.max(np.abs(sq.comps + endo_identity(g).comps)))}
        if self.omega is not None:
            W = self.omega.full()
            JW = np.einsum("ab...,ac...,bd...->cd...", W, self.J.comps, self.J.comps)
            out["compat"] = float(np.max(np.abs(JW - W)))
            G = np.einsum("ab...,bc...->ac...", W, self.J.comps)
            out["tame_min"] = float(np.min(_min_tangent_eig(g, 0.5 * (G + np.swapaxes(G, 0, 1)))))
        return out

    def validate(self, tol: float = 1e-10) -> "ACStruct":
        d = self.defects()
        if d["square"] > tol:
            raise ValueError(f"J^2 + 1 defect {d['square']:.2e} exceeds {tol:.0e}")
        if self.omega is not None:
            if d["tame_min"] <= 0:
                raise ValueError("J is not tamed by omega")
            if self.compatible and d["compat"] > tol:
                raise ValueError(f"J is not omega-compatible (defect {d['compat']:.2e})")
        return self


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Tangent vector to the space of almost complex structures at ``base``."""

    Jhat: EndoField
    base: ACStruct | None = None
    symmetric: bool = False

    def defects(self, J: EndoField | None = None) -> dict:
        J = J if J is not None else self.base.J
        anti = self.Jhat @ J + J @ self.Jhat
        out = {"anticommute": anti.norm_inf()}
        if self.base is not None and self.base.omega is not None:
            from .calculus import metric_and_adjoint

            adj = metric_and_adjoint(self.base.omega, self.base.J, self.Jhat)
            out["symmetric"] = (self.Jhat - adj).norm_inf()
        return out


def as_endo(x) -> EndoField:
    if isinstance(x, EndoField):
        return x
    if isinstance(x, ACStruct):
        return x.J
    if isinstance(x, Perturbation):
        return x.Jhat
    raise TypeError(f"expected an endomorphism field, got {type(x).__name__}")


def _min_tangent_eig(geom: Geometry, S: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a symmetric tangent matrix field on the tangent planes."""
    nrm = geom.normal()
    if nrm is not None:
        big = np.einsum("a...,b...->ab...", nrm, nrm) * (1.0 + np.max(np.abs(S)))
        S = S + big
    Sm = np.moveaxis(S, (0, 1), (-2, -1))
    return np.linalg.eigvalsh(Sm)[..., 0]


@dataclass
class Scene:
    """Convenience bundle: backend, symplectic form, J and reference volume."""

    geom: Geometry
    omega: FormField
    J: EndoField
    rho: FormField
    meta: dict = field(default_factory=dict)

    @property
    def ac(self) -> ACStruct:
        return ACStruct(self.J, self.omega, compatible=True)
