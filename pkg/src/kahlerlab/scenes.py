"""Seeded random scenes: volume forms, structures, perturbations and test forms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import Geometry, Sphere, Torus, make_backend
from .calculus import (
    liouville,
    metric_and_adjoint,
    standard_J,
    standard_omega,
    volume_form,
)
from .curvature import renormalize
from .fields import EndoField, FormField, ScalarField, Scene, VectorField, as_endo


@dataclass(frozen=True)
class SceneConfig:
    """Amplitudes and bands for a random scene."""

    backend: str = "torus2"
    resolution: int | None = None
    band: int = 2
    volume_amp: float = 0.3
    structure_amp: float = 0.2
    compatible: bool = True
    volume: str = "conformal"  # or "liouville"


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def random_scalar(geom: Geometry, rng, band: int = 2, amp: float = 1.0) -> ScalarField:
    return ScalarField(geom, geom.random_scalar(rng, band, amp))


def random_vector(geom: Geometry, rng, band: int = 2, amp: float = 1.0) -> VectorField:
    comps = np.stack([geom.random_scalar(rng, band, amp) for _ in range(geom.D)])
    if geom.normal() is not None:
        comps = geom.project(comps)
    return VectorField(geom, comps)


def random_form(geom: Geometry, degree: int, rng, band: int = 2, amp: float = 1.0) -> FormField:
    if degree == 0:
        return FormField.from_scalar(random_scalar(geom, rng, band, amp))
    proto = FormField.zeros(geom, degree)
    comps = np.stack([geom.random_scalar(rng, band, amp) for _ in range(proto.comps.shape[0])])
    if geom.normal() is not None:
        from .calculus import _project_form

        comps = _project_form(geom, comps, degree)
    return FormField(geom, degree, comps)


def random_endo(geom: Geometry, rng, band: int = 2, amp: float = 1.0) -> EndoField:
    E = np.array([[geom.random_scalar(rng, band, amp) for _ in range(geom.D)] for _ in range(geom.D)])
    if geom.normal() is not None:
        E = geom.project(E)
    return EndoField(geom, E)


def anticommuting_part(J, P) -> EndoField:
    """(P + J P J)/2, the part of P that anticommutes with J."""
    J, P = as_endo(J), as_endo(P)
    return (P + J @ P @ J) * 0.5


def random_perturbation(omega: FormField, J, rng, band: int = 2, amp: float = 0.2,
                        symmetric: bool = True) -> EndoField:
    """Random Jhat with Jhat J + J Jhat = 0, g-symmetric when requested."""
    g = omega.geom
    P = random_endo(g, rng, band, amp)
    if symmetric:
        P = (P + metric_and_adjoint(omega, J, P)) * 0.5
    return anticommuting_part(J, P)


def random_structure(omega: FormField, rng, band: int = 2, amp: float = 0.2, compatible: bool = True,
                     base=None) -> EndoField:
    """renormalize(J0 + K) with K anticommuting with J0.

    With K symmetric for the metric of (omega, J0) the result is again
    omega-compatible; otherwise it is only tame for small K.
    """
    J0 = as_endo(base) if base is not None else standard_J(omega.geom)
    K = random_perturbation(omega, J0, rng, band, amp, symmetric=compatible)
    return renormalize(J0 + K)


def random_scene(cfg: SceneConfig, seed: int) -> Scene:
    geom = make_backend(cfg.backend, cfg.resolution)
    rng = rng_for(seed)
    omega = standard_omega(geom)
    J = random_structure(omega, rng, cfg.band, cfg.structure_amp, cfg.compatible) if cfg.structure_amp > 0 \
        else standard_J(geom)
    if cfg.volume == "liouville" or cfg.volume_amp == 0:
        rho = liouville(omega)
    else:
        f = random_scalar(geom, rng, cfg.band, cfg.volume_amp)
        rho = volume_form(f.apply(np.exp))
    return Scene(geom, omega, J, rho, meta={"seed": int(seed), "config": cfg})


def round_sphere(resolution: int = 24) -> Scene:
    geom = Sphere(resolution)
    omega = standard_omega(geom)
    return Scene(geom, omega, standard_J(geom), liouville(omega), meta={"kind": "round"})


def flat_torus(n: int = 1, resolution: int | None = None) -> Scene:
    geom = Torus(n, resolution)
    omega = standard_omega(geom)
    return Scene(geom, omega, standard_J(geom), liouville(omega), meta={"kind": "flat"})

