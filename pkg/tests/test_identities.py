import numpy as np
import pytest
from hypothesis import given, strategies as st

from kahlerlab import identities as idn
from kahlerlab.backends import Sphere, Torus
from kahlerlab.calculus import (
    contract,
    d,
    hamiltonian_vf,
    integrate_density,
    lie_derivative,
    liouville,
    standard_J,
    standard_omega,
)
from kahlerlab.fields import ScalarField
from kahlerlab.scenes import (
    SceneConfig,
    random_form,
    random_perturbation,
    random_scalar,
    random_scene,
    random_structure,
    random_vector,
)

from conftest import rng

S2 = Sphere(24)
T2 = Torus(1, 16)
seeds = st.integers(0, 10_000)


def sphere_scene(seed):
    return random_scene(SceneConfig("sphere", 24, band=2), seed)


def torus_scene(seed):
    return random_scene(SceneConfig("torus2", 16, band=3), seed)


@given(seeds)
def test_pairing_is_antisymmetric_and_complex_invariant(seed):
    sc = sphere_scene(seed)
    A, B = (random_perturbation(sc.omega, sc.J, rng(seed + k), 2, 0.3) for k in (1, 2))
    assert idn.check_omega_rho_pairing(sc.rho, sc.J, A, B).passed


@given(seeds)
def test_ricci_routes_on_random_torus_scenes(seed):
    sc = torus_scene(seed)
    rep = idn.check_ricci_routes(sc.rho, sc.J, sc.omega)
    assert rep.passed, rep.details


def test_ricci_routes_detect_a_non_almost_complex_J():
    sc = torus_scene(3)
    assert not idn.check_ricci_routes(sc.rho, sc.J * 1.05, sc.omega).passed


def test_sphere_chern_pairing():
    sc = sphere_scene(1)
    rep = idn.check_ricci_routes(sc.rho, sc.J, sc.omega, tol=1e-8)
    assert rep.passed and rep.details["components"]["chern_pairing"] <= 1e-10


@given(seeds, st.integers(0, 100))
def test_lambda_connection_independence(seed, extra):
    sc = sphere_scene(seed)
    Jh = random_perturbation(sc.omega, sc.J, rng(seed + 1), 2, 0.3)
    assert idn.check_connection_independence(sc.rho, sc.J, Jh, extra_seed=extra).passed


@pytest.mark.parametrize("make", [sphere_scene, torus_scene], ids=["sphere", "torus2"])
def test_lambda_identities_with_hamiltonian_field(make):
    sc = make(2)
    Jh = random_perturbation(sc.omega, sc.J, rng(3), 2, 0.3)
    v = hamiltonian_vf(random_scalar(sc.geom, rng(4), 2), sc.omega)
    rep = idn.check_lambda_identities(sc.rho, sc.J, Jh, v)
    assert rep.passed, rep.details["components"]


def test_lambda_identities_fail_for_corrupted_structure():
    sc = sphere_scene(2)
    Jh = random_perturbation(sc.omega, sc.J, rng(3), 2, 0.3)
    v = random_vector(sc.geom, rng(4), 2)
    assert not idn.check_lambda_identities(sc.rho, sc.J * 1.05, Jh, v).passed


def test_ricci_moment_map_sphere():
    sc = sphere_scene(5)
    Jh = random_perturbation(sc.omega, sc.J, rng(6), 2, 0.3)
    alpha = random_form(sc.geom, 0, rng(7), 2)
    rep = idn.check_ricci_moment(sc.rho, sc.J, Jh, alpha, tol=1e-7)
    assert rep.passed


def test_weak_form_of_lambda():
    om, J = standard_omega(S2), standard_J(S2)
    Jh = random_perturbation(om, J, rng(1), 2, 0.3)
    v = random_vector(S2, rng(2), 2)
    assert idn.check_lambda_weak(om, J, Jh, v).passed


def test_gauge_directions_are_tangent_to_compatible_pairs():
    om = standard_omega(S2)
    J = random_structure(om, rng(1), 2, 0.2)
    X = random_vector(S2, rng(2), 2)
    assert idn.check_tangency_compatible(om, J, d(contract(X, om)), lie_derivative(X, J)).passed


def test_unrelated_pair_is_not_tangent():
    # on a surface every pair satisfies the linearized condition, so the control lives on T^4
    T4 = Torus(2, 8)
    om = standard_omega(T4)
    J = random_structure(om, rng(1), 1, 0.1)
    X, Y = random_vector(T4, rng(2), 1), random_vector(T4, rng(3), 1)
    assert idn.check_tangency_compatible(om, J, d(contract(X, om)), lie_derivative(X, J)).passed
    assert not idn.check_tangency_compatible(om, J, d(contract(X, om)), lie_derivative(Y, J)).passed


def test_weitzenboeck_for_hamiltonian_field():
    om, J = standard_omega(S2), standard_J(S2)
    X = hamiltonian_vf(random_scalar(S2, rng(1), 3), om)
    assert idn.check_weitzenboeck(om, J, X).passed


def test_scalar_total_on_round_sphere_and_flat_torus():
    for g, total in ((S2, 8 * np.pi), (T2, 0.0)):
        rep = idn.check_scalar_total(standard_omega(g), standard_J(g))
        assert rep.passed, rep.details


def test_scalar_moment_map_sphere():
    om = standard_omega(S2)
    J = random_structure(om, rng(8), 2, 0.2)
    Jh = random_perturbation(om, J, rng(9), 2, 0.3)
    assert idn.check_scalar_moment(om, J, Jh, random_scalar(S2, rng(10), 2)).passed


def test_degree_one_harmonics_span_the_kernel_of_L():
    om, J = standard_omega(S2), standard_J(S2)
    for m in (-1, 0, 1):
        F = ScalarField(S2, S2.harmonic(1, m))
        LF = idn.scalar_L_operator(om, J, F)
        assert LF.norm_inf() <= 1e-6 * F.norm_inf()
    F2 = ScalarField(S2, S2.harmonic(2, 0))
    assert idn.scalar_L_operator(om, J, F2).norm_inf() > 1e-2


def test_L_is_symmetric():
    om = standard_omega(S2)
    J = random_structure(om, rng(2), 2, 0.2)
    rho = liouville(om)
    F, G = random_scalar(S2, rng(3), 2), random_scalar(S2, rng(4), 2)
    LF = idn.scalar_L_operator(om, J, F, "via_lambda")
    LG = idn.scalar_L_operator(om, J, G, "via_lambda")
    a, b = integrate_density(LF * G, rho), integrate_density(F * LG, rho)
    assert abs(a - b) <= 1e-6 * max(abs(a), 1.0)


def test_scalar_operator_routes_and_pairing():
    om = standard_omega(S2)
    J = random_structure(om, rng(5), 2, 0.2)
    F, G = random_scalar(S2, rng(6), 2), random_scalar(S2, rng(7), 2)
    assert idn.check_scalar_operator_routes(om, J, F).passed
    assert idn.check_LS2(om, J, F, G).passed


def test_harmonic_representative():
    om = standard_omega(S2)
    J = random_structure(om, rng(11), 2, 0.2)
    Jh = random_perturbation(om, J, rng(12), 2, 0.3)
    assert idn.check_harmonic_representative(om, J, Jh).passed


@pytest.mark.parametrize("perturbed", [False, True])
def test_matsushima(perturbed):
    om = standard_omega(S2)
    J = random_structure(om, rng(13), 2, 0.2) if perturbed else standard_J(S2)
    F, G = random_scalar(S2, rng(14), 2), random_scalar(S2, rng(15), 2)
    assert idn.check_matsushima(om, J, F, G).passed


def test_structure_form_metric_properties():
    om = standard_omega(S2)
    J = random_structure(om, rng(16), 2, 0.2)
    A, B = (random_perturbation(om, J, rng(s), 2, 0.3) for s in (17, 18))
    rep = idn.check_structure_form(om, J, A, B, random_scalar(S2, rng(19), 2), tol=1e-7)
    assert rep.passed, rep.details["components"]


def test_pair_forms_on_torus4():
    sc = random_scene(SceneConfig("torus4", 4, band=1, structure_amp=0.1, volume="liouville", compatible=False), 0)
    mu1, mu2 = (random_form(sc.geom, 1, rng(s), 1, 0.3) for s in (1, 2))
    assert idn.check_trautwein_form(sc.omega, mu1, mu2, random_scalar(sc.geom, rng(3), 1)).passed
    J1, J2 = (random_perturbation(sc.omega, sc.J, rng(s), 1, 0.3) for s in (4, 5))
    assert idn.check_product_form(sc.omega, sc.J, mu1, mu2, J1, J2).passed


def test_normalized_primitive_preserves_volume():
    om = standard_omega(Torus(2, 4))
    mu = random_form(om.geom, 1, rng(6), 1, 0.3)
    lam = idn.volume_preserving_potential(mu, om)
    rep = idn.check_trautwein_form(om, mu, mu, random_scalar(om.geom, rng(7), 1))
    assert rep.details["components"]["volume_tangency"] <= 1e-9
    assert idn.exactness_defect(lam, om) <= 1e-9 * max(1.0, lam.norm_inf())
