import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kahlerlab import teichmueller as tm
from kahlerlab.backends import Sphere, Torus
from kahlerlab.calculus import liouville, standard_J, standard_omega, volume_form
from kahlerlab.curvature import ricci_form
from kahlerlab.fields import EndoField, VectorField
from kahlerlab.scenes import (
    anticommuting_part,
    random_endo,
    random_perturbation,
    random_scalar,
    random_structure,
    random_vector,
)

from conftest import rng

T2 = Torus(1, 16)
OM2 = standard_omega(T2)


def perturbed_structure(seed, amp=0.2):
    return random_structure(OM2, rng(seed), 3, amp)


def symmetric_tangent(J, seed, amp=0.3):
    return random_perturbation(OM2, J, rng(seed), 3, amp, symmetric=True)


def test_witness_value_is_minus_four_pi_squared():
    # hand computation: tr(J1 J J2) = -2, so 1/2 * (-2) * (2 pi)^2
    rep = tm.check_wp_oracle(*tm.WITNESS, Torus(1, 4))
    assert rep.passed
    assert rep.details["oracle"] == pytest.approx(-(2 * math.pi) ** 2, rel=1e-14)
    assert rep.details["field"] == pytest.approx(-(2 * math.pi) ** 2, rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_random_constant_scenes_match_matrix_formula(seed):
    r = rng(seed)
    J = tm.random_constant_structure(r)
    assert np.allclose(J @ J, -np.eye(2), atol=1e-12)
    J1, J2 = tm.random_constant_tangent(J, r), tm.random_constant_tangent(J, r)
    assert np.allclose(J @ J1 + J1 @ J, 0, atol=1e-12)
    assert tm.check_wp_oracle(J, J1, J2).passed


def test_constant_torus4_scene_matches_matrix_formula():
    r = rng(3)
    J = tm.random_constant_structure(r, 2)
    J1, J2 = tm.random_constant_tangent(J, r), tm.random_constant_tangent(J, r)
    assert tm.check_wp_oracle(J, J1, J2, Torus(2, 4)).passed


def test_swapped_witness_changes_sign():
    J, J1, J2 = tm.WITNESS
    rep = tm.check_wp_oracle(J, J2, J1, Torus(1, 4))
    assert rep.passed
    assert rep.details["field"] == pytest.approx((2 * math.pi) ** 2, rel=1e-10)


def test_tau_matrix_squares_to_minus_one():
    for tau in (1j, 0.3 + 1.2j, -0.45 + 0.8j):
        M = tm.tau_matrix(tau)
        assert np.allclose(M @ M, -np.eye(2), atol=1e-13)
        assert tm.TorusTeichPoint(tau=tau).J(T2).norm_inf() > 0
    with pytest.raises(ValueError):
        tm.tau_matrix(0.5 - 1j)


def test_teich_point_rejects_bad_matrix():
    with pytest.raises(ValueError):
        tm.TorusTeichPoint(matrix=((1.0, 0.0), (0.0, 1.0))).J(T2)
    with pytest.raises(ValueError):
        tm.TorusTeichPoint(matrix=((0.0, 1.0), (-1.0, 0.0))).J(T2)


def test_cy_volume_of_constant_structure_is_flat():
    J = EndoField.constant(T2, tm.tau_matrix(0.2 + 1.1j))
    rho = tm.cy_volume(J)
    assert (rho - liouville(OM2)).norm_inf() <= 1e-14


@pytest.mark.parametrize("seed", [0, 1])
def test_cy_volume_is_ricci_flat(seed):
    J = perturbed_structure(seed)
    assert ricci_form(liouville(OM2), J).norm_inf() > 1e-2
    rep = tm.check_cy_volume(J, OM2, tol=1e-8)
    assert rep.passed, rep.details


def test_cy_volume_is_equivariant_under_lattice_maps():
    # the pullback doubles frequencies, so use a finer grid and a gentler structure
    g = Torus(1, 32)
    J = random_structure(standard_omega(g), rng(4), 2, 0.1)
    A, b = tm.SHEAR, (0.3, 0.1)
    pulled = tm.cy_volume(tm.torus_pullback_endo(J, A, b))
    moved = tm.torus_pullback_density(tm.cy_volume(J), A, b)
    assert (pulled - moved).norm_inf() <= 1e-8 * moved.norm_inf()


def test_ricci_equivariance_on_random_scene():
    g = Torus(1, 32)
    r = rng(5)
    J = random_structure(standard_omega(g), r, 2, 0.15)
    rho = volume_form(random_scalar(g, r, 2, 0.3).apply(np.exp))
    assert tm.check_ricci_equivariance(rho, J).passed


@pytest.mark.parametrize("seed", [0, 1])
def test_lambda_split_on_cy_volume(seed):
    J = perturbed_structure(seed)
    assert tm.check_torus_lambda_split(J, symmetric_tangent(J, 10 + seed), OM2).passed


def test_wp_form_is_antisymmetric_and_type_one_one():
    J = perturbed_structure(2)
    J1, J2 = symmetric_tangent(J, 20), symmetric_tangent(J, 21)
    rep = tm.check_wp_type(J, J1, J2, OM2)
    assert rep.passed, rep.details
    assert abs(tm.wp_form(J, J1, J1, OM2)) <= 1e-10 * tm._trace_scale(J, J1, J2, OM2)


def test_gauge_directions_are_null():
    J = perturbed_structure(3)
    X = random_vector(T2, rng(30), 3)
    assert tm.check_wp_gauge_kernel(J, symmetric_tangent(J, 31), X, OM2).passed


def test_constant_vector_field_is_null_on_flat_structure():
    J = standard_J(T2)
    X = VectorField(T2, np.stack([np.full(T2.shape, 0.7), np.full(T2.shape, -0.2)]))
    assert tm.gauge_direction(J, X).norm_inf() <= 1e-13


def test_closedness_over_tau_patch():
    direction = random_endo(T2, rng(7), 2, 0.3)
    rep = tm.wp_closedness_check(tm.tau_family(0.1 + 1.1j, direction, T2), step=0.02)
    assert rep.passed
    assert rep.details["richardson_confirmed"]
    assert rep.details["halving_ratio"] == pytest.approx(4.0, rel=0.25)


def test_closedness_of_degenerate_family_is_zero():
    rep = tm.wp_closedness_check(tm.tau_family(1j, None, T2), step=0.02)
    assert rep.details["residual_step"] == pytest.approx(0.0, abs=1e-12)


def test_closedness_control_detects_non_closed_pairing():
    # a pairing scaled by a point-dependent factor is no longer closed
    def skewed(J, A, B, om):
        return tm.wp_form(J, A, B, om) * (1.0 + 0.5 * float(J.comps[0, 0].flat[0]))

    direction = random_endo(T2, rng(7), 2, 0.3)
    rep = tm.wp_closedness_check(tm.tau_family(0.1 + 1.1j, direction, T2), step=0.02, pairing=skewed)
    assert not rep.passed


def test_dolbeault_on_torus4():
    g = Torus(2, 8)
    J = EndoField.constant(g, tm.random_constant_structure(rng(1), 2))
    X = random_vector(g, rng(2), 1)
    generic = anticommuting_part(J, random_endo(g, rng(3), 1, 0.3))
    rep = tm.check_dolbeault(J, X, generic)
    assert rep.passed, rep.details
    assert rep.details["generic_defect"] > 1e-3


def test_torus4_wp_rejects_non_closed_tangent():
    g = Torus(2, 8)
    J = EndoField.constant(g, tm.random_constant_structure(rng(1), 2))
    generic = anticommuting_part(J, random_endo(g, rng(3), 1, 0.3))
    with pytest.raises(ValueError, match="dbar"):
        tm.wp_form(J, generic, generic)


S2 = Sphere(16)


def round_tangents(seeds):
    om, J = standard_omega(S2), standard_J(S2)
    return om, J, [random_perturbation(om, J, rng(s), 2, 0.3, symmetric=True) for s in seeds]


def test_wp_ke_expansion_on_round_sphere():
    om, J, (J1, J2) = round_tangents((40, 41))
    rep = tm.check_wp_ke(J, J1, J2, 1.0, om)
    assert rep.passed, rep.details


def test_wp_ke_vanishes_on_gauge_pairs():
    om, J, _ = round_tangents(())
    K1 = tm.hamiltonian_gauge(J, random_scalar(S2, rng(50), 2), om)
    K2 = tm.hamiltonian_gauge(J, random_scalar(S2, rng(51), 2), om)
    res = tm.wp_ke_form(J, K1, K2, 1.0, om)
    assert abs(res.value) <= 1e-9 * res.scale
    assert res.residual() <= 1e-9


def test_wp_ke_rejects_non_einstein_background():
    om, J, (J1,) = round_tangents((60,))
    with pytest.raises(ValueError, match="Einstein"):
        tm.wp_ke_form(J, J1, J1, hbar=2.0, omega=om)


@given(st.floats(-0.4, 0.4), st.floats(0.7, 1.6), st.integers(0, 2**16))
def test_constant_wp_matches_oracle_for_any_tau(re_tau, im_tau, seed):
    J = tm.tau_matrix(complex(re_tau, im_tau))
    r = rng(seed)
    J1, J2 = tm.random_constant_tangent(J, r), tm.random_constant_tangent(J, r)
    assert tm.check_wp_oracle(J, J1, J2, Torus(1, 4)).passed
