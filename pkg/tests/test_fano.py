import numpy as np
import pytest
from hypothesis import given, strategies as st

from kahlerlab import fano
from kahlerlab.backends import Sphere
from kahlerlab.calculus import liouville, standard_J, standard_omega
from kahlerlab.scenes import random_perturbation, random_scalar

from conftest import rng

S2 = Sphere(24)
OM = standard_omega(S2)
ROUND = fano.solve_theta(standard_J(S2), OM)


@pytest.fixture(scope="module")
def perturbed():
    return fano.solve_theta(fano.sphere_perturbation(OM, 1), OM)


def test_round_theta_is_constant():
    assert np.max(np.abs(ROUND.theta.values - 1 / (4 * np.pi))) <= 1e-12
    assert fano.is_kaehler_einstein(ROUND)


def test_wrong_area_has_no_fano_normalization():
    with pytest.raises(ValueError):
        fano.solve_theta(standard_J(S2), OM * 2.0)


def test_normalization_invariants(perturbed):
    rep = fano.check_fano_normalization(perturbed)
    assert rep.passed, rep.details
    assert not fano.is_kaehler_einstein(perturbed)


def test_theta_potential(perturbed):
    assert fano.check_theta_potential(ROUND, perturbed).passed


def test_split_and_operators(perturbed):
    Jh = random_perturbation(OM, perturbed.J, rng(1), 2, 0.2)
    assert fano.check_fano_split(perturbed, Jh).passed
    F, G = random_scalar(S2, rng(2), 4), random_scalar(S2, rng(3), 4)
    assert fano.check_operator_adjointness(perturbed, F, G).passed


@given(st.integers(0, 10_000))
def test_donaldson_form_antisymmetric(seed):
    A, B = (random_perturbation(OM, ROUND.J, rng(seed + k), 2, 0.2) for k in (0, 1))
    assert fano.check_donaldson_antisymmetry(ROUND, A, B).passed


def test_donaldson_metric_positive(perturbed):
    dirs = [random_perturbation(OM, perturbed.J, rng(20 + k), 2, 0.2) for k in range(6)]
    rep = fano.check_donaldson_metric(perturbed, dirs)
    assert rep.passed and rep.details["min_eigenvalue"] > 0


def test_donaldson_metric_detects_dependent_directions(perturbed):
    d0 = random_perturbation(OM, perturbed.J, rng(30), 2, 0.2)
    rep = fano.check_donaldson_metric(perturbed, [d0, d0 * 2.0])
    assert not rep.passed


def test_moment_map_and_theta_variation(perturbed):
    Jh = random_perturbation(OM, perturbed.J, rng(4), 2, 0.2)
    assert fano.check_don_moment(perturbed, Jh, random_scalar(S2, rng(5), 2)).passed
    assert fano.check_theta_hat(perturbed, Jh).passed


@pytest.mark.parametrize("kind", ["energy", "entropy"])
def test_gradients(perturbed, kind):
    Jh = random_perturbation(OM, perturbed.J, rng(6), 2, 0.2)
    assert fano.check_gradient(perturbed, Jh, kind).passed


def test_gradients_vanish_at_round_structure():
    assert fano.grad_E(ROUND).norm_inf() <= 1e-10
    assert abs(fano.energy_E(ROUND)) <= 1e-20


def test_theta_equivariance_under_hamiltonian_flow():
    J = fano.sphere_perturbation(OM, 2)
    rep = fano.check_equivariance(J, random_scalar(S2, rng(7), 2), 0.2, steps=32, tol=1e-7)
    assert rep.passed, rep.linf


def test_closedness_on_a_linear_family(perturbed):
    dirs = [random_perturbation(OM, perturbed.J, rng(s), 2, 1.0) for s in (1, 2, 3)]
    rep = fano.check_dsymp_closed(perturbed.J, dirs, OM, step=0.02)
    assert rep.passed and rep.details["richardson_confirmed"]
