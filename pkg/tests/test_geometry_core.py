import numpy as np
import pytest
from hypothesis import given, strategies as st

from kahlerlab.backends import Sphere, Torus
from kahlerlab.calculus import (
    contract,
    d,
    eval_form,
    hamiltonian_vf,
    integrate,
    lie_derivative,
    liouville,
    metric_and_adjoint,
    metric_inner,
    poisson_bracket,
    poisson_solve,
    standard_J,
    standard_omega,
    vf_from_alpha,
    wedge,
)
from kahlerlab.fields import ScalarField
from kahlerlab.scenes import random_endo, random_form, random_perturbation, random_scalar, random_vector

from conftest import rng

T2, T4, S2 = Torus(1, 12), Torus(2, 4), Sphere(16)
GEOMS = {"torus2": T2, "torus4": T4, "sphere": S2}
seeds = st.integers(0, 10_000)
backends = st.sampled_from(sorted(GEOMS))


@given(backends, seeds)
def test_d_squared_vanishes(name, seed):
    g = GEOMS[name]
    H = random_scalar(g, rng(seed), 3)
    assert d(d(H)).norm_inf() <= 1e-12 * max(1.0, H.norm_inf())
    if g.dim > 2:
        a = random_form(g, 1, rng(seed + 1), 3)
        assert d(d(a)).norm_inf() <= 1e-10 * max(1.0, a.norm_inf())


@given(backends, seeds)
def test_stokes(name, seed):
    g = GEOMS[name]
    alpha = random_form(g, g.dim - 1, rng(seed), 3)
    assert abs(integrate(d(alpha))) <= 1e-10 * max(1.0, alpha.norm_inf())


@given(backends, seeds)
def test_one_form_wedge_itself(name, seed):
    a = random_form(GEOMS[name], 1, rng(seed), 3)
    assert wedge(a, a).norm_inf() <= 1e-12 * a.norm_inf() ** 2


@given(backends, seeds)
def test_cartan_formula(name, seed):
    g = GEOMS[name]
    v = random_vector(g, rng(seed), 2)
    a = random_form(g, 1, rng(seed + 7), 2)
    direct = d(contract(v, a)) + contract(v, d(a))
    assert (lie_derivative(v, a) - direct).norm_inf() <= 1e-10 * max(1.0, direct.norm_inf())


@given(backends, seeds)
def test_hamiltonian_vector_field(name, seed):
    g = GEOMS[name]
    om = standard_omega(g)
    H = random_scalar(g, rng(seed), 3)
    assert (contract(hamiltonian_vf(H, om), om) - d(H)).norm_inf() <= 1e-10 * d(H).norm_inf()


@given(backends, seeds)
def test_divergence_free_field_from_alpha(name, seed):
    g = GEOMS[name]
    rho = liouville(standard_omega(g))
    alpha = random_form(g, g.dim - 2, rng(seed), 2)
    Y = vf_from_alpha(alpha, rho)
    assert (contract(Y, rho) - d(alpha)).norm_inf() <= 1e-10 * max(1.0, d(alpha).norm_inf())
    assert d(contract(Y, rho)).norm_inf() <= 1e-10 * max(1.0, d(alpha).norm_inf())


@given(backends, seeds)
def test_metric_adjoint_is_pointwise_adjoint(name, seed):
    g = GEOMS[name]
    om, J = standard_omega(g), standard_J(g)
    E = random_endo(g, rng(seed), 2)
    Es = metric_and_adjoint(om, J, E)
    u, v = random_vector(g, rng(seed + 1), 2), random_vector(g, rng(seed + 2), 2)
    lhs = metric_inner(om, J, _apply(E, u), v)
    rhs = metric_inner(om, J, u, _apply(Es, v))
    assert (lhs - rhs).norm_inf() <= 1e-10 * max(1.0, lhs.norm_inf())
    assert (metric_and_adjoint(om, J, Es) - E).norm_inf() <= 1e-12 * max(1.0, E.norm_inf())


def _apply(E, v):
    from kahlerlab.calculus import apply_endo

    return apply_endo(E, v)


@given(seeds)
def test_poisson_bracket_jacobi(seed):
    g = S2
    om = standard_omega(g)
    F, G, H = (random_scalar(g, rng(seed + k), 2) for k in range(3))
    pb = lambda a, b: poisson_bracket(a, b, om)
    jac = pb(F, pb(G, H)) + pb(G, pb(H, F)) + pb(H, pb(F, G))
    assert jac.norm_inf() <= 1e-9 * max(1.0, F.norm_inf() * G.norm_inf() * H.norm_inf())


def test_poisson_bracket_antisymmetric(s2):
    om = standard_omega(s2)
    F, G = random_scalar(s2, rng(1), 3), random_scalar(s2, rng(2), 3)
    assert (poisson_bracket(F, G, om) + poisson_bracket(G, F, om)).norm_inf() <= 1e-12


@pytest.mark.parametrize("name", sorted(GEOMS))
def test_poisson_solve_inverts_laplacian(name):
    g = GEOMS[name]
    u = random_scalar(g, rng(5), 3)
    u = u - g.integrate_scalar(u.values) / g.volume
    back = poisson_solve(ScalarField(g, g.laplacian(u.values)))
    assert (back - u).norm_inf() <= 1e-9 * u.norm_inf()


def test_poisson_solve_rejects_nonzero_mean(t2):
    with pytest.raises(ValueError):
        poisson_solve(ScalarField.constant(t2, 1.0))


def test_torus_derivative_of_sine(t2):
    x, y = t2.coords
    f = ScalarField(t2, np.sin(2 * x) * np.cos(y))
    df = d(f).comps
    assert np.max(np.abs(df[0] - 2 * np.cos(2 * x) * np.cos(y))) <= 1e-12
    assert np.max(np.abs(df[1] + np.sin(2 * x) * np.sin(y))) <= 1e-12


def test_torus_laplacian_eigenvalue(t2):
    x, y = t2.coords
    f = np.sin(3 * x + 2 * y)
    assert np.max(np.abs(t2.laplacian(f) - 13 * f)) <= 1e-11


def test_sphere_degree_one_harmonics_eigenvalue(s2):
    for m in (-1, 0, 1):
        Y = s2.harmonic(1, m)
        assert np.max(np.abs(s2.laplacian(Y) - 2 * Y)) <= 1e-10


def test_sphere_area_and_moments(s2):
    om = standard_omega(s2)
    assert abs(integrate(liouville(om)) - 4 * np.pi) <= 1e-12
    z = s2.points[2]
    assert abs(s2.integrate_scalar(z**2) - 4 * np.pi / 3) <= 1e-12


def test_sphere_harmonics_orthonormal(s2):
    Ys = [s2.harmonic(l, m) for l in range(4) for m in range(-l, l + 1)]
    gram = np.array([[s2.integrate_scalar(a * b) for b in Ys] for a in Ys])
    assert np.max(np.abs(gram - np.eye(len(Ys)))) <= 1e-12


@pytest.mark.parametrize("name", sorted(GEOMS))
def test_spectral_round_trip(name):
    g = GEOMS[name]
    f = random_scalar(g, rng(11), 4).values
    assert np.max(np.abs(g.from_coeffs(g.to_coeffs(f)) - f)) <= 1e-12


@pytest.mark.parametrize("name", sorted(GEOMS))
def test_standard_structure_is_compatible(name):
    from kahlerlab.fields import ACStruct

    g = GEOMS[name]
    defects = ACStruct(standard_J(g), standard_omega(g), compatible=True).validate().defects()
    assert defects["square"] <= 1e-12 and defects["compat"] <= 1e-12 and defects["tame_min"] > 0


@given(backends, seeds)
def test_random_perturbation_tangent_and_symmetric(name, seed):
    from kahlerlab.fields import ACStruct, Perturbation

    g = GEOMS[name]
    om, J = standard_omega(g), standard_J(g)
    Jh = random_perturbation(om, J, rng(seed), 2, 0.3, symmetric=True)
    defects = Perturbation(Jh, ACStruct(J, om, True), symmetric=True).defects()
    assert defects["anticommute"] <= 1e-10 and defects["symmetric"] <= 1e-10


def test_omega_is_evaluated_antisymmetrically(s2):
    om = standard_omega(s2)
    u, v = random_vector(s2, rng(1), 2), random_vector(s2, rng(2), 2)
    assert (eval_form(om, u, v) + eval_form(om, v, u)).norm_inf() <= 1e-14
