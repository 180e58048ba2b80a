import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kahlerlab.backends import Sphere, Torus

settings.register_profile(
    "numerics", max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("numerics")


@pytest.fixture(scope="session")
def t2():
    return Torus(1, 12)


@pytest.fixture(scope="session")
def t4():
    return Torus(2, 4)


@pytest.fixture(scope="session")
def s2():
    return Sphere(16)


@pytest.fixture(scope="session", params=["t2", "t4", "s2"])
def geom(request):
    return request.getfixturevalue(request.param)


def rng(seed):
    return np.random.default_rng(seed)


# identities the catalog must provide; each one covers a formula of the underlying theory
REQUIRED_IDS = (
    "symplectic_pairing", "ricci_form_routes", "ricci_equivariance", "ricci_moment_map",
    "lambda_connection_independence", "lambda_identities", "lambda_weak_form",
    "pair_symplectic_form", "pair_product_form", "pair_moment_map", "compatible_tangency", "weitzenboeck",
    "structure_symplectic_form", "scalar_curvature_total", "scalar_moment_map", "scalar_operator_routes",
    "scalar_operator_pairing", "harmonic_representative", "matsushima",
    "calabi_yau_volume", "lambda_split", "weil_petersson_form", "weil_petersson_type", "weil_petersson_closedness",
    "weil_petersson_kernel", "dolbeault_consistency", "ke_decomposition", "weil_petersson_ke",
    "weil_petersson_ke_lambda",
    "kahler_potential", "mabuchi_metric", "monge_ampere_geodesic", "mabuchi_functional",
    "fano_normalization", "fano_lambda_split", "donaldson_form", "donaldson_metric", "donaldson_moment_map",
    "theta_potential", "operators_L_B", "theta_variation", "fano_decomposition", "berndtsson_gap",
    "holomorphic_pairing", "donaldson_nondegeneracy", "donaldson_closedness", "ding_gradient",
    "ding_convexity", "ding_flow", "theta_potential_routes", "entropy_potential", "gradient_energy",
    "gradient_entropy", "kr_flow", "flow_monotonicity", "stability_probe",
)
