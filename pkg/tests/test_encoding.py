from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import density, features
from qelmptm.encoding import (
    DomainError,
    EncodingScheme,
    SingularExpansionError,
    feature_taylor_matrix,
    feature_vector,
    monomials,
    single_qubit_features,
)
from qelmptm.pauli import labels

SCHEMES = ["amp-sqrt", "amp-sq", "rot-y"]


def test_amp_sqrt_midpoint():
    np.testing.assert_allclose(single_qubit_features("amp-sqrt", 0.5), [1, 1, 0, 0], atol=1e-15)


def test_amp_sqrt_encodes_zero_state_at_one():
    np.testing.assert_array_equal(single_qubit_features("amp-sqrt", 1.0), [1, 0, 0, 1])


def test_rot_y_at_zero():
    np.testing.assert_array_equal(single_qubit_features("rot-y", 0.0), [1, 0, 0, 1])


def test_amp_sq_sign_follows_input():
    assert single_qubit_features("amp-sq", -0.5)[1] < 0
    assert single_qubit_features("amp-sq", 0.5)[1] > 0


@pytest.mark.parametrize("kind,u", [("amp-sqrt", 1.2), ("amp-sqrt", -0.1), ("amp-sq", 1.5), ("rot-y", 2.0)])
def test_domain_error(kind, u):
    with pytest.raises(DomainError):
        single_qubit_features(kind, u)


def test_domain_error_names_coordinate():
    with pytest.raises(DomainError, match="coordinate 2"):
        feature_vector("amp-sqrt", [0.2, 0.3, 1.7])


def test_unknown_scheme():
    with pytest.raises(ValueError):
        EncodingScheme("amp-cubic")


@pytest.mark.parametrize("kind", SCHEMES)
@given(u=st.floats(0.0, 1.0))
def test_bloch_norm(kind, u):
    if kind == "amp-sq":
        u = 2 * u - 1
    f = single_qubit_features(kind, u)
    assert abs(f[1] ** 2 + f[2] ** 2 + f[3] ** 2 - 1) < 1e-12


def test_zero_state_feature_vector():
    phi = feature_vector("amp-sqrt", [1.0, 1.0])
    expected = np.zeros(16)
    expected[[0, 3, 12, 15]] = 1
    np.testing.assert_array_equal(phi, expected)


def test_27_nonvanishing_features():
    rng = np.random.default_rng(0)
    phi = feature_vector("amp-sqrt", rng.uniform(0.05, 0.95, size=(50, 3)))
    assert np.sum(np.any(phi != 0, axis=0)) == 27


def test_purity_sum():
    assert abs(np.sum(feature_vector("amp-sqrt", [0.5, 0.5]) ** 2) - 4) < 1e-12


@pytest.mark.parametrize("kind", SCHEMES)
def test_y_sector_exactly_zero(kind):
    rng = np.random.default_rng(1)
    lo = -1 if kind == "amp-sq" else 0
    phi = feature_vector(kind, rng.uniform(lo, 1, size=(20, 3)))
    y_rows = [k for k, l in enumerate(labels(3)) if "Y" in l]
    assert np.all(phi[:, y_rows] == 0.0)


@pytest.mark.parametrize("kind", SCHEMES)
@pytest.mark.parametrize("n", [1, 2, 3])
def test_feature_vector_matches_density_oracle(kind, n):
    rng = np.random.default_rng(n)
    lo = -1 if kind == "amp-sq" else 0
    for x in rng.uniform(lo, 1, size=(100 if n < 3 else 30, n)):
        np.testing.assert_allclose(feature_vector(kind, x), features(density(kind, x)), atol=1e-12)


def test_batched_equals_single():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(5, 3))
    np.testing.assert_array_equal(feature_vector("amp-sqrt", X)[3], feature_vector("amp-sqrt", X[3]))


def test_taylor_z_row_is_linear_polynomial():
    tm = feature_taylor_matrix("amp-sqrt", [0.3], 4)
    z_row = list(tm.rows).index(3)
    np.testing.assert_allclose(tm.A[z_row], [-1, 2, 0, 0, 0], atol=1e-13)


@pytest.mark.parametrize("kind,u0", [("amp-sqrt", [0.3, 0.6]), ("amp-sq", [-0.4, 0.2]), ("rot-y", [0.1, 0.7])])
def test_taylor_constant_column_recovers_features(kind, u0):
    tm = feature_taylor_matrix(kind, u0, 3)
    # the zeroth-order shifted term is phi(u0)
    np.testing.assert_allclose(tm.evaluate(np.array(u0)), feature_vector(kind, u0)[tm.rows], atol=1e-12)


def test_taylor_reconstruction_error():
    u0 = np.array([0.5, 0.5, 0.5])
    tm = feature_taylor_matrix("amp-sqrt", u0, 4)
    axis = np.linspace(0.4, 0.6, 9)
    grid = np.array(list(product(axis, repeat=3)))
    err = np.abs(tm.evaluate(grid) - feature_vector("amp-sqrt", grid)[:, tm.rows]).max()
    assert err < 1e-3
    assert tm.A.shape == (27, 35)


def test_taylor_matches_finite_differences():
    # derivative oracle: central differences of the closed form
    u0, h = 0.37, 1e-5
    tm = feature_taylor_matrix("amp-sq", [u0], 3)
    f = lambda u: feature_vector("amp-sq", [u])[tm.rows]
    deriv = (f(u0 + h) - f(u0 - h)) / (2 * h)
    # d/du of sum_b A[:, b] u^b
    slope = tm.A[:, 1] + 2 * tm.A[:, 2] * u0 + 3 * tm.A[:, 3] * u0**2
    np.testing.assert_allclose(slope, deriv, atol=1e-4)


@pytest.mark.parametrize("kind,u0", [("amp-sqrt", 0.0), ("amp-sqrt", 1.0), ("amp-sq", 1.0)])
def test_taylor_singular_endpoint(kind, u0):
    with pytest.raises(SingularExpansionError):
        feature_taylor_matrix(kind, [u0, 0.5], 2)


def test_rot_y_analytic_everywhere():
    tm = feature_taylor_matrix("rot-y", [0.0, 1.0], 3)
    assert np.all(np.isfinite(tm.A))


def test_monomial_count():
    assert len(monomials(3, 4)) == 35
    assert monomials(2, 1) == [(0, 0), (1, 0), (0, 1)]
