import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qelmptm.channels import evolve, hadamard_all, ptm_of_unitary, random_hamiltonian, tfim_hamiltonian
from qelmptm.decodability import (
    decodability_scores,
    decoding_weights,
    default_grid,
    isolatable_features,
    matrix_rank,
    monomial_decodability,
    pinv,
    projector,
)
from qelmptm.encoding import feature_vector
from qelmptm.pauli import PauliString
from qelmptm.readout import MultiplexPlan, effective_ptm, select_observables


def _penrose(M, Mp):
    np.testing.assert_allclose(M @ Mp @ M, M, atol=1e-8)
    np.testing.assert_allclose(Mp @ M @ Mp, Mp, atol=1e-8)
    np.testing.assert_allclose(M @ Mp, (M @ Mp).T, atol=1e-8)
    np.testing.assert_allclose(Mp @ M, (Mp @ M).T, atol=1e-8)


def test_pinv_trivial():
    np.testing.assert_array_equal(pinv(np.eye(3)), np.eye(3))
    np.testing.assert_array_equal(pinv([[1.0, 0.0], [0.0, 0.0]]), [[1, 0], [0, 0]])


def test_pinv_penrose_random():
    M = np.random.default_rng(0).normal(size=(20, 64))
    _penrose(M, pinv(M))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31))
def test_pinv_penrose_low_rank(m, k, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(m, 3)) @ rng.normal(size=(3, k))
    _penrose(M, pinv(M))


def test_pinv_rejects_bad_rtol():
    with pytest.raises(ValueError):
        pinv(np.eye(2), rtol=0)


def test_full_ptm_every_feature_decodable():
    V = ptm_of_unitary(evolve(random_hamiltonian(3, 0), 1.3)).entries
    rep = decodability_scores(V)
    np.testing.assert_allclose(rep.scores, 1, atol=1e-10)
    assert rep.rank == 64


@pytest.mark.parametrize("token,L", [("z", 1), ("z+zz", 3), ("weight1", 4)])
def test_score_sum_equals_rank(token, L):
    R = effective_ptm(random_hamiltonian(3, 1), select_observables(token, 3), MultiplexPlan.default(L)).entries
    rep = decodability_scores(R)
    assert abs(rep.scores.sum() - rep.rank) < 1e-8
    assert rep.rank == matrix_rank(R) <= 64
    assert rep.scores.min() >= -1e-12 and rep.scores.max() <= 1 + 1e-10


def test_selected_rows_score_is_column_sum():
    V = ptm_of_unitary(evolve(random_hamiltonian(3, 2), 0.7)).entries
    S = list(select_observables("z+zz", 3).indices)
    rep = decodability_scores(V[S])
    np.testing.assert_allclose(rep.scores, np.sum(V[S] ** 2, axis=0), atol=1e-10)


def test_projector_idempotent_and_diagonal():
    R = np.random.default_rng(3).normal(size=(10, 16))
    P = projector(R)
    np.testing.assert_allclose(P @ P, P, atol=1e-8)
    np.testing.assert_allclose(np.diag(P), decodability_scores(R).scores, atol=1e-12)
    np.testing.assert_allclose(P, pinv(R) @ R, atol=1e-8)


def test_sector_means():
    rep = decodability_scores(np.eye(16)[[0, 3, 12, 15]])
    # weight 0: {II}; weight 1: six strings, two chosen; weight 2: nine strings, one chosen
    np.testing.assert_allclose(rep.sector_means, [1, 2 / 6, 1 / 9])
    assert rep.threshold_mask.sum() == 4


def test_report_rows():
    rows = list(decodability_scores(np.eye(4)).rows())
    assert rows[3] == ["Z", 1, 1.0, True]


def test_weights_with_zero_time_block():
    s = select_observables("z+zz", 3)
    R = effective_ptm(random_hamiltonian(3, 4), s, MultiplexPlan.default(2, include_zero=True)).entries
    for r in s.indices:
        w = decoding_weights(R, r)
        np.testing.assert_allclose(w @ R, np.eye(64)[r], atol=1e-8)


def test_weights_identity():
    np.testing.assert_array_equal(decoding_weights(np.eye(4), 2), [0, 0, 1, 0])


def test_partial_score_reconstruction_error():
    R = np.random.default_rng(5).normal(size=(6, 16))
    g = decodability_scores(R).scores
    for r in range(16):
        resid = decoding_weights(R, r) @ R - np.eye(16)[r]
        assert abs(resid @ resid - (1 - g[r])) < 1e-8


def test_isolation_dense_square():
    iso = isolatable_features(np.random.default_rng(6).normal(size=(20, 16)))
    assert iso.consistent and iso.count == 16


def test_isolation_dense_wide():
    iso = isolatable_features(np.random.default_rng(7).normal(size=(10, 16)))
    assert iso.consistent and iso.count == 0


def test_isolation_clifford():
    V = ptm_of_unitary(hadamard_all(3)).entries
    R = V[list(select_observables("z+zz", 3).indices)]
    iso = isolatable_features(R)
    assert iso.consistent and iso.count == matrix_rank(R) == 5


def test_tensor_factorization():
    rng = np.random.default_rng(8)
    R1, R2 = rng.normal(size=(2, 4)), rng.normal(size=(3, 4))
    g1, g2 = decodability_scores(R1).scores, decodability_scores(R2).scores
    g = decodability_scores(np.kron(R1, R2)).scores
    np.testing.assert_allclose(g, np.kron(g1, g2), atol=1e-10)


def test_late_time_scaling():
    S = select_observables("weight1", 3)
    means = []
    for seed in range(10):
        V = ptm_of_unitary(evolve(random_hamiltonian(3, seed), 50.0)).entries
        means.append(decodability_scores(V[list(S.indices)]).scores[1:].mean())
    target = S.M / 64
    assert target / 2 < np.mean(means) < 2 * target


def test_decodable_feature_regression():
    # oracle: a perfectly decodable feature is an exact linear function of readouts
    s = select_observables("z+zz", 3)
    R = effective_ptm(tfim_hamiltonian("zz-x", 3), s, MultiplexPlan.default(3, include_zero=True)).entries
    rep = decodability_scores(R)
    X = np.random.default_rng(9).uniform(size=(200, 3))
    Phi = feature_vector("amp-sqrt", X)
    F = Phi @ R.T
    for r in np.flatnonzero(np.abs(rep.scores - 1) < 1e-10):
        y = Phi[:, r]
        coef, *_ = np.linalg.lstsq(F, y, rcond=None)
        ss_res = np.sum((F @ coef - y) ** 2)
        ss_tot = np.sum((y - y.mean()) ** 2)
        if ss_tot > 0:
            assert 1 - ss_res / ss_tot > 1 - 1e-6


def test_default_grid():
    g = default_grid("amp-sqrt", 3)
    assert g.shape == (125, 3) and g.min() == pytest.approx(0.1)
    assert default_grid("rot-y", 2, points=3).min() == pytest.approx(-0.9)


@pytest.fixture(scope="module")
def amp_sqrt_kappa():
    return monomial_decodability("amp-sqrt", default_grid("amp-sqrt", 3, points=3), r=4)


def test_stable_monomials(amp_sqrt_kappa):
    rep = amp_sqrt_kappa
    stable = {(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1)}
    for e, k in zip(rep.exponents, rep.scores):
        if e in stable:
            assert abs(k - 1) < 1e-6, e
    assert amp_sqrt_kappa.scores[rep.exponents.index((2, 0, 0))] < 1 - 1e-3


def test_kappa_sum_equals_rank(amp_sqrt_kappa):
    np.testing.assert_allclose(amp_sqrt_kappa.per_point.sum(axis=1), amp_sqrt_kappa.ranks, atol=1e-8)
    assert np.all(amp_sqrt_kappa.ranks <= 27)


def test_kappa_orderings(amp_sqrt_kappa):
    rep = amp_sqrt_kappa
    np.testing.assert_allclose(np.diag(rep.projector_mean), rep.scores, atol=1e-12)
    assert rep.scores_of_mean_taylor.shape == rep.scores.shape


@pytest.mark.parametrize("kind", ["amp-sq", "rot-y"])
def test_constant_monomial_always_decodable(kind):
    rep = monomial_decodability(kind, default_grid(kind, 2, points=3), r=3)
    assert np.allclose(rep.per_point[:, rep.exponents.index((0, 0))], 1)


def test_rows_labels():
    rep = monomial_decodability("amp-sqrt", [[0.5]], r=2)
    rows = list(rep.rows())
    assert [r[2] for r in rows] == [0, 1, 2]


def test_singular_point_rejected():
    with pytest.raises(ValueError):
        monomial_decodability("amp-sqrt", [[0.0, 0.5]], r=2)
