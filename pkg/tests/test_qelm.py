import warnings

import numpy as np
import pytest

from oracles import density, expm_hermitian, features, pauli
from qelmptm.channels import random_hamiltonian, tfim_hamiltonian
from qelmptm.encoding import DomainError, feature_vector
from qelmptm.qelm import (
    IllConditionedWarning,
    QelmModel,
    build_readout,
    design_matrices,
    encoded_density,
    fit,
    kernel_fit,
    kernel_matrix,
    kernel_predict,
    load_model,
    optimal_measurement,
    predict,
    readout_features,
    save_model,
    train,
)
from qelmptm.readout import MultiplexPlan


def _task(n=2, P=40, seed=0, D=2):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.05, 0.95, size=(P, n))
    Y = np.column_stack([np.sin(3 * X.sum(axis=1)), X.prod(axis=1)])[:, :D]
    return X, Y


def test_identity_readout_selects_features():
    ro = build_readout("amp-sqrt", 2, "z+zz")
    x = np.array([0.3, 0.8])
    phi = feature_vector("amp-sqrt", x)
    np.testing.assert_allclose(readout_features(ro, x), phi[list(ro.observables.indices)], atol=1e-15)


def test_y_columns_vanish_without_reservoir():
    ro = build_readout("amp-sqrt", 2, "all")
    F = readout_features(ro, np.random.default_rng(0).uniform(size=(10, 2)))
    y_cols = [k for k, l in enumerate(ro.observables.labels) if "Y" in l]
    assert np.all(F[:, y_cols] == 0)


def test_features_match_density_oracle():
    H = tfim_hamiltonian("zz-x", 3, 1.0, 0.7)
    plan = MultiplexPlan.default(3)
    ro = build_readout("amp-sqrt", 3, "z+zz", H, plan)
    labs = ro.observables.labels
    for x in np.random.default_rng(1).uniform(size=(5, 3)):
        rho = density("amp-sqrt", x)
        want = []
        for t in plan.times:
            U = expm_hermitian(H.matrix, t)
            r = U @ rho @ U.conj().T
            want += [np.trace(pauli(l) @ r).real for l in labs]
        np.testing.assert_allclose(readout_features(ro, x), want, atol=1e-10)
        np.testing.assert_allclose(readout_features(ro, x, path="quantum"), want, atol=1e-10)


def test_encoded_density_oracle():
    x = [0.2, 0.9]
    np.testing.assert_allclose(encoded_density("amp-sq", x), density("amp-sq", x), atol=1e-15)
    np.testing.assert_allclose(features(encoded_density("rot-y", x)), feature_vector("rot-y", x), atol=1e-12)


def test_domain_error_propagates():
    ro = build_readout("amp-sqrt", 2, "z")
    with pytest.raises(DomainError):
        readout_features(ro, [0.5, 1.5])


def test_squares_augmentation():
    ro = build_readout("amp-sqrt", 2, "z", add_squares=True)
    F = readout_features(ro, [0.3, 0.6])
    assert ro.M_tot == 4
    np.testing.assert_allclose(F[2:], F[:2] ** 2)


def test_unknown_path():
    with pytest.raises(ValueError):
        readout_features(build_readout("amp-sqrt", 1, "z"), [0.5], path="gpu")


def test_shrinkage_monotone():
    X, Y = _task()
    G = readout_features(build_readout("amp-sqrt", 2, "all", random_hamiltonian(2, 0)), X).T
    norms = [np.linalg.norm(train(G, Y, lam)) for lam in [1e-6, 1e-3, 1e-1, 10, 1e3, 1e6]]
    assert all(a >= b for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-4


def test_single_sample_interpolation():
    G = np.array([[0.3], [0.5], [-0.2]])
    W = train(G, np.array([[1.5]]), 0.0)
    np.testing.assert_allclose(G.T @ W, [[1.5]], atol=1e-12)


def test_primal_and_dual_agree():
    rng = np.random.default_rng(2)
    Y = rng.normal(size=(8, 2))
    G = rng.normal(size=(12, 8))  # M > P: dual
    Wd = train(G, Y, 0.1)
    Wp = np.linalg.solve(G @ G.T + 0.1 * np.eye(12), G @ Y)
    np.testing.assert_allclose(Wd, Wp, atol=1e-10)


def test_woodbury_form():
    X, Y = _task(P=30)
    ro = build_readout("amp-sqrt", 2, "z+zz", random_hamiltonian(2, 3), MultiplexPlan.default(2))
    Phi = feature_vector("amp-sqrt", X).T
    R = ro.R
    lam = 1e-3
    lhs = train(R @ Phi, Y, lam)
    C = Phi @ Phi.T
    rhs = R @ np.linalg.solve(C @ R.T @ R + lam * np.eye(16), Phi @ Y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8)


def test_negative_lambda_and_shape_errors():
    with pytest.raises(ValueError):
        train(np.ones((2, 3)), np.ones(3), -1)
    with pytest.raises(ValueError):
        train(np.ones((2, 3)), np.ones(4), 1)


def test_ill_conditioned_warning():
    G = np.ones((3, 10))
    with pytest.warns(IllConditionedWarning), warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        warnings.simplefilter("always", category=IllConditionedWarning)
        train(G, np.ones(10), 1e-15)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        train(np.eye(3), np.ones(3), 1e-3)


def test_zero_weights_zero_output():
    ro = build_readout("amp-sqrt", 2, "z")
    model = QelmModel(np.zeros((2, 3)), ro, 0.0)
    assert np.all(predict(model, [[0.2, 0.4]]) == 0)


def test_unitary_invariance_with_full_basis():
    X, Y = _task(P=50)
    Xt = np.random.default_rng(5).uniform(size=(20, 2))
    plain = fit(build_readout("amp-sqrt", 2, "all"), X, Y, 1e-4)
    mixed = fit(build_readout("amp-sqrt", 2, "all", random_hamiltonian(2, 6)), X, Y, 1e-4)
    np.testing.assert_allclose(predict(plain, Xt), predict(mixed, Xt), atol=1e-8)


def test_quantum_path_prediction():
    X, Y = _task(P=30)
    model = fit(build_readout("amp-sqrt", 2, "z+zz", random_hamiltonian(2, 7), MultiplexPlan.default(3)), X, Y, 1e-6)
    np.testing.assert_allclose(predict(model, X[:5], path="quantum"), predict(model, X[:5]), atol=1e-10)


def test_kernel_unit_diagonal_and_psd():
    X = np.random.default_rng(8).uniform(size=(15, 3))
    K = kernel_matrix("amp-sqrt", X)
    np.testing.assert_allclose(np.diag(K), 1, atol=1e-12)
    np.testing.assert_allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > -1e-12


def test_kernel_ignores_unitary():
    X = np.random.default_rng(9).uniform(size=(6, 2))
    U = expm_hermitian(random_hamiltonian(2, 1).matrix, 0.9)
    rhos = [U @ encoded_density("amp-sqrt", x) @ U.conj().T for x in X]
    K = np.array([[np.trace(a @ b).real for b in rhos] for a in rhos])
    np.testing.assert_allclose(K, kernel_matrix("amp-sqrt", X), atol=1e-10)


def test_kernel_matches_full_basis_qelm():
    X, Y = _task(P=25, D=1)
    y = Y[:, 0]
    Xt = np.random.default_rng(10).uniform(size=(10, 2))
    lam = 1e-3
    model = fit(build_readout("amp-sqrt", 2, "all", random_hamiltonian(2, 2)), X, y, lam)
    # the kernel carries a 1/d normalization, so lambda rescales by d
    alpha = kernel_fit(kernel_matrix("amp-sqrt", X), y, lam / 4)
    np.testing.assert_allclose(kernel_predict("amp-sqrt", X, alpha, Xt), predict(model, Xt)[:, 0], atol=1e-6)


def test_optimal_measurement_reproduces_kernel():
    X, Y = _task(P=12, D=1)
    alpha = kernel_fit(kernel_matrix("amp-sqrt", X), Y[:, 0], 1e-4)
    M = optimal_measurement("amp-sqrt", X, alpha)
    Xt = np.random.default_rng(11).uniform(size=(5, 2))
    via_m = [np.trace(M @ encoded_density("amp-sqrt", x)).real for x in Xt]
    np.testing.assert_allclose(via_m, kernel_predict("amp-sqrt", X, alpha, Xt), atol=1e-8)


def test_design_matrix_ranks():
    rng = np.random.default_rng(12)
    X = rng.uniform(size=(200, 3))
    ro = build_readout("amp-sqrt", 3, "z+zz", random_hamiltonian(3, 0), MultiplexPlan.default(3))
    dm = design_matrices(ro, X)
    assert dm.Phi.shape == (27, 200)
    assert dm.rank_Phi == 27
    assert dm.rank_G == min(dm.rank_R, dm.rank_Phi) == 15
    assert dm.rank_G <= min(ro.M_tot, 200, 27)


def test_objective_nonincreasing_in_observables():
    X, Y = _task(n=3, P=60)
    H = random_hamiltonian(3, 13)
    lam = 1e-6
    objs = []
    for tok in ["z", "z+zz", "weight1", "all"]:
        ro = build_readout("amp-sqrt", 3, tok, H)
        G = readout_features(ro, X).T
        W = train(G, Y, lam)
        objs.append(np.sum((G.T @ W - Y) ** 2) + lam * np.sum(W**2))
    assert all(a >= b - 1e-12 for a, b in zip(objs, objs[1:]))


@pytest.mark.parametrize("with_h", [False, True])
def test_save_load_round_trip(tmp_path, with_h):
    X, Y = _task(P=30)
    H = random_hamiltonian(2, 14) if with_h else None
    model = fit(build_readout("rot-y", 2, "z+zz", H, MultiplexPlan.default(2) if H else None, add_squares=True),
                X, Y, 1e-5, {"seed": 3})
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.weights, model.weights)
    np.testing.assert_array_equal(back.readout.R, model.readout.R)
    np.testing.assert_array_equal(predict(back, X), predict(model, X))
    assert back.provenance == {"seed": 3} and back.readout.describe() == model.readout.describe()


def test_load_rejects_foreign_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_model(p)
