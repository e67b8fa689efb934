from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import pauli
from qelmptm.pauli import (
    PauliString,
    SizeLimitError,
    basis_matrices,
    enumerate_basis,
    labels,
    to_matrix,
    weight,
    weights,
    y_free_indices,
)


def test_single_qubit_basis_order():
    assert [p.letters for p in enumerate_basis(1)] == ["I", "X", "Y", "Z"]


def test_three_qubit_basis_size():
    assert len(enumerate_basis(3)) == 64


def test_two_qubit_position_seven_is_xz():
    basis = enumerate_basis(2)
    assert basis[7].letters == "XZ"
    assert basis[7].digits == (1, 3)


def test_positions_match_indices():
    for k, p in enumerate(enumerate_basis(3)):
        assert p.index == k


@pytest.mark.parametrize("n", [0, 9, -1])
def test_size_limit(n):
    with pytest.raises(SizeLimitError):
        enumerate_basis(n)


@given(st.integers(1, 5).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 4**n - 1))))
def test_index_round_trip(args):
    n, k = args
    p = PauliString.from_index(k, n)
    assert p.index == k
    assert PauliString.parse(p.letters) == p


@pytest.mark.parametrize("text,w", [("III", 0), ("XIZ", 2), ("ZZZ", 3)])
def test_weight(text, w):
    assert weight(text) == w


def test_parse_rejects_bad_letters():
    with pytest.raises(ValueError):
        PauliString.parse("XQZ")


def test_x_matrix():
    np.testing.assert_array_equal(to_matrix("X"), [[0, 1], [1, 0]])


def test_zz_is_diagonal():
    np.testing.assert_array_equal(to_matrix("ZZ"), np.diag([1, -1, -1, 1]))


def test_matrices_match_oracle():
    for lab, P in zip(labels(3), basis_matrices(3)):
        np.testing.assert_array_equal(P, pauli(lab))


def test_trace_orthogonality_two_qubits():
    P = basis_matrices(2)
    G = np.einsum("aij,bji->ab", P, P)
    np.testing.assert_allclose(G, 4 * np.eye(16), atol=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hermitian_and_involutory(n):
    d = 2**n
    for P in basis_matrices(n):
        assert np.max(np.abs(P - P.conj().T)) < 1e-12
        assert np.max(np.abs(P @ P - np.eye(d))) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_weight_sector_counts(n):
    counts = np.bincount(weights(n), minlength=n + 1)
    assert counts.tolist() == [comb(n, w) * 3**w for w in range(n + 1)]


def test_y_free_count():
    assert len(y_free_indices(3)) == 27
    assert all("Y" not in labels(3)[k] for k in y_free_indices(3))


def test_basis_matrices_read_only():
    with pytest.raises(ValueError):
        basis_matrices(1)[0, 0, 0] = 2
