"""n-qubit Pauli basis: enumeration, indexing, weights and dense matrices.

Basis index ``k`` of a Pauli string is its base-4 value with qubit 1 as the
most significant digit and the digit map I->0, X->1, Y->2, Z->3.  With this
ordering the transfer matrix of a product channel is a plain Kronecker
product of the single-qubit factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

MAX_QUBITS = 8
LETTERS = "IXYZ"

_SINGLE = (
    np.array([[1, 0], [0, 1]], dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class SizeLimitError(ValueError):
    """Raised when a qubit count falls outside the dense-matrix range."""


def check_qubits(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise SizeLimitError(f"qubit count must be in [1, {MAX_QUBITS}], got {n!r}")
    return int(n)


@dataclass(frozen=True)
class PauliString:
    """A length-n word over {I, X, Y, Z}."""

    letters: str

    def __post_init__(self):
        if not self.letters or any(c not in LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli string {self.letters!r}")

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def index(self) -> int:
        k = 0
        for c in self.letters:
            k = 4 * k + LETTERS.index(c)
        return k

    @property
    def digits(self) -> tuple[int, ...]:
        return tuple(LETTERS.index(c) for c in self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @classmethod
    def from_index(cls, index: int, n: int) -> "PauliString":
        check_qubits(n)
        if not 0 <= index < 4**n:
            raise ValueError(f"index {index} out of range for n={n}")
        digits = []
        for _ in range(n):
            index, r = divmod(index, 4)
            digits.append(LETTERS[r])
        return cls("".join(reversed(digits)))

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        return cls(text.strip().upper())

    def __str__(self) -> str:
        return self.letters


def enumerate_basis(n: int) -> list[PauliString]:
    """All 4**n Pauli strings, position k holding the string with index k."""
    check_qubits(n)
    return [PauliString.from_index(k, n) for k in range(4**n)]


def weight(p: PauliString | str) -> int:
    """Number of non-identity letters."""
    if isinstance(p, str):
        p = PauliString.parse(p)
    return p.weight


def to_matrix(p: PauliString | str) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a Pauli string (Kronecker product)."""
    if isinstance(p, str):
        p = PauliString.parse(p)
    check_qubits(p.n)
    m = np.ones((1, 1), dtype=complex)
    for digit in p.digits:
        m = np.kron(m, _SINGLE[digit])
    return m


@lru_cache(maxsize=None)
def weights(n: int) -> np.ndarray:
    """Pauli weight of every basis element, as an int array of length 4**n."""
    check_qubits(n)
    w = np.zeros(1, dtype=int)
    for _ in range(n):
        w = (w[:, None] + np.array([0, 1, 1, 1])[None, :]).ravel()
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def digit_table(n: int) -> np.ndarray:
    """``(4**n, n)`` array of base-4 digits, column j is qubit j+1."""
    check_qubits(n)
    k = np.arange(4**n)
    table = np.stack([(k // 4 ** (n - 1 - j)) % 4 for j in range(n)], axis=1)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=8)
def basis_matrices(n: int) -> np.ndarray:
    """Stacked Pauli matrices, shape ``(4**n, 2**n, 2**n)``.

    Memory grows as 16**n complex entries, so this is meant for n <= 6.
    """
    check_qubits(n)
    mats = np.ones((1, 1, 1), dtype=complex)
    single = np.stack(_SINGLE)
    for _ in range(n):
        mats = np.einsum("aij,bkl->abikjl", mats, single).reshape(
            mats.shape[0] * 4, mats.shape[1] * 2, mats.shape[2] * 2
        )
    mats.setflags(write=False)
    return mats


def sector_count(n: int, w: int) -> int:
    """Number of n-qubit Pauli strings of weight w."""
    return comb(n, w) * 3**w


def index_of(text: str) -> int:
    return PauliString.parse(text).index


def labels(n: int) -> list[str]:
    return [p.letters for p in enumerate_basis(n)]


def y_free_indices(n: int) -> np.ndarray:
    """Indices of strings without a Y letter (the 3**n non-vanishing features)."""
    return np.flatnonzero(~np.any(digit_table(n) == 2, axis=1))
