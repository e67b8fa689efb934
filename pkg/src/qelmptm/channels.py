"""Hamiltonians, unitary evolution and Pauli transfer matrices (PTMs).

A PTM acts on Pauli feature vectors, ``phi' = T @ phi`` with
``T[k, l] = tr(P_k E(P_l)) / d``.  Rows and columns follow the basis order
of :mod:`qelmptm.pauli`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .pauli import basis_matrices, check_qubits, to_matrix

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class ContractViolation(ValueError):
    """Input breaks a documented precondition (unitarity, completeness, ...)."""


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    matrix: np.ndarray
    label: str
    n: int

    def __post_init__(self):
        h = np.asarray(self.matrix, dtype=complex)
        if h.shape != (2**self.n, 2**self.n):
            raise ValueError(f"Hamiltonian shape {h.shape} does not match n={self.n}")
        if np.max(np.abs(h - h.conj().T)) >= 1e-12:
            raise ContractViolation("Hamiltonian is not Hermitian")
        h.setflags(write=False)
        object.__setattr__(self, "matrix", h)


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Real PTM (square) or stacked effective PTM (rows = measured observables)."""

    entries: np.ndarray
    source: str = ""
    times: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, TransferMatrix):
            return TransferMatrix(self.entries @ other.entries, f"({self.source})*({other.source})")
        return self.entries @ other


def _site_operator(n: int, letters: dict[int, str]) -> np.ndarray:
    return to_matrix("".join(letters.get(j, "I") for j in range(n)))


def tfim_hamiltonian(variant: str, n: int, J: float = 1.0, h: float = 1.0) -> Hamiltonian:
    """Open-chain transverse-field Ising model.

    ``zz-x``: -J sum Z_j Z_{j+1} - h sum X_j;  ``xx-z``: -J sum X_j X_{j+1} - h sum Z_j.
    """
    n = check_qubits(n)
    variant = variant.lower().replace("_", "-")
    if variant in ("zz-x", "zzx"):
        bond, site = "Z", "X"
    elif variant in ("xx-z", "xxz"):
        bond, site = "X", "Z"
    else:
        raise ValueError(f"unknown TFIM variant {variant!r}")
    d = 2**n
    H = np.zeros((d, d), dtype=complex)
    for j in range(n - 1):
        H -= J * _site_operator(n, {j: bond, j + 1: bond})
    for j in range(n):
        H -= h * _site_operator(n, {j: site})
    tag = "zzx" if bond == "Z" else "xxz"
    return Hamiltonian(H, f"tfim-{tag}:J={J:g},h={h:g}", n)


def random_hamiltonian(n: int, seed: int) -> Hamiltonian:
    """GUE Hamiltonian with off-diagonal variance 1/4, so ||H||_2 ~ sqrt(d)."""
    n = check_qubits(n)
    d = 2**n
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = (A + A.conj().T) / (2.0 * np.sqrt(2.0))
    H = (H + H.conj().T) / 2
    return Hamiltonian(H, f"random:seed={seed}", n)


def parse_hamiltonian(token: str, n: int) -> Hamiltonian:
    """Build a Hamiltonian from ``tfim-zzx:J=1,h=1``, ``tfim-xxz:...`` or ``random:seed=N``."""
    kind, _, args = token.partition(":")
    params = {}
    for item in filter(None, (a.strip() for a in args.split(","))):
        key, _, val = item.partition("=")
        params[key.strip()] = val.strip()
    kind = kind.strip().lower()
    if kind in ("tfim-zzx", "tfim-zz-x"):
        return tfim_hamiltonian("zz-x", n, float(params.get("J", 1)), float(params.get("h", 1)))
    if kind in ("tfim-xxz", "tfim-xx-z"):
        return tfim_hamiltonian("xx-z", n, float(params.get("J", 1)), float(params.get("h", 1)))
    if kind == "random":
        return random_hamiltonian(n, int(params.get("seed", 0)))
    if kind in ("none", "identity"):
        return Hamiltonian(np.zeros((2**n, 2**n)), "identity", n)
    raise ValueError(f"unknown Hamiltonian token {token!r}")


def evolve(h: Hamiltonian, t: float) -> np.ndarray:
    """U(t) = exp(-i t H) from the Hermitian eigendecomposition."""
    try:
        evals, W = np.linalg.eigh(h.matrix)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigendecomposition failed for {h.label}") from exc
    return (W * np.exp(-1j * t * evals)) @ W.conj().T


def _check_unitary(U: np.ndarray, tol: float = 1e-10) -> int:
    U = np.asarray(U)
    d = U.shape[0]
    if U.shape != (d, d) or d & (d - 1):
        raise ContractViolation(f"expected a 2**n square matrix, got {U.shape}")
    if np.max(np.abs(U @ U.conj().T - np.eye(d))) > tol:
        raise ContractViolation("matrix is not unitary")
    return d.bit_length() - 1


def _ptm_from_kraus(ops, n: int) -> np.ndarray:
    P = basis_matrices(n)
    d = 2**n
    flat = P.reshape(len(P), -1)
    acc = np.zeros((len(P), len(P)), dtype=complex)
    for K in ops:
        # image of every basis element: K P_j K^dagger
        img = np.einsum("ab,jbc,dc->jad", K, P, K.conj(), optimize=True).reshape(len(P), -1)
        # tr(P_k M) = sum_ab conj(P_k)_ab M_ab for Hermitian P_k
        acc += flat.conj() @ img.T
    acc /= d
    if np.max(np.abs(acc.imag)) > 1e-10:
        raise ContractViolation("PTM has an imaginary residue above 1e-10")
    return acc.real


def ptm_of_unitary(U, source: str = "unitary") -> TransferMatrix:
    """Orthogonal PTM V[k, j] = tr(P_k U P_j U^dagger) / d."""
    n = _check_unitary(U)
    return TransferMatrix(_ptm_from_kraus([np.asarray(U, dtype=complex)], n), source)


@dataclass(frozen=True, eq=False)
class KrausSet:
    operators: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(K, dtype=complex) for K in self.operators)
        if not ops:
            raise ContractViolation("empty Kraus set")
        d = ops[0].shape[0]
        total = sum(K.conj().T @ K for K in ops)
        if np.max(np.abs(total - np.eye(d))) > 1e-10:
            raise ContractViolation("Kraus operators are not complete (sum K^dag K != I)")
        object.__setattr__(self, "operators", ops)

    @property
    def n(self) -> int:
        return self.operators[0].shape[0].bit_length() - 1


def ptm_of_kraus(ks: KrausSet | list) -> TransferMatrix:
    """T[a, b] = sum_l tr(P_a K_l P_b K_l^dagger) / d."""
    if not isinstance(ks, KrausSet):
        ks = KrausSet(tuple(ks))
    return TransferMatrix(_ptm_from_kraus(ks.operators, ks.n), "kraus")


def depolarizing_kraus(lam: float) -> KrausSet:
    """Kraus form of rho -> lam rho + (1 - lam) I/2 (single qubit)."""
    _unit_interval("lambda", lam)
    ops = [np.sqrt(lam) * np.eye(2)] + [
        np.sqrt((1 - lam) / 4) * to_matrix(p) for p in "IXYZ"
    ]
    return KrausSet(tuple(ops))


def amplitude_damping_kraus(gamma: float) -> KrausSet:
    _unit_interval("gamma", gamma)
    K0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    K1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return KrausSet((K0, K1))


def _unit_interval(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


def noise_ptm(kind: str, *params: float) -> TransferMatrix:
    """Single-qubit 4x4 PTM of a standard noise channel.

    ``depolarizing(lam)``, ``dephasing(p)`` (Z-dephasing) or
    ``amplitude-damping(gamma, z_star)``.
    """
    kind = kind.lower()
    if kind in ("dep", "depolarizing"):
        (lam,) = params
        _unit_interval("lambda", lam)
        return TransferMatrix(np.diag([1.0, lam, lam, lam]), f"dep:{lam:g}")
    if kind in ("dephz", "dephasing", "dephasing-z"):
        (p,) = params
        _unit_interval("p", p)
        return TransferMatrix(np.diag([1.0, 1 - 2 * p, 1 - 2 * p, 1.0]), f"dephz:{p:g}")
    if kind in ("ad", "amplitude-damping"):
        gamma, z_star = (params + (1.0,))[:2]
        _unit_interval("gamma", gamma)
        if not -1.0 <= z_star <= 1.0:
            raise ValueError(f"z* must lie in [-1, 1], got {z_star!r}")
        s = np.sqrt(1 - gamma)
        T = np.diag([1.0, s, s, 1 - gamma])
        T[3, 0] = z_star * gamma
        return TransferMatrix(T, f"ad:{gamma:g},{z_star:g}")
    raise ValueError(f"unknown noise channel {kind!r}")


def parse_noise(token: str) -> TransferMatrix:
    """``dep:0.9``, ``dephz:0.1`` or ``ad:0.2,1.0``."""
    kind, _, args = token.partition(":")
    return noise_ptm(kind, *(float(a) for a in args.split(",") if a.strip()))


def tensor_ptm(factors) -> TransferMatrix:
    """Kronecker product of single-qubit PTMs (qubit 1 first)."""
    mats = [np.asarray(f, dtype=float) for f in factors]
    if not mats:
        raise ValueError("need at least one factor")
    return TransferMatrix(reduce(np.kron, mats), "tensor")


@dataclass(frozen=True)
class AffineParts:
    translation: np.ndarray
    linear: np.ndarray
    unital: bool
    singular_range: tuple


def affine_decompose(T) -> AffineParts:
    """Split a trace-preserving PTM into Bloch translation and linear block."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ContractViolation("affine decomposition needs a square PTM")
    e0 = np.zeros(T.shape[1])
    e0[0] = 1.0
    if np.max(np.abs(T[0] - e0)) > 1e-10:
        raise ContractViolation("first row is not e0 (channel not trace preserving)")
    t = T[1:, 0].copy()
    omega = T[1:, 1:].copy()
    s = np.linalg.svd(omega, compute_uv=False)
    return AffineParts(t, omega, bool(np.linalg.norm(t) < 1e-12), (float(s.min()), float(s.max())))


def hadamard_all(n: int) -> np.ndarray:
    return reduce(np.kron, [HADAMARD] * check_qubits(n))


def apply_channel_to_state(ks: KrausSet, rho: np.ndarray) -> np.ndarray:
    return sum(K @ rho @ K.conj().T for K in ks.operators)
