"""Observable selection, temporally multiplexed effective PTMs and
operator-spreading diagnostics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channels import Hamiltonian, TransferMatrix, evolve, ptm_of_unitary
from .pauli import PauliString, check_qubits, digit_table, weights

TOKENS = ("z", "z+zz", "x", "weight1", "zstrings", "all", "all-noid")


@dataclass(frozen=True)
class ObservableSet:
    indices: tuple
    descriptor: str
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("observable indices must be distinct")
        if any(not 0 <= i < 4**self.n for i in idx):
            raise ValueError("observable index out of range")
        object.__setattr__(self, "indices", idx)

    @property
    def M(self) -> int:
        return len(self.indices)

    @property
    def labels(self) -> list[str]:
        return [PauliString.from_index(i, self.n).letters for i in self.indices]


@dataclass(frozen=True)
class MultiplexPlan:
    times: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise ValueError("multiplexing needs at least one time")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("multiplexing times must be nondecreasing")
        object.__setattr__(self, "times", times)

    @property
    def L(self) -> int:
        return len(self.times)

    @classmethod
    def default(cls, L: int, include_zero: bool = False) -> "MultiplexPlan":
        """Schedule t_l = l for l = 1..L, optionally preceded by t = 0."""
        times = tuple(float(t) for t in range(1, L + 1))
        return cls(((0.0,) + times) if include_zero else times)


def _site(n, letters: dict) -> int:
    return PauliString("".join(letters.get(j, "I") for j in range(n))).index


def select_observables(token: str, n: int, include_identity: bool = True) -> ObservableSet:
    """Deterministic observable selection.

    ``z``: single-site Z; ``z+zz``: plus open-chain nearest-neighbour ZZ;
    ``x``: single-site X; ``weight1``: all 3n single-site Paulis;
    ``zstrings``: every string over {I, Z}; ``all``: the full basis
    (``include_identity=False`` or ``all-noid`` drops the identity).
    A comma-separated list of Pauli labels is also accepted.
    """
    n = check_qubits(n)
    tok = token.strip().lower()
    if tok == "z":
        idx = [_site(n, {j: "Z"}) for j in range(n)]
    elif tok == "x":
        idx = [_site(n, {j: "X"}) for j in range(n)]
    elif tok == "z+zz":
        idx = [_site(n, {j: "Z"}) for j in range(n)]
        idx += [_site(n, {j: "Z", j + 1: "Z"}) for j in range(n - 1)]
    elif tok == "weight1":
        idx = [_site(n, {j: a}) for j in range(n) for a in "XYZ"]
    elif tok == "zstrings":
        digits = digit_table(n)
        idx = np.flatnonzero(np.all((digits == 0) | (digits == 3), axis=1)).tolist()
    elif tok in ("all", "all-noid"):
        start = 0 if include_identity and tok == "all" else 1
        idx = list(range(start, 4**n))
    elif all(c in "IXYZ," for c in token.strip().upper()) and token.strip():
        strings = [PauliString.parse(s) for s in token.split(",") if s.strip()]
        if any(p.n != n for p in strings):
            raise ValueError(f"Pauli labels in {token!r} must have length {n}")
        idx = [p.index for p in strings]
    else:
        raise ValueError(f"unknown observable selection {token!r}; expected one of {TOKENS}")
    return ObservableSet(tuple(idx), tok, n)


def unitary_ptm(h: Hamiltonian, t: float) -> np.ndarray:
    return ptm_of_unitary(evolve(h, t), f"{h.label}@t={t:g}").entries


def effective_ptm(h: Hamiltonian, s: ObservableSet, plan: MultiplexPlan, workers: int = 1) -> TransferMatrix:
    """Observability matrix: rows S of V(t_l) stacked over the plan's times."""
    sel = np.array(s.indices)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(lambda t: unitary_ptm(h, t)[sel], plan.times))
    else:
        blocks = [unitary_ptm(h, t)[sel] for t in plan.times]
    return TransferMatrix(
        np.vstack(blocks),
        source=f"{h.label}|{s.descriptor}",
        times=plan.times,
        meta={"observables": s.indices, "n": h.n},
    )


def selection_matrix(s: ObservableSet) -> TransferMatrix:
    """Rows of the identity picking the selected observables (no reservoir)."""
    R = np.eye(4**s.n)[np.array(s.indices)]
    return TransferMatrix(R, source=f"identity|{s.descriptor}", times=(0.0,),
                          meta={"observables": s.indices, "n": s.n})


def _n_from_dim(dim: int) -> int:
    n = (dim.bit_length() - 1) // 2
    if 4**n != dim:
        raise ValueError(f"dimension {dim} is not a power of 4")
    return n


def pauli_weight_average(V, k: int) -> float:
    """Coefficient-weighted Pauli weight of row k: sum_j weight(P_j) V[k, j]^2."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValueError("Pauli weight average needs a square PTM")
    w = weights(_n_from_dim(V.shape[1]))
    return float(np.dot(w, V[k] ** 2))


def sector_masses(V, k: int) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    n = _n_from_dim(V.shape[1])
    return np.bincount(weights(n), weights=V[k] ** 2, minlength=n + 1)


@dataclass(frozen=True)
class SpreadingProfile:
    times: np.ndarray
    nu_bar: np.ndarray
    sectors: np.ndarray  # (len(times), n + 1)
    observable: str

    def rows(self):
        for t, nu, sec in zip(self.times, self.nu_bar, self.sectors):
            yield [float(t), float(nu), *map(float, sec)]

    @property
    def header(self) -> list[str]:
        return ["t", "nu_bar"] + [f"sector_{w}" for w in range(self.sectors.shape[1])]


def spreading_profile(h: Hamiltonian, k: int | str, times) -> SpreadingProfile:
    """Pauli weight average and per-weight sector masses of observable k over time."""
    if isinstance(k, str):
        k = PauliString.parse(k).index
    times = np.asarray(times, dtype=float)
    nu, sec = [], []
    for t in times:
        V = unitary_ptm(h, t)
        nu.append(pauli_weight_average(V, k))
        sec.append(sector_masses(V, k))
    return SpreadingProfile(times, np.array(nu), np.array(sec), PauliString.from_index(k, h.n).letters)
