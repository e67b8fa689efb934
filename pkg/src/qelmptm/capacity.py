"""Nonlinear capacity: R^2 against orthonormal degree-k polynomial targets."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from numpy.polynomial import hermite_e, legendre

from .decodability import pinv

DISTRIBUTIONS = {
    "legendre-shifted": "uniform[0,1]",
    "legendre": "uniform[-1,1]",
    "hermite": "normal(0,1)",
}
_ENCODING_KIND = {"amp-sqrt": "legendre-shifted", "amp-sq": "legendre", "rot-y": "hermite"}


class DegenerateTargetError(ValueError):
    pass


def target_kind_for(encoding: str) -> str:
    """Polynomial family paired with an encoding's input distribution."""
    return _ENCODING_KIND[encoding]


def orthonormal_poly(kind: str, j: int, u) -> np.ndarray:
    """Degree-j polynomial orthonormal under the distribution tied to ``kind``."""
    u = np.asarray(u, dtype=float)
    c = np.zeros(j + 1)
    c[j] = 1.0
    if kind == "legendre-shifted":
        return np.sqrt(2 * j + 1) * legendre.legval(2 * u - 1, c)
    if kind == "legendre":
        return np.sqrt(2 * j + 1) * legendre.legval(u, c)
    if kind == "hermite":
        return hermite_e.hermeval(u, c) / np.sqrt(factorial(j))
    raise ValueError(f"unsupported distribution {kind!r}; expected one of {list(DISTRIBUTIONS)}")


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """All exponent tuples e of length n with sum k (reverse-lexicographic)."""
    if n == 1:
        return [(k,)]
    return [(a,) + rest for a in range(k, -1, -1) for rest in multi_indices(n - 1, k - a)]


@dataclass(frozen=True)
class TargetFamily:
    degree: int
    n: int
    kind: str
    indices: tuple = field(default=())

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("target degree must be >= 1")
        if self.kind not in DISTRIBUTIONS:
            raise ValueError(f"unsupported distribution {self.kind!r}")
        object.__setattr__(self, "indices", tuple(multi_indices(self.n, self.degree)))

    def __len__(self):
        return len(self.indices)

    def evaluate(self, U) -> np.ndarray:
        """Targets y_e(u) = prod_i p_{e_i}(u_i); shape (P, len(family))."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        cache = {}
        out = np.ones((len(U), len(self)))
        for t, e in enumerate(self.indices):
            for i, ei in enumerate(e):
                if ei:
                    if (i, ei) not in cache:
                        cache[i, ei] = orthonormal_poly(self.kind, ei, U[:, i])
                    out[:, t] *= cache[i, ei]
        return out

    def sample(self, P: int, rng: np.random.Generator) -> np.ndarray:
        return sample_inputs(self.kind, P, self.n, rng)


def sample_inputs(kind: str, P: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "legendre-shifted":
        return rng.uniform(0.0, 1.0, size=(P, n))
    if kind == "legendre":
        return rng.uniform(-1.0, 1.0, size=(P, n))
    if kind == "hermite":
        return rng.standard_normal(size=(P, n))
    raise ValueError(f"unsupported distribution {kind!r}")


def build_targets(k: int, n: int, distribution: str) -> TargetFamily:
    return TargetFamily(k, n, distribution)


def ridge_fit(F: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Weights (M, T) of min ||F W - Y||^2 + lam ||W||^2 for samples in rows of F."""
    M = F.shape[1]
    if lam == 0:
        return pinv(F) @ Y
    A = F.T @ F + lam * np.eye(M)
    return np.linalg.solve(A, F.T @ Y)


@dataclass(frozen=True)
class CapacityScore:
    degree: int
    per_target: np.ndarray
    indices: tuple

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_target))

    @property
    def std(self) -> float:
        return float(np.std(self.per_target))


def capacity_score(F_train, U_train, F_test, U_test, targets: TargetFamily, lam: float = 1e-8) -> CapacityScore:
    """Held-out R^2 of a ridge readout for every member of a target family.

    ``F_*`` hold readout samples in rows, ``U_*`` the inputs that produced them.
    """
    Y_train = targets.evaluate(U_train)
    Y_test = targets.evaluate(U_test)
    var = Y_test.var(axis=0)
    if np.any(var < 1e-12):
        raise DegenerateTargetError("target variance below 1e-12 on the test samples")
    W = ridge_fit(np.asarray(F_train), Y_train, lam)
    resid = Y_test - np.asarray(F_test) @ W
    r2 = 1.0 - np.mean(resid**2, axis=0) / var
    return CapacityScore(targets.degree, r2, targets.indices)


@dataclass(frozen=True)
class CapacityCurve:
    degrees: np.ndarray
    scores: np.ndarray
    stds: np.ndarray
    n_targets: np.ndarray
    samples: int
    lam: float
    relative: np.ndarray | None = None

    @property
    def integrated(self) -> float:
        return float(np.sum(self.scores))

    def rows(self):
        for i, k in enumerate(self.degrees):
            row = [int(k), float(self.scores[i]), float(self.stds[i]), int(self.n_targets[i])]
            if self.relative is not None:
                row.append(float(self.relative[i]))
            yield row

    @property
    def header(self) -> list[str]:
        h = ["degree", "R2_mean", "R2_std", "n_targets"]
        return h + ["R2_relative"] if self.relative is not None else h


def capacity_curve(feature_fn, n: int, kind: str, degrees=range(1, 9), P_train: int = 20000,
                   P_test: int = 5000, lam: float = 1e-8, seed: int = 0) -> CapacityCurve:
    """R^2(k) for each degree, with readout samples from ``feature_fn(U) -> (P, M)``."""
    rng = np.random.default_rng(seed)
    U = sample_inputs(kind, P_train + P_test, n, rng)
    F = feature_fn(U)
    Ftr, Fte, Utr, Ute = F[:P_train], F[P_train:], U[:P_train], U[P_train:]
    degs, means, stds, counts = [], [], [], []
    for k in degrees:
        sc = capacity_score(Ftr, Utr, Fte, Ute, TargetFamily(k, n, kind), lam)
        degs.append(k)
        means.append(sc.mean)
        stds.append(sc.std)
        counts.append(len(sc.per_target))
    return CapacityCurve(np.array(degs), np.array(means), np.array(stds), np.array(counts),
                         P_train + P_test, lam)


def z_readout_capacity(n: int, k: int) -> float:
    """Closed-form R^2 for amplitude encoding read out through Z strings only."""
    return comb(n, k) / comb(n + k - 1, k) if k <= n else 0.0


@dataclass(frozen=True)
class Moments:
    C: np.ndarray
    b: np.ndarray
    var: np.ndarray


def centered_moments(Phi: np.ndarray, Y: np.ndarray) -> Moments:
    """Feature covariance, feature/target cross-covariance and target variance.

    ``Phi`` is (P, F) and ``Y`` is (P,) or (P, T); all moments are centered.
    """
    Phi = np.asarray(Phi, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Pc = Phi - Phi.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    P = len(Phi)
    return Moments(Pc.T @ Pc / P, Pc.T @ Yc / P, np.mean(Yc**2, axis=0))


def capacity_general(R, C, b, var) -> np.ndarray | float:
    """R^2 = b^T R^T (R C R^T)^+ R b / Var(y), for centered moments.

    ``b`` may hold several targets as columns; ``var`` then matches them.
    """
    R = np.asarray(R, dtype=float)
    b = np.asarray(b, dtype=float)
    Rb = R @ b
    G = R @ np.asarray(C, dtype=float) @ R.T
    num = np.einsum("i...,i...->...", Rb, pinv(G) @ Rb)
    return num / np.asarray(var, dtype=float)


def relative_capacity(curve: CapacityCurve, all_pauli: CapacityCurve, delta: float = 0.1) -> CapacityCurve:
    """R^2(k) / (R^2_all(k) + delta); delta suppresses meaningless denominators."""
    if not np.array_equal(curve.degrees, all_pauli.degrees):
        raise ValueError("capacity curves are on different degree grids")
    rel = curve.scores / (all_pauli.scores + delta)
    return CapacityCurve(curve.degrees, curve.scores, curve.stds, curve.n_targets,
                         curve.samples, curve.lam, rel)
