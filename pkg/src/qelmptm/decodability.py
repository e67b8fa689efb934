"""Geometric decodability of Pauli features and of input monomials.

Everything here is built on one SVD with one relative cutoff, so that the
rank, the row-space projector ``R^+ R`` and the null space stay mutually
consistent (``sum(gamma^2) == rank`` holds to rounding).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .encoding import feature_taylor_matrix, monomial_label, scheme
from .pauli import PauliString, weights

DECODABLE_THRESHOLD = 0.5


@dataclass(frozen=True)
class SVDSplit:
    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray
    rank: int
    cutoff: float

    @property
    def row_basis(self) -> np.ndarray:
        return self.Vt[: self.rank]

    @property
    def null_basis(self) -> np.ndarray:
        return self.Vt[self.rank:]


def default_rtol(shape) -> float:
    return max(shape) * np.finfo(float).eps


def svd_split(M, rtol: float | None = None) -> SVDSplit:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if rtol is None:
        rtol = default_rtol(M.shape)
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("SVD did not converge") from exc
    cutoff = rtol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff)) if s.size and s[0] > 0 else 0
    return SVDSplit(U, s, Vt, rank, cutoff)


def pinv(M, rtol: float | None = None) -> np.ndarray:
    """Moore-Penrose inverse with singular values below ``rtol * s_max`` dropped."""
    sp = svd_split(M, rtol)
    r = sp.rank
    return (sp.Vt[:r].T / sp.s[:r]) @ sp.U[:, :r].T


def matrix_rank(M, rtol: float | None = None) -> int:
    return svd_split(M, rtol).rank


@dataclass(frozen=True)
class DecodabilityReport:
    scores: np.ndarray
    rank: int
    sector_means: np.ndarray
    threshold_mask: np.ndarray
    n: int

    @property
    def labels(self) -> list[str]:
        return [PauliString.from_index(k, self.n).letters for k in range(4**self.n)]

    def rows(self):
        w = weights(self.n)
        for k, (lab, g) in enumerate(zip(self.labels, self.scores)):
            yield [lab, int(w[k]), float(g), bool(g > DECODABLE_THRESHOLD)]


def projector(R, rtol: float | None = None) -> np.ndarray:
    """Orthogonal projector onto the row space of R (equals R^+ R)."""
    B = svd_split(R, rtol).row_basis
    return B.T @ B


def decodability_scores(R, rtol: float | None = None) -> DecodabilityReport:
    """gamma_r^2 = (R^+ R)_rr for every Pauli feature r."""
    R = np.asarray(R, dtype=float)
    sp = svd_split(R, rtol)
    scores = np.sum(sp.row_basis**2, axis=0)
    n = (R.shape[1].bit_length() - 1) // 2
    w = weights(n)
    means = np.array([scores[w == k].mean() for k in range(n + 1)])
    return DecodabilityReport(scores, sp.rank, means, scores > DECODABLE_THRESHOLD, n)


def decoding_weights(R, r: int, rtol: float | None = None) -> np.ndarray:
    """Minimum-norm weights w with w^T R closest to e_r^T, i.e. row r of R^+."""
    return pinv(R, rtol)[r].copy()


@dataclass(frozen=True)
class Isolation:
    by_null_space: np.ndarray
    by_score: np.ndarray

    @property
    def consistent(self) -> bool:
        return bool(np.array_equal(self.by_null_space, self.by_score))

    @property
    def count(self) -> int:
        return int(self.by_null_space.sum())


def isolatable_features(R, tol: float = 1e-8, rtol: float | None = None) -> Isolation:
    """Feature r is isolatable iff e_r is orthogonal to null(R).

    Both the null-space test and the equivalent ``|gamma_r^2 - 1| < tol`` test
    are returned so callers can cross-check them.
    """
    sp = svd_split(R, rtol)
    N = sp.null_basis
    if N.shape[0]:
        by_null = np.max(np.abs(N), axis=0) < tol
    else:
        by_null = np.ones(sp.Vt.shape[1], dtype=bool)
    gamma2 = np.sum(sp.row_basis**2, axis=0)
    return Isolation(by_null, np.abs(gamma2 - 1.0) < tol)


def default_grid(enc, D: int, points: int = 5) -> np.ndarray:
    """Uniform grid of expansion points: [0.1, 0.9]^D for amp-sqrt, [-0.9, 0.9]^D otherwise."""
    lo, hi = (0.1, 0.9) if scheme(enc).kind == "amp-sqrt" else (-0.9, 0.9)
    axis = np.linspace(lo, hi, points)
    return np.array(list(product(axis, repeat=D)))


@dataclass(frozen=True)
class MonomialReport:
    scores: np.ndarray  # grid mean of diag(A^+ A)
    scores_of_mean_taylor: np.ndarray  # diag of projector of the grid-mean A
    per_point: np.ndarray  # (G, b)
    ranks: np.ndarray
    exponents: list
    expansion_points: np.ndarray
    projector_mean: np.ndarray

    @property
    def labels(self) -> list[str]:
        return [monomial_label(e) for e in self.exponents]

    def rows(self):
        for e, lab, a, b in zip(self.exponents, self.labels, self.scores, self.scores_of_mean_taylor):
            yield [lab, " ".join(map(str, e)), sum(e), float(a), float(b)]


def monomial_decodability(enc, grid, r: int = 4, rtol: float | None = None) -> MonomialReport:
    """kappa_j^2 = (A^+ A)_jj of the Taylor matrix, averaged over expansion points.

    Two orderings are reported: the grid mean of per-point projector
    diagonals (identical to the diagonal of the mean projector), and the
    diagonal of the projector built from the grid-mean Taylor matrix.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    per_point, ranks, projs, As = [], [], [], []
    exps = None
    for u0 in grid:
        tm = feature_taylor_matrix(enc, u0, r)
        exps = tm.exponents
        P = projector(tm.A, rtol)
        projs.append(P)
        per_point.append(np.diag(P).copy())
        ranks.append(matrix_rank(tm.A, rtol))
        As.append(tm.A)
    projector_mean = np.mean(projs, axis=0)
    per_point = np.array(per_point)
    return MonomialReport(
        scores=per_point.mean(axis=0),
        scores_of_mean_taylor=np.diag(projector(np.mean(As, axis=0), rtol)).copy(),
        per_point=per_point,
        ranks=np.array(ranks),
        exponents=exps,
        expansion_points=grid,
        projector_mean=projector_mean,
    )
