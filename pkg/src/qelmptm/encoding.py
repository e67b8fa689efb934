"""Product-state encodings and their Pauli feature vectors.

Each input coordinate ``u_j`` is loaded onto qubit j as a pure state on a
great circle of the Bloch sphere.  The n-qubit feature vector (Pauli
expectation values of the encoded state) is the Kronecker product of the
single-qubit vectors ``(1, <X>, <Y>, <Z>)``; every component whose string
contains a Y letter vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb, factorial

import numpy as np

from .pauli import check_qubits, digit_table, y_free_indices

SCHEMES = ("amp-sqrt", "amp-sq", "rot-y")
_ALIASES = {
    "amp-sqrt": "amp-sqrt", "amplitudesqrt": "amp-sqrt", "amplitude-sqrt": "amp-sqrt",
    "amp-sq": "amp-sq", "amplitudesquare": "amp-sq", "amplitude-square": "amp-sq",
    "rot-y": "rot-y", "rotationaly": "rot-y", "rotational": "rot-y",
}


class DomainError(ValueError):
    """An input coordinate lies outside the encoding domain."""


class SingularExpansionError(ValueError):
    """A Taylor expansion point where a feature derivative is singular."""


@dataclass(frozen=True)
class EncodingScheme:
    """Single-qubit encoding rule.

    ``amp-sqrt``: sqrt(u)|0> + sqrt(1-u)|1>, u in [0, 1].
    ``amp-sq``:   u|0> + sqrt(1-u^2)|1>,     u in [-1, 1].
    ``rot-y``:    cos(pi u/2)|0> + sin(pi u/2)|1>, u in [0, 1]
                  (Bloch vector (sin pi u, 0, cos pi u)).
    """

    kind: str

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ValueError(f"unknown encoding {self.kind!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "kind", kind)

    @property
    def domain(self) -> tuple[float, float]:
        return (-1.0, 1.0) if self.kind == "amp-sq" else (0.0, 1.0)

    @property
    def token(self) -> str:
        return self.kind

    def check(self, u, name: str = "u") -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = self.domain
        bad = ~((u >= lo) & (u <= hi))
        if np.any(bad):
            pos = np.argwhere(bad)[0]
            coord = pos[-1] if u.ndim else 0
            raise DomainError(
                f"{name} coordinate {int(coord)} = {float(u[tuple(pos)])!r} "
                f"outside {self.kind} domain [{lo}, {hi}]"
            )
        return u

    def single(self, u, check: bool = True) -> np.ndarray:
        """Single-qubit features (1, phi_x, phi_y, phi_z) along a new last axis."""
        u = self.check(u) if check else np.asarray(u, dtype=float)
        out = np.zeros(u.shape + (4,))
        out[..., 0] = 1.0
        if self.kind == "amp-sqrt":
            out[..., 1] = 2.0 * np.sqrt(np.clip((1.0 - u) * u, 0.0, None))
            out[..., 3] = 2.0 * u - 1.0
        elif self.kind == "amp-sq":
            out[..., 1] = 2.0 * u * np.sqrt(np.clip(1.0 - u * u, 0.0, None))
            out[..., 3] = 2.0 * u * u - 1.0
        else:
            out[..., 1] = np.sin(np.pi * u)
            out[..., 3] = np.cos(np.pi * u)
        return out

    def amplitudes(self, u: float, check: bool = True) -> np.ndarray:
        """State vector (a0, a1) of the encoded qubit."""
        u = float(self.check(u) if check else u)
        if self.kind == "amp-sqrt":
            return np.array([np.sqrt(u), np.sqrt(max(1.0 - u, 0.0))], dtype=complex)
        if self.kind == "amp-sq":
            return np.array([u, np.sqrt(max(1.0 - u * u, 0.0))], dtype=complex)
        return np.array([np.cos(np.pi * u / 2), np.sin(np.pi * u / 2)], dtype=complex)

    def series(self, u0: float, r: int) -> np.ndarray:
        """Taylor coefficients of the four single-qubit features in powers of (u - u0).

        Returns a ``(4, r + 1)`` array; the Y row is zero.
        """
        out = np.zeros((4, r + 1))
        out[0, 0] = 1.0
        if self.kind == "rot-y":
            m = np.arange(r + 1)
            scale = np.array([np.pi**k / factorial(k) for k in m])
            out[1] = scale * np.sin(np.pi * u0 + m * np.pi / 2)
            out[3] = scale * np.cos(np.pi * u0 + m * np.pi / 2)
            return out
        lo, hi = self.domain
        if not lo < u0 < hi:
            raise SingularExpansionError(
                f"{self.kind} features are not analytic at u0={u0!r}; "
                f"expansion point must lie strictly inside ({lo}, {hi})"
            )
        if self.kind == "amp-sqrt":
            # phi_x = 2 sqrt(w), w = (u0+v)(1-u0-v)
            w = _poly([u0 * (1 - u0), 1 - 2 * u0, -1.0], r)
            out[1] = 2.0 * _series_sqrt(w)
            out[3, :2] = [2 * u0 - 1, 2.0][: r + 1]
        else:
            # phi_x = 2 (u0+v) sqrt(1 - (u0+v)^2)
            w = _poly([1 - u0 * u0, -2 * u0, -1.0], r)
            out[1] = 2.0 * _series_mul(_poly([u0, 1.0], r), _series_sqrt(w))
            out[3] = 2.0 * _series_mul(_poly([u0, 1.0], r), _poly([u0, 1.0], r)) - _poly([1.0], r)
        return out


def scheme(token: str | EncodingScheme) -> EncodingScheme:
    return token if isinstance(token, EncodingScheme) else EncodingScheme(token)


def _poly(coeffs, r: int) -> np.ndarray:
    out = np.zeros(r + 1)
    c = np.asarray(coeffs, dtype=float)[: r + 1]
    out[: len(c)] = c
    return out


def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: len(a)]


def _series_sqrt(w: np.ndarray) -> np.ndarray:
    """Power series g with g*g = w, from g0 = sqrt(w0) (requires w0 > 0)."""
    g = np.zeros_like(w)
    g[0] = np.sqrt(w[0])
    for m in range(1, len(w)):
        g[m] = (w[m] - np.dot(g[1:m], g[m - 1:0:-1])) / (2.0 * g[0])
    return g


def single_qubit_features(enc, u, check: bool = True) -> np.ndarray:
    """Vector (1, phi_x, phi_y, phi_z) of one encoded coordinate."""
    return scheme(enc).single(u, check=check)


def feature_vector(enc, x, check: bool = True) -> np.ndarray:
    """Full 4**n Pauli feature vector of the encoded product state.

    ``x`` may be a single input of shape ``(n,)`` or a batch ``(P, n)``; the
    result has shape ``(4**n,)`` or ``(P, 4**n)``.
    """
    enc = scheme(enc)
    x = np.asarray(x, dtype=float)
    single_input = x.ndim == 1
    xb = np.atleast_2d(x)
    n = check_qubits(xb.shape[1])
    per_qubit = enc.single(xb, check=check)  # (P, n, 4)
    phi = per_qubit[:, 0, :]
    for j in range(1, n):
        phi = (phi[:, :, None] * per_qubit[:, j, None, :]).reshape(len(xb), -1)
    return phi[0] if single_input else phi


def monomials(D: int, r: int) -> list[tuple[int, ...]]:
    """Exponent tuples of all monomials in D variables of total degree <= r.

    Graded order: by degree, then by the variable multiset (x before y ...).
    """
    out = []
    for deg in range(r + 1):
        for combo in combinations_with_replacement(range(D), deg):
            e = [0] * D
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def monomial_basis(u, exponents) -> np.ndarray:
    """Evaluate monomials u**e for each exponent tuple; shape ``(..., len(exponents))``."""
    u = np.asarray(u, dtype=float)
    E = np.asarray(exponents, dtype=int)
    return np.prod(u[..., None, :] ** E, axis=-1)


def monomial_label(e, names="xyz") -> str:
    if sum(e) == 0:
        return "1"
    parts = []
    for name, p in zip(names if len(e) <= len(names) else [f"u{i + 1}" for i in range(len(e))], e):
        if p == 1:
            parts.append(name)
        elif p > 1:
            parts.append(f"{name}^{p}")
    return "*".join(parts)


@dataclass(frozen=True)
class TaylorMatrix:
    """Coefficients ``A`` with phi(u) ~= A @ B(u) near ``u0``.

    Rows follow ``rows`` (indices of the non-vanishing features), columns
    follow ``exponents`` (raw monomials in u, not in u - u0).
    """

    A: np.ndarray
    exponents: list
    rows: np.ndarray
    u0: np.ndarray
    order: int

    def basis(self, u) -> np.ndarray:
        return monomial_basis(u, self.exponents)

    def evaluate(self, u) -> np.ndarray:
        return self.basis(u) @ self.A.T


def reexpand_matrix(exponents, u0, scale: float = 1.0) -> np.ndarray:
    """T with ``((u - u0) / scale)**a = sum_b T[a, b] u**b`` for the given exponents."""
    alphas = np.asarray(exponents, dtype=int)
    u0 = np.asarray(u0, dtype=float)
    T = np.ones((len(alphas), len(alphas)))
    for j in range(alphas.shape[1]):
        a = alphas[:, j][:, None]
        b = alphas[:, j][None, :]
        below = b <= a
        binom = np.vectorize(comb)(a, np.clip(b, 0, None)) * below
        T *= binom * np.where(below, (-u0[j]) ** np.clip(a - b, 0, None), 0.0)
    return T / scale ** alphas.sum(axis=1)[:, None]


def feature_taylor_matrix(enc, u0, r: int) -> TaylorMatrix:
    """Exact order-r Taylor coefficients of the non-vanishing Pauli features.

    The single-qubit series are multiplied across qubits (total degree
    truncated at r) and the shifted monomials ``(u - u0)**a`` are re-expanded
    into raw monomials ``u**b``.  Result rows are the q = 3**n Y-free features.
    """
    enc = scheme(enc)
    u0 = np.asarray(u0, dtype=float)
    n = check_qubits(len(u0))
    if r < 0:
        raise ValueError("Taylor order must be non-negative")
    S = np.stack([enc.series(float(c), r) for c in u0])  # (n, 4, r+1)
    rows = y_free_indices(n)
    digits = digit_table(n)[rows]  # (q, n)
    exps = monomials(n, r)
    alphas = np.array(exps)  # (b, n)
    shifted = np.ones((len(rows), len(exps)))
    for j in range(n):
        shifted *= S[j][digits[:, j][:, None], alphas[None, :, j]]
    T = reexpand_matrix(exps, u0)
    return TaylorMatrix(A=shifted @ T, exponents=exps, rows=rows, u0=u0.copy(), order=r)
