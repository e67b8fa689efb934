"""Classical representation of a trained QELM and flow-map identification.

The learned predictor ``W^T R phi(u)`` is rewritten over a monomial library
through ``phi(u) ~= K B(u)`` and compared with the Lie series of the true
flow map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
import sympy as sp

from .decodability import matrix_rank, pinv
from .dynsys import DynSystem
from .encoding import (
    SingularExpansionError,
    feature_taylor_matrix,
    feature_vector,
    monomial_basis,
    monomial_label,
    monomials,
    reexpand_matrix,
    scheme,
)
from .pauli import y_free_indices
from .qelm import QelmModel


def classical_predict(model: QelmModel, u) -> np.ndarray:
    """W^T R phi(u) from the closed-form feature library (no state vectors)."""
    ro = model.readout
    F = feature_vector(ro.encoding, u) @ ro.R.T
    if ro.add_squares:
        F = np.concatenate([F, F * F], axis=-1)
    return F @ model.weights


def iterate(predictor, u0, steps: int) -> np.ndarray:
    """Autonomous rollout u_{t+1} = f(u_t); returns ``steps + 1`` states."""
    out = [np.asarray(u0, dtype=float)]
    for _ in range(steps):
        out.append(np.asarray(predictor(out[-1]), dtype=float))
    return np.array(out)


@dataclass(frozen=True)
class TaylorTransform:
    """phi(u) ~= K B(u): rows are all 4**n Pauli features (Y rows vanish),
    columns the raw monomials of degree <= order, constant first."""

    K: np.ndarray
    exponents: list
    u0: np.ndarray
    order: int
    method: str
    rank: int  # over the non-constant columns
    rank_full: int

    @property
    def N(self) -> int:
        return len(self.exponents) - 1

    @property
    def labels(self) -> list[str]:
        return [monomial_label(e) for e in self.exponents]

    def basis(self, u) -> np.ndarray:
        return monomial_basis(u, self.exponents)

    def evaluate(self, u) -> np.ndarray:
        return self.basis(u) @ self.K.T


def _collocation_shifted(enc, u0, r: int, half_width: float, samples: int, seed: int, extra: int):
    """Least-squares coefficients over ((u - u0) / h)**a from box samples.

    The fit uses degree ``r + extra`` so that the kept degree <= r part is
    not biased by the first omitted orders.
    """
    n = len(u0)
    lo, hi = enc.domain
    h = min(half_width, *(u0 - lo), *(hi - u0))
    if h <= 0:
        raise SingularExpansionError("expansion point on the domain boundary")
    rng = np.random.default_rng(seed)
    U = u0 + h * rng.uniform(-1.0, 1.0, size=(samples, n))
    B = monomial_basis((U - u0) / h, monomials(n, r + extra))
    phi = feature_vector(enc, U)[:, y_free_indices(n)]
    coef, *_ = np.linalg.lstsq(B, phi, rcond=None)
    return coef[: len(monomials(n, r))].T, h


def taylor_transform(enc, u0, r: int = 3, method: str = "analytic", half_width: float = 0.02,
                     samples: int | None = None, seed: int = 0, rtol: float | None = None,
                     extra: int = 2) -> TaylorTransform:
    """Build K around ``u0`` analytically or by collocation.

    Collocation samples a box of half-width ``half_width`` (shrunk to fit
    the domain), fits in scaled shifted coordinates and re-expands into raw
    monomials.  Ranks use a relative singular-value cutoff ``rtol``
    (default 1e-9, or 1e-4 for collocation whose truncation noise sits
    around 1e-6).
    """
    enc = scheme(enc)
    u0 = np.asarray(u0, dtype=float)
    n = len(u0)
    exps = monomials(n, r)
    rows = y_free_indices(n)
    if method == "analytic":
        A = feature_taylor_matrix(enc, u0, r).A
    elif method == "collocation":
        n_fit = len(monomials(n, r + extra))
        samples = samples or 10 * n_fit
        if samples < n_fit:
            raise ValueError(f"collocation needs at least {n_fit} samples, got {samples}")
        coef, h = _collocation_shifted(enc, u0, r, half_width, samples, seed, extra)
        A = coef @ reexpand_matrix(exps, u0, scale=h)
    else:
        raise ValueError(f"unknown transform method {method!r}")
    if rtol is None:
        rtol = 1e-9 if method == "analytic" else 1e-4
    K = np.zeros((4**n, len(exps)))
    K[rows] = A
    return TaylorTransform(K, exps, u0.copy(), r, method,
                           matrix_rank(A[:, 1:], rtol), matrix_rank(A, rtol))


def principal_angles(A, B, rank: int) -> np.ndarray:
    """Principal angles between the leading ``rank``-dim row spaces of A and B."""
    Va = np.linalg.svd(A)[2][:rank]
    Vb = np.linalg.svd(B)[2][:rank]
    s = np.clip(np.linalg.svd(Va @ Vb.T, compute_uv=False), -1.0, 1.0)
    return np.arccos(s)


@dataclass(frozen=True)
class FlowMapCoefficients:
    coeffs: np.ndarray  # (D_out, len(exponents))
    exponents: list
    source: str
    dt: float | None
    order: int
    meta: dict = field(default_factory=dict)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([sum(e) for e in self.exponents])

    def evaluate(self, u) -> np.ndarray:
        return monomial_basis(u, self.exponents) @ self.coeffs.T


def learned_flowmap(model: QelmModel, transform: TaylorTransform, dt: float | None = None) -> FlowMapCoefficients:
    """Coefficients W^T R K of the trained predictor over the monomial library."""
    ro = model.readout
    if ro.add_squares:
        raise ValueError("squared readouts are not linear in the feature library")
    if ro.R.shape[1] != transform.K.shape[0]:
        raise ValueError(f"model has {ro.R.shape[1]} features, transform {transform.K.shape[0]}")
    coeffs = model.weights.T @ ro.R @ transform.K
    return FlowMapCoefficients(coeffs, transform.exponents, "learned", dt, transform.order,
                               {"u0": transform.u0.tolist(), "method": transform.method})


def lie_series(sys: DynSystem, dt, order: int):
    """Sympy expressions for sum_k dt^k / k! L_g^k u_i, with L_g f = g . grad f."""
    u = sp.symbols("u v w")
    g = sys.components(*u)
    try:
        for gi in g:
            sp.Poly(gi, *u)
    except sp.PolynomialError as exc:
        raise ValueError("Lie series needs a polynomial vector field") from exc
    out = []
    for i in range(3):
        term, total = u[i], u[i]
        for k in range(1, order + 1):
            term = sp.expand(sum(gj * sp.diff(term, uj) for gj, uj in zip(g, u)))
            total += dt**k / factorial(k) * term
        out.append(sp.expand(total))
    return u, out


def true_flowmap(sys: DynSystem, dt: float, order: int = 4, degree: int = 3, about=None) -> FlowMapCoefficients:
    """Lie-series flow map truncated at ``order`` in dt and ``degree`` in the state.

    With ``about`` given, the state truncation is a Taylor truncation around
    that point (re-expanded into raw monomials), the same rule the learned
    map goes through; otherwise raw monomials above ``degree`` are dropped.
    """
    if not 0 <= order <= 4:
        raise ValueError("Lie-series order must lie in 0..4")
    u, exprs = lie_series(sys, dt, order)
    exps = monomials(3, degree)
    pos = {e: i for i, e in enumerate(exps)}
    if about is not None:
        about = np.asarray(about, dtype=float)
        s = sp.symbols("s0:3")
        shift = {ui: float(c) + si for ui, c, si in zip(u, about, s)}
        exprs = [sp.expand(ex.subs(shift)) for ex in exprs]
        u = s
    coeffs = np.zeros((3, len(exps)))
    dropped = 0.0
    for i, ex in enumerate(exprs):
        for mon, c in sp.Poly(ex, *u).terms():
            if mon in pos:
                coeffs[i, pos[mon]] = float(c)
            else:
                dropped = max(dropped, abs(float(c)))
    meta = {"max_dropped_coefficient": dropped}
    if about is not None:
        coeffs = coeffs @ reexpand_matrix(exps, about)
        meta["about"] = about.tolist()
    return FlowMapCoefficients(coeffs, exps, "true", dt, order, meta)


def flowmap_callable(sys: DynSystem, dt: float, order: int):
    """Numerical evaluator of the untruncated Lie polynomial (for order checks)."""
    u, exprs = lie_series(sys, dt, order)
    f = sp.lambdify(u, exprs, "numpy")
    return lambda U: np.stack(np.broadcast_arrays(*f(U[..., 0], U[..., 1], U[..., 2])), axis=-1)


@dataclass(frozen=True)
class FlowMapComparison:
    learned: np.ndarray
    true: np.ndarray
    abs_err: np.ndarray
    rel_err: np.ndarray
    exponents: list
    by_degree: dict  # degree -> (mean abs err, max rel err)
    dt: float | None
    note: str

    def rows(self):
        for i in range(self.learned.shape[0]):
            for j, e in enumerate(self.exponents):
                yield [i, " ".join(map(str, e)), float(self.learned[i, j]), float(self.true[i, j]),
                       float(self.abs_err[i, j]), float(self.rel_err[i, j])]

    header = ["output_dim", "exponents", "learned", "true", "abs_err", "rel_err"]


def compare_flowmaps(learned: FlowMapCoefficients, true: FlowMapCoefficients, rel_floor: float = 1e-3) -> FlowMapComparison:
    """Per-coefficient errors grouped by monomial degree.

    Relative errors divide by ``max(|true|, rel_floor * max|true in row|)``
    so coefficients that vanish in the truth do not blow up.
    """
    if list(learned.exponents) != list(true.exponents):
        raise ValueError("flow maps use different monomial bases")
    if learned.dt is not None and true.dt is not None and not np.isclose(learned.dt, true.dt):
        raise ValueError("flow maps use different time steps")
    L, T = learned.coeffs, true.coeffs
    abs_err = np.abs(L - T)
    floor = rel_floor * np.max(np.abs(T), axis=1, keepdims=True)
    rel_err = abs_err / np.maximum(np.abs(T), np.maximum(floor, np.finfo(float).tiny))
    deg = learned.degrees
    by_degree = {int(k): (float(abs_err[:, deg == k].mean()), float(rel_err[:, deg == k].max()))
                 for k in np.unique(deg)}
    note = ("degree-k coefficients enter at order dt^k or higher in the Lie series; "
            "their errors weigh little in one-step predictions")
    return FlowMapComparison(L, T, abs_err, rel_err, list(learned.exponents), by_degree, true.dt, note)


def null_directions(transform: TaylorTransform, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (rows) of the feature combinations annihilated by K."""
    U, s, _ = np.linalg.svd(transform.K)
    r = int(np.sum(s > rtol * s[0]))
    return U[:, r:].T


def minimum_norm_features(transform: TaylorTransform, coeffs) -> np.ndarray:
    """Minimum-norm feature weights v with v^T K = coeffs (row-wise)."""
    return np.atleast_2d(coeffs) @ pinv(transform.K)
