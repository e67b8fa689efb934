"""The QELM proper: readout features, ridge training, prediction, kernel form.

A model is a linear readout ``W`` on top of ``F(x) = R phi(x)``, where ``R``
is the effective PTM of the measured observables.  Predictions use that
classical route; :func:`readout_features` can also run the state-vector
simulation it stands for.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg as sla

from .channels import Hamiltonian, evolve
from .decodability import matrix_rank, pinv
from .encoding import EncodingScheme, feature_vector, scheme
from .pauli import basis_matrices, y_free_indices
from .readout import MultiplexPlan, ObservableSet, effective_ptm, select_observables, selection_matrix

COND_WARN = 1e14
FORMAT_VERSION = 1


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class Readout:
    """Encoding + reservoir + measured observables (with multiplexing times).

    ``hamiltonian=None`` means no reservoir unitary: the observables read the
    encoded state directly.
    """

    encoding: EncodingScheme
    R: np.ndarray
    observables: ObservableSet
    times: tuple = (0.0,)
    hamiltonian: Hamiltonian | None = None
    add_squares: bool = False

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "encoding", scheme(self.encoding))

    @property
    def n(self) -> int:
        return self.observables.n

    @property
    def M_tot(self) -> int:
        return self.R.shape[0] * (2 if self.add_squares else 1)

    def describe(self) -> dict:
        return {
            "encoding": self.encoding.token,
            "hamiltonian": self.hamiltonian.label if self.hamiltonian else "none",
            "observables": self.observables.descriptor,
            "times": list(self.times),
            "add_squares": self.add_squares,
        }


def build_readout(encoding, n: int, observables: str | ObservableSet = "all",
                  hamiltonian: Hamiltonian | None = None, plan: MultiplexPlan | None = None,
                  add_squares: bool = False) -> Readout:
    obs = observables if isinstance(observables, ObservableSet) else select_observables(observables, n)
    if hamiltonian is None:
        R = selection_matrix(obs).entries
        times = (0.0,)
    else:
        plan = plan or MultiplexPlan((1.0,))
        R = effective_ptm(hamiltonian, obs, plan).entries
        times = plan.times
    return Readout(scheme(encoding), R, obs, times, hamiltonian, add_squares)


def _augment(F: np.ndarray, add_squares: bool) -> np.ndarray:
    return np.concatenate([F, F * F], axis=-1) if add_squares else F


def encoded_state(enc, x, check: bool = True) -> np.ndarray:
    """Product state vector of the encoded input (qubit 1 most significant)."""
    enc = scheme(enc)
    psi = np.ones(1, dtype=complex)
    for u in np.asarray(x, dtype=float):
        psi = np.kron(psi, enc.amplitudes(u, check=check))
    return psi


def encoded_density(enc, x, check: bool = True) -> np.ndarray:
    psi = encoded_state(enc, x, check)
    return np.outer(psi, psi.conj())


def _quantum_features(ro: Readout, x) -> np.ndarray:
    P = basis_matrices(ro.n)[np.array(ro.observables.indices)]
    psi0 = encoded_state(ro.encoding, x)
    out = []
    for t in ro.times:
        psi = psi0 if ro.hamiltonian is None else evolve(ro.hamiltonian, t) @ psi0
        out.append(np.einsum("a,kab,b->k", psi.conj(), P, psi).real)
    return np.concatenate(out)


def readout_features(ro: Readout, x, path: str = "ptm") -> np.ndarray:
    """F(x) = R phi(x) (plus squares if the readout is augmented).

    ``path="quantum"`` evaluates the same quantity from evolved state
    vectors instead of the PTM.
    """
    if path == "ptm":
        F = feature_vector(ro.encoding, x) @ ro.R.T
    elif path == "quantum":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            F = _quantum_features(ro, x)
        else:
            F = np.array([_quantum_features(ro, xi) for xi in x])
    else:
        raise ValueError(f"unknown feature path {path!r}")
    return _augment(F, ro.add_squares)


def _solve_spd(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    try:
        return sla.solve(A, B, assume_a="pos")
    except (np.linalg.LinAlgError, sla.LinAlgError):
        return sla.solve(A, B, assume_a="sym")


def train(G, Y, lam: float) -> np.ndarray:
    """Ridge weights W (M_tot x D_out) from the readout design G (M_tot x P).

    Solves ``(G G^T + lam I) W = G Y`` when M_tot <= P, the dual P x P
    system otherwise; ``lam == 0`` falls back to the pseudoinverse.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    Y = np.asarray(Y, dtype=float)
    single = Y.ndim == 1
    Y = Y[:, None] if single else Y
    if lam < 0:
        raise ValueError("regularization must be non-negative")
    M, P = G.shape
    if Y.shape[0] != P:
        raise ValueError(f"{P} readout samples but {Y.shape[0]} targets")
    if lam == 0:
        W = pinv(G.T) @ Y
    else:
        A = G @ G.T if M <= P else G.T @ G
        A[np.diag_indices_from(A)] += lam
        ev = np.linalg.eigvalsh(A)
        if ev[0] <= 0 or ev[-1] / ev[0] > COND_WARN:
            warnings.warn(f"ridge system condition number {ev[-1] / max(ev[0], 1e-300):.2e} exceeds "
                          f"{COND_WARN:.0e}", IllConditionedWarning, stacklevel=2)
        W = _solve_spd(A, G @ Y) if M <= P else G @ _solve_spd(A, Y)
    return W[:, 0] if single else W


@dataclass(frozen=True, eq=False)
class QelmModel:
    weights: np.ndarray
    readout: Readout
    lam: float
    provenance: dict = field(default_factory=dict)

    @property
    def D_out(self) -> int:
        return self.weights.shape[1]


def fit(ro: Readout, X, Y, lam: float, provenance: dict | None = None) -> QelmModel:
    """Train a model on inputs X (P x n) and targets Y (P x D_out)."""
    G = readout_features(ro, X).T
    Y = np.asarray(Y, dtype=float)
    W = train(G, Y if Y.ndim == 2 else Y[:, None], lam)
    return QelmModel(np.atleast_2d(W.T).T, ro, lam, dict(provenance or {}))


def predict(model: QelmModel, x, path: str = "ptm") -> np.ndarray:
    """f(x) = W^T F(x); same arithmetic as the classical surrogate by default."""
    F = readout_features(model.readout, x, path)
    return F @ model.weights


@dataclass(frozen=True)
class DesignMatrices:
    Phi: np.ndarray
    G: np.ndarray
    C: np.ndarray
    GGt: np.ndarray
    rank_Phi: int
    rank_G: int
    rank_R: int
    cond_C: float
    cond_GGt: float


def _cond(A) -> float:
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def design_matrices(ro: Readout, X) -> DesignMatrices:
    """Feature design Phi (q x P, non-vanishing features only) and readout design G = R Phi."""
    rows = y_free_indices(ro.n)
    phi = feature_vector(ro.encoding, X)
    Phi = phi[:, rows].T
    R = ro.R[:, rows]
    G = R @ Phi
    C = Phi @ Phi.T
    GGt = G @ G.T
    return DesignMatrices(Phi, G, C, GGt, matrix_rank(Phi), matrix_rank(G), matrix_rank(R), _cond(C), _cond(GGt))


def kernel_matrix(enc, X, X2=None) -> np.ndarray:
    """K_ij = tr(rho(x_i) rho(x_j)) = phi(x_i) . phi(x_j) / d."""
    A = feature_vector(enc, np.atleast_2d(X))
    B = A if X2 is None else feature_vector(enc, np.atleast_2d(X2))
    return A @ B.T / 2 ** np.atleast_2d(X).shape[1]


def kernel_fit(K, y, lam: float) -> np.ndarray:
    """alpha = (K + lam I)^-1 y."""
    K = np.asarray(K, dtype=float)
    return np.linalg.solve(K + lam * np.eye(len(K)), np.asarray(y, dtype=float))


def kernel_predict(enc, X_train, alpha, x) -> np.ndarray:
    return kernel_matrix(enc, np.atleast_2d(x), X_train) @ alpha


def optimal_measurement(enc, X_train, alpha) -> np.ndarray:
    """M* = sum_j alpha_j rho(x_j); then f(x) = tr(M* rho(x))."""
    alpha = np.asarray(alpha, dtype=float)
    return sum(a * encoded_density(enc, x) for a, x in zip(alpha, np.atleast_2d(X_train)))


def _encode_array(a: np.ndarray) -> dict:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"shape": list(a.shape), "real": a.real.ravel().tolist(), "imag": a.imag.ravel().tolist()}
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _decode_array(obj: dict) -> np.ndarray:
    if "imag" in obj:
        return (np.array(obj["real"]) + 1j * np.array(obj["imag"])).reshape(obj["shape"])
    return np.array(obj["data"], dtype=float).reshape(obj["shape"])


def save_model(model: QelmModel, path) -> None:
    """Write a JSON model file; floats are stored with round-trip precision."""
    ro = model.readout
    doc = {
        "format": "qelmptm-model",
        "version": FORMAT_VERSION,
        "encoding": ro.encoding.token,
        "n": ro.n,
        "lambda": model.lam,
        "observables": {"indices": list(ro.observables.indices), "descriptor": ro.observables.descriptor},
        "times": list(ro.times),
        "add_squares": ro.add_squares,
        "hamiltonian": None if ro.hamiltonian is None else {
            "label": ro.hamiltonian.label, "matrix": _encode_array(ro.hamiltonian.matrix)},
        "R": _encode_array(ro.R),
        "weights": _encode_array(model.weights),
        "provenance": model.provenance,
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path) -> QelmModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "qelmptm-model":
        raise ValueError(f"{path} is not a model file")
    n = doc["n"]
    h = doc["hamiltonian"]
    ham = None if h is None else Hamiltonian(_decode_array(h["matrix"]), h["label"], n)
    obs = ObservableSet(tuple(doc["observables"]["indices"]), doc["observables"]["descriptor"], n)
    ro = Readout(EncodingScheme(doc["encoding"]), _decode_array(doc["R"]), obs,
                 tuple(doc["times"]), ham, doc["add_squares"])
    return QelmModel(_decode_array(doc["weights"]), ro, doc["lambda"], doc["provenance"])
