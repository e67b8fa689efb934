"""Benchmark flows (Lorenz-63, Halvorsen), fixed-step integration and
forecasting metrics.

A rescaled system lives in coordinates ``u' = alpha * (u - m)`` and carries
its own closed-form polynomial vector field.  All field code is written
componentwise with plain arithmetic, so it evaluates on floats, numpy
arrays and sympy symbols alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

LYAPUNOV = {"lorenz63": 0.89, "halvorsen": 0.76}
DEFAULT_PARAMS = {
    "lorenz63": {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0},
    "halvorsen": {"a": 1.4},
}
REFERENCE_IC = {"lorenz63": (1.0, 1.0, 1.0), "halvorsen": (-5.0, 0.0, 0.0)}

# Dormand-Prince tableau, fifth-order weights
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]


class DivergenceError(ArithmeticError):
    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass(frozen=True, eq=False)
class DynSystem:
    """A 3D polynomial flow, optionally in rescaled coordinates."""

    name: str
    params: dict = field(default_factory=dict)
    alpha: np.ndarray | None = None
    m: np.ndarray | None = None
    lambda_max: float = 0.0

    @property
    def rescaled(self) -> bool:
        return self.alpha is not None

    def components(self, u, v, w):
        """Right-hand side as a tuple of three expressions."""
        if self.name == "lorenz63":
            fn = _lorenz_rescaled if self.rescaled else _lorenz
        else:
            fn = _halvorsen_rescaled if self.rescaled else _halvorsen
        return fn(u, v, w, self) if self.rescaled else fn(u, v, w, **self.params)

    def to_internal(self, x) -> np.ndarray:
        """Map original coordinates to the system's own coordinates."""
        x = np.asarray(x, dtype=float)
        return self.alpha * (x - self.m) if self.rescaled else x

    def to_original(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u / self.alpha + self.m if self.rescaled else u

    @property
    def descriptor(self) -> str:
        if not self.rescaled:
            return self.name
        a = ",".join(f"{v:g}" for v in self.alpha)
        m = ",".join(f"{v:g}" for v in self.m)
        return f"{self.name}[alpha=({a}),m=({m})]"


def _lorenz(x, y, z, sigma, rho, beta):
    return sigma * (y - x), x * (rho - z) - y, x * y - beta * z


def _halvorsen(x, y, z, a):
    return (-a * x - 4 * y - 4 * z - y * y,
            -a * y - 4 * z - 4 * x - z * z,
            -a * z - 4 * x - 4 * y - x * x)


def _lorenz_rescaled(u, v, w, sys: DynSystem):
    s, r, b = sys.params["sigma"], sys.params["rho"], sys.params["beta"]
    ax, ay, az = (float(a) for a in sys.alpha)
    mx, my, mz = (float(c) for c in sys.m)
    du = -s * u + s * ax / ay * v + s * ax * (my - mx)
    dv = (-v + ay / ax * (r - mz) * u - ay / az * mx * w - ay / (ax * az) * u * w
          + ay * mx * (r - mz) - ay * my)
    dw = (-b * w + az / (ax * ay) * u * v + az / ax * my * u + az / ay * mx * v
          + az * (mx * my - b * mz))
    return du, dv, dw


def _halvorsen_rescaled(u, v, w, sys: DynSystem):
    a = sys.params["a"]
    al = [float(c) for c in sys.alpha]
    mm = [float(c) for c in sys.m]
    s = (u, v, w)
    out = []
    # the Halvorsen field is cyclic in (x, y, z)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        ai, aj, ak = al[i], al[j], al[k]
        mi, mj, mk = mm[i], mm[j], mm[k]
        out.append(-a * s[i] - 4 * ai / aj * s[j] - 4 * ai / ak * s[k]
                   - 2 * ai * mj / aj * s[j] - ai / aj**2 * s[j] * s[j]
                   + ai * (-a * mi - 4 * mj - 4 * mk - mj * mj))
    return tuple(out)


def make_system(name: str, **params) -> DynSystem:
    key = name.lower().replace("-", "").replace("_", "")
    key = {"lorenz": "lorenz63", "lorenz63": "lorenz63", "halvorsen": "halvorsen"}.get(key)
    if key is None:
        raise ValueError(f"unknown system {name!r}; expected 'lorenz63' or 'halvorsen'")
    p = dict(DEFAULT_PARAMS[key])
    unknown = set(params) - set(p)
    if unknown:
        raise ValueError(f"unknown parameters for {key}: {sorted(unknown)}")
    p.update({k: float(v) for k, v in params.items()})
    return DynSystem(key, p, lambda_max=LYAPUNOV[key])


def rescale(sys: DynSystem, alpha, m) -> DynSystem:
    """System in coordinates alpha * (u - m); composes with earlier rescalings."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (3,)).copy()
    m = np.broadcast_to(np.asarray(m, dtype=float), (3,)).copy()
    if np.any(alpha == 0):
        raise ValueError("rescaling factors must be nonzero")
    if sys.rescaled:
        # alpha2 * (alpha1 * (x - m1) - m2) = alpha2 alpha1 (x - (m1 + m2 / alpha1))
        m = sys.m + m / sys.alpha
        alpha = alpha * sys.alpha
    return replace(sys, alpha=alpha, m=m)


def vector_field(sys: DynSystem, u) -> np.ndarray:
    """du/dt for states stacked along the last axis."""
    u = np.asarray(u, dtype=float)
    return np.stack(sys.components(u[..., 0], u[..., 1], u[..., 2]), axis=-1)


def dp5_step(sys: DynSystem, u, dt: float) -> np.ndarray:
    """One fixed Dormand-Prince fifth-order step."""
    k = []
    for i in range(6):
        ui = u
        for a, kj in zip(_A[i], k):
            ui = ui + dt * a * kj
        k.append(vector_field(sys, ui))
    out = u
    for b, ki in zip(_B, k):
        if b:
            out = out + dt * b * ki
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    dt: float
    t0: float = 0.0
    system: str = ""
    initial: np.ndarray | None = None

    def __len__(self):
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))

    def spread(self) -> float:
        """sigma with sigma^2 = mean ||u_t - mean(u)||^2."""
        s = self.states
        return float(np.sqrt(np.mean(np.sum((s - s.mean(axis=0)) ** 2, axis=1))))


def integrate(sys: DynSystem, u0, dt: float = 0.01, steps: int = 1000, discard: int = 0) -> Trajectory:
    """Fixed-step integration; returns ``steps + 1 - discard`` states.

    ``u0`` may hold several initial conditions stacked along axis 0, in
    which case the states have shape (steps + 1 - discard, k, 3).
    """
    if dt <= 0:
        raise ValueError("time step must be positive")
    u = np.array(u0, dtype=float)
    out = np.empty((steps + 1,) + u.shape)
    out[0] = u
    for i in range(1, steps + 1):
        u = dp5_step(sys, u, dt)
        if not np.all(np.isfinite(u)):
            raise DivergenceError(i)
        out[i] = u
    return Trajectory(out[discard:], dt, discard * dt, sys.descriptor, np.asarray(u0, dtype=float))


def attractor_points(sys: DynSystem, count: int, seed: int = 0, dt: float = 0.01,
                     burn_in: float = 100.0, spacing: float = 5.0) -> np.ndarray:
    """Points on the attractor: burn in from a perturbed reference state, then
    take ``count`` samples ``spacing`` time units apart."""
    rng = np.random.default_rng(seed)
    x0 = np.asarray(REFERENCE_IC[sys.name]) + rng.normal(scale=0.5, size=3)
    u0 = sys.to_internal(x0)
    gap = max(1, int(round(spacing / dt)))
    tr = integrate(sys, u0, dt, int(round(burn_in / dt)) + gap * (count - 1),
                   discard=int(round(burn_in / dt)))
    return tr.states[::gap][:count].copy()


def training_trajectory(sys: DynSystem, P: int = 10000, dt: float = 0.01, seed: int = 0,
                        burn_in: float = 100.0) -> Trajectory:
    """P + 1 attractor states (P one-step training pairs)."""
    u0 = attractor_points(sys, 1, seed, dt, burn_in)[0]
    return integrate(sys, u0, dt, P)


@dataclass(frozen=True)
class InputMap:
    """Affine map of each coordinate's data range onto a common interval [lo, hi]."""

    lo: float
    hi: float
    data_min: np.ndarray
    data_max: np.ndarray

    @classmethod
    def fit(cls, states, lo: float, hi: float) -> "InputMap":
        if not hi > lo:
            raise ValueError("empty target interval")
        s = np.asarray(states, dtype=float)
        return cls(lo, hi, s.min(axis=0), s.max(axis=0))

    @property
    def alpha(self) -> np.ndarray:
        return (self.hi - self.lo) / (self.data_max - self.data_min)

    @property
    def m(self) -> np.ndarray:
        return self.data_min - self.lo / self.alpha

    def system(self, sys: DynSystem) -> DynSystem:
        return rescale(sys, self.alpha, self.m)


def train_error(predictor, traj: Trajectory) -> float:
    """RMS one-step error sqrt(mean ||u_{t+1} - f(u_t)||^2)."""
    s = traj.states
    resid = s[1:] - predictor(s[:-1])
    return float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))


@dataclass(frozen=True)
class ForecastResult:
    horizons: np.ndarray  # in Lyapunov times
    steps: np.ndarray  # first exceedance index, or the cap if censored
    censored: np.ndarray
    clamped: np.ndarray  # number of clamping events per initial condition
    sigma: float
    max_steps: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.horizons))

    @property
    def std(self) -> float:
        return float(np.std(self.horizons))


def forecast_horizon(sys: DynSystem, predictor, starts, sigma: float, dt: float = 0.01,
                     max_steps: int = 2000, domain: tuple | None = None) -> ForecastResult:
    """Autonomous forecasts from each start compared to the true flow.

    ``predictor`` maps a (k, 3) batch to the next states.  Predictions
    leaving ``domain`` are clamped back and counted; a run that never
    exceeds ``sigma`` is censored at ``max_steps``.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    truth = integrate(sys, starts, dt, max_steps).states
    k = len(starts)
    pred = starts.copy()
    first = np.full(k, max_steps)
    done = np.zeros(k, dtype=bool)
    clamped = np.zeros(k, dtype=int)
    for t in range(1, max_steps + 1):
        pred = np.asarray(predictor(pred), dtype=float)
        if domain is not None:
            lo, hi = domain
            out = np.any((pred < lo) | (pred > hi) | ~np.isfinite(pred), axis=1)
            clamped += out & ~done
            pred = np.clip(np.nan_to_num(pred, nan=lo), lo, hi)
        err = np.linalg.norm(truth[t] - pred, axis=1)
        hit = (err > sigma) & ~done
        first[hit] = t
        done |= hit
        if done.all():
            break
    horizons = first * dt * sys.lambda_max
    return ForecastResult(horizons, first, ~done, clamped, sigma, max_steps)


def lyapunov_estimate(sys: DynSystem, u0, dt: float = 0.01, duration: float = 200.0,
                      renorm_every: int = 10, eps: float = 1e-9, transient: float = 10.0) -> float:
    """Largest Lyapunov exponent from a renormalized twin trajectory."""
    u = np.asarray(u0, dtype=float)
    rng = np.random.default_rng(0)
    d = rng.normal(size=u.shape)
    v = u + eps * d / np.linalg.norm(d)
    log_sum, elapsed = 0.0, 0.0
    n_blocks = int(round(duration / (dt * renorm_every)))
    skip = int(round(transient / (dt * renorm_every)))
    for blk in range(n_blocks):
        for _ in range(renorm_every):
            u = dp5_step(sys, u, dt)
            v = dp5_step(sys, v, dt)
        sep = np.linalg.norm(v - u)
        if blk >= skip:
            log_sum += np.log(sep / eps)
            elapsed += renorm_every * dt
        v = u + (v - u) * (eps / sep)
    return log_sum / elapsed
