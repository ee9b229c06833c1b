"""Dynamical/observation model contract and the built-in systems.

A model is a pair of deterministic maps: forecast(x, w, t0, t1) advancing
the (possibly extended) state with an injected dynamics noise realization,
and observe(x, v) producing a noisy predicted observation. Noise
realizations are drawn by the caller from the declared Gaussian covariances,
so the maps themselves stay pure and vectorize over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteState, NotSPD, TimeGridMismatch
from .seeding import stream_rng

_ALIGN_RTOL = 1e-9


def rk4_step(rhs, x, t: float, dt: float):
    """One classical fourth-order Runge-Kutta step of x' = rhs(t, x)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):  # divergence raises below
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = rhs(t + dt, x + dt * k3)
        out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"integration diverged at t={t}")
    return out


def _steps_on_grid(t0: float, t1: float, h: float) -> int:
    span = t1 - t0
    if span <= 0:
        raise TimeGridMismatch(f"forecast interval [{t0}, {t1}] is empty")
    n = span / h
    if abs(n - round(n)) > _ALIGN_RTOL * max(1.0, abs(n)):
        raise TimeGridMismatch(
            f"interval [{t0}, {t1}] is not a multiple of the step {h}"
        )
    return int(round(n))


@dataclass(frozen=True)
class Lorenz84Params:
    """Standard Lorenz-84 constants; time is measured in days."""

    a: float = 0.25
    b: float = 4.0
    F: float = 8.0
    G: float = 1.0
    dt: float = 0.05
    substeps: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be at least one")


def lorenz84_rhs(state, params: Lorenz84Params = Lorenz84Params()):
    """Right-hand side of the Lorenz-84 system, vectorized over leading axes.

    x' = -y^2 - z^2 - a x + a F;  y' = x y - b x z - y + G;  z' = b x y + x z - z.
    """
    s = np.asarray(state, dtype=float)
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    return np.stack(
        [
            -y * y - z * z - params.a * x + params.a * params.F,
            x * y - params.b * x * z - y + params.G,
            params.b * x * y + x * z - z,
        ],
        axis=-1,
    )


def cubic_observe(x, v, sigma_v: float):
    """Observe the third power of the value plus scaled Gaussian error."""
    if sigma_v < 0:
        raise ValueError("sigma_v must be nonnegative")
    x = np.asarray(x, dtype=float)
    return x**3 + sigma_v * np.asarray(v, dtype=float)


class Model:
    """Contract shared by every built-in system; see the module docstring."""

    state_dim: int
    obs_dim: int
    dyn_noise_dim: int
    obs_noise_dim: int
    dyn_noise_cov: np.ndarray | None
    obs_noise_cov: np.ndarray | None
    time_step: float
    default_init: np.ndarray

    def forecast(self, x, w, t0: float, t1: float):
        raise NotImplementedError

    def observe(self, x, v):
        raise NotImplementedError


class Lorenz84Model(Model):
    """Lorenz-84 with identity or component-wise cubic observation of the state."""

    def __init__(self, params: Lorenz84Params = Lorenz84Params(),
                 obs_kind: str = "linear", obs_sigma=None, dyn_noise_cov=None):
        if obs_kind not in ("linear", "cubic"):
            raise ValueError(f"unknown observation kind {obs_kind!r}")
        self.params = params
        self.obs_kind = obs_kind
        self.state_dim = 3
        self.obs_dim = 3
        self.dyn_noise_dim = 3
        self.obs_noise_dim = 3
        self.dyn_noise_cov = None if dyn_noise_cov is None else np.asarray(dyn_noise_cov, float)
        if obs_sigma is None:
            self.obs_noise_cov = np.eye(3)
        else:
            sigma = np.broadcast_to(np.asarray(obs_sigma, float), (3,))
            self.obs_noise_cov = np.diag(sigma**2)
        self.time_step = params.dt
        self.default_init = np.array([1.0, 0.0, 0.0])

    def forecast(self, x, w, t0: float, t1: float):
        h = self.params.dt / self.params.substeps
        n = _steps_on_grid(t0, t1, h)
        state = np.asarray(x, dtype=float)
        rhs = lambda t, s: lorenz84_rhs(s, self.params)
        t = t0
        for _ in range(n):
            state = rk4_step(rhs, state, t, h)
            t += h
        return state + np.asarray(w, dtype=float)

    def observe(self, x, v):
        x = np.asarray(x, dtype=float)
        if self.obs_kind == "cubic":
            return x**3 + np.asarray(v, dtype=float)
        return x + np.asarray(v, dtype=float)


class Lorenz84ParamFModel(Model):
    """Lorenz-84 with unknown forcing F appended to the state: x = (u, F).

    The parameter block rides through forecast bit-for-bit unchanged, so the
    same filter identifies it from observations of the dynamic state.
    """

    def __init__(self, params: Lorenz84Params = Lorenz84Params(), obs_sigma=None):
        self.params = params
        self.state_dim = 4
        self.obs_dim = 3
        self.dyn_noise_dim = 4
        self.obs_noise_dim = 3
        self.dyn_noise_cov = None
        if obs_sigma is None:
            self.obs_noise_cov = np.eye(3)
        else:
            sigma = np.broadcast_to(np.asarray(obs_sigma, float), (3,))
            self.obs_noise_cov = np.diag(sigma**2)
        self.time_step = params.dt
        self.default_init = np.array([1.0, 0.0, 0.0, params.F])

    def _rhs(self, t, s):
        x, y, z, f = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
        p = self.params
        return np.stack(
            [
                -y * y - z * z - p.a * x + p.a * f,
                x * y - p.b * x * z - y + p.G,
                p.b * x * y + x * z - z,
                np.zeros_like(f),
            ],
            axis=-1,
        )

    def forecast(self, x, w, t0: float, t1: float):
        h = self.params.dt / self.params.substeps
        n = _steps_on_grid(t0, t1, h)
        x = np.asarray(x, dtype=float)
        state = x
        t = t0
        for _ in range(n):
            state = rk4_step(self._rhs, state, t, h)
            t += h
        state = state + np.asarray(w, dtype=float)
        state[..., 3] = x[..., 3]  # parameter block carried through unchanged
        return state

    def observe(self, x, v):
        return np.asarray(x, dtype=float)[..., :3] + np.asarray(v, dtype=float)


class CubicToyModel(Model):
    """Static scalar value observed through its cube plus Gaussian error."""

    def __init__(self, sigma_v: float = 0.5):
        if sigma_v < 0:
            raise ValueError("sigma_v must be nonnegative")
        self.sigma_v = sigma_v
        self.state_dim = 1
        self.obs_dim = 1
        self.dyn_noise_dim = 1
        self.obs_noise_dim = 1
        self.dyn_noise_cov = None
        self.obs_noise_cov = np.eye(1)
        self.time_step = 1.0
        self.default_init = np.array([1.0])

    def forecast(self, x, w, t0: float, t1: float):
        _steps_on_grid(t0, t1, self.time_step)
        return np.asarray(x, dtype=float) + np.asarray(w, dtype=float)

    def observe(self, x, v):
        return cubic_observe(x, v, self.sigma_v)


class LinearGaussianModel(Model):
    """Discrete-time linear state space x' = A x + w, y = H x + v.

    The step grid has unit spacing; forecast applies A once per step and
    injects the noise realization once per forecast call.
    """

    def __init__(self, A, H, Q, R):
        self.A = np.atleast_2d(np.asarray(A, float))
        self.H = np.atleast_2d(np.asarray(H, float))
        self.Q = np.atleast_2d(np.asarray(Q, float))
        self.R = np.atleast_2d(np.asarray(R, float))
        d, d_y = self.A.shape[0], self.H.shape[0]
        if self.A.shape != (d, d) or self.H.shape != (d_y, d):
            raise ValueError("A must be square and H must map state to observation")
        for name, m, size in (("Q", self.Q, d), ("R", self.R, d_y)):
            if m.shape != (size, size):
                raise ValueError(f"{name} must be {size}x{size}")
            eigmin = float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())
            if eigmin < -1e-10 * max(float(np.trace(m)), 1.0):
                raise NotSPD(f"{name} is not PSD", eigmin)
        self.state_dim = d
        self.obs_dim = d_y
        self.dyn_noise_dim = d
        self.obs_noise_dim = d_y
        self.dyn_noise_cov = None if not self.Q.any() else self.Q
        self.obs_noise_cov = None if not self.R.any() else self.R
        self.time_step = 1.0
        self.default_init = np.zeros(d)

    def forecast(self, x, w, t0: float, t1: float):
        n = _steps_on_grid(t0, t1, self.time_step)
        state = np.asarray(x, dtype=float)
        for _ in range(n):
            state = state @ self.A.T
        return state + np.asarray(w, dtype=float)

    def observe(self, x, v):
        return np.asarray(x, dtype=float) @ self.H.T + np.asarray(v, dtype=float)


def exact_kalman_step(model: LinearGaussianModel, mean, cov, y_hat):
    """Closed-form Kalman recursion oracle: one forecast plus one analysis."""
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = 0.5 * (np.atleast_2d(np.asarray(cov, float)) + np.atleast_2d(np.asarray(cov, float)).T)
    eigmin = float(np.linalg.eigvalsh(cov).min())
    if eigmin < -1e-10 * max(float(np.trace(cov)), 1.0):
        raise NotSPD("state covariance is not PSD", eigmin)
    y_hat = np.asarray(y_hat, dtype=float).reshape(-1)
    a, h = model.A, model.H
    m = a @ mean
    p = a @ cov @ a.T + model.Q
    s = h @ p @ h.T + model.R
    s_eigvals, s_eigvecs = np.linalg.eigh(0.5 * (s + s.T))
    cutoff = max(float(s_eigvals[-1]), 0.0) * 1e-12
    inv = np.zeros_like(s_eigvals)
    inv[s_eigvals > cutoff] = 1.0 / s_eigvals[s_eigvals > cutoff]
    k = p @ h.T @ ((s_eigvecs * inv[None, :]) @ s_eigvecs.T)
    m = m + k @ (y_hat - h @ m)
    p = p - k @ (h @ p)
    return m, 0.5 * (p + p.T)


@dataclass(frozen=True)
class TwinRun:
    """A simulated truth, observed noisily on a schedule."""

    times: tuple[float, ...]
    truth: np.ndarray  # one row per observation time
    observations: list = field(default_factory=list)  # [(time, y_hat)]

    def truth_csv(self) -> str:
        lines = ["time,component,value"]
        for t, row in zip(self.times, self.truth):
            for c, v in enumerate(row):
                lines.append(f"{t:.17g},{c},{v:.17g}")
        return "\n".join(lines) + "\n"

    def observations_csv(self) -> str:
        lines = ["time,component,value"]
        for t, y in self.observations:
            for c, v in enumerate(y):
                lines.append(f"{t:.17g},{c},{v:.17g}")
        return "\n".join(lines) + "\n"


def make_twin_experiment(model: Model, true_init, master_seed: int, obs_times) -> TwinRun:
    """Simulate the truth with fixed noise streams and observe it on the schedule.

    The run is a pure function of (model, true_init, master_seed, obs_times).
    """
    times = [float(t) for t in obs_times]
    if not times or any(t2 <= t1 for t1, t2 in zip(times, times[1:])) or times[0] <= 0.0:
        raise TimeGridMismatch("observation times must be positive and strictly increasing")
    from .filters import _noise_chol  # shared PSD square-root helper

    w_chol = _noise_chol(model.dyn_noise_cov)
    v_chol = _noise_chol(model.obs_noise_cov)
    state = np.asarray(true_init, dtype=float).reshape(-1)
    if state.shape[0] != model.state_dim:
        raise ValueError(f"true_init must have dimension {model.state_dim}")
    truth_rows = []
    observations = []
    t_prev = 0.0
    for k, t in enumerate(times):
        if w_chol is None:
            w = np.zeros(model.dyn_noise_dim)
        else:
            w = w_chol @ stream_rng(master_seed, "truth.w", k).standard_normal(w_chol.shape[1])
        state = model.forecast(state, w, t_prev, t)
        if v_chol is None:
            v = np.zeros(model.obs_noise_dim)
        else:
            v = v_chol @ stream_rng(master_seed, "truth.v", k).standard_normal(v_chol.shape[1])
        observations.append((t, np.asarray(model.observe(state, v), float).reshape(-1)))
        truth_rows.append(state.copy())
        t_prev = t
    return TwinRun(times=tuple(times), truth=np.array(truth_rows), observations=observations)
