"""Adaptive Dormand-Prince 5(4) integration sampled on an equidistant grid.

Sampling instants are reached through the method's quartic continuous
extension; steps are never shortened to land on them.
"""

from dataclasses import dataclass, field

import numpy as np


class IntegrationError(RuntimeError):
    """Step-size underflow, step budget exhausted, or non-finite state."""

    def __init__(self, message, t):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float
    rtol: float = 1e-8
    atol: float = 1e-8
    sample_dt: float = 0.1
    max_steps: int = 2_000_000
    t_start: float = 0.0

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be positive")
        if self.sample_dt <= 0:
            raise ValueError("sample_dt must be positive")
        if self.t_end - self.t_start < self.sample_dt * (1 - 1e-12):
            raise ValueError("integration window shorter than one sample interval")

    def sample_times(self) -> np.ndarray:
        k0 = int(round(self.t_start / self.sample_dt))
        k1 = int(round(self.t_end / self.sample_dt))
        return np.arange(k0, k1 + 1) * self.sample_dt


@dataclass
class Trajectory:
    """States ``states[:, k]`` at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    stats: dict = field(default_factory=dict)


# Dormand & Prince (1980) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Continuous extension: y(t0 + s h) = y0 + h * sum_k K_k * (P[k] @ [s, s^2, s^3, s^4]).
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale))


def _initial_step(f, t0, y0, f0, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(y0 + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def integrate(f, w0, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the autonomous system ``dw/dt = f(w)`` and sample it.

    Parameters
    ----------
    f : callable
        Maps a state vector to its time derivative.
    w0 : array_like
        State at ``cfg.t_start``.
    cfg : IntegratorConfig

    Returns
    -------
    Trajectory
        ``states`` has one column per sample time ``k * sample_dt``.

    Raises
    ------
    IntegrationError
        On non-finite states, step-size underflow or when ``max_steps`` is
        exceeded. The failure time is attached as ``.t``.
    """
    y = np.array(w0, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite initial state", cfg.t_start)
    times = cfg.sample_times()
    out = np.empty((y.size, times.size))
    out[:, 0] = y
    k_next = 1

    t = cfg.t_start
    t_end = times[-1]
    fy = np.asarray(f(y), dtype=float)
    h = min(_initial_step(f, t, y, fy, cfg.rtol, cfg.atol), t_end - t)
    K = np.empty((7, y.size))
    n_steps = n_rejected = 0
    n_eval = 2
    factor_min, factor_max, safety = 0.2, 10.0, 0.9

    while k_next < times.size:
        if n_steps + n_rejected >= cfg.max_steps:
            raise IntegrationError(f"max_steps={cfg.max_steps} exceeded", t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t)
        h = min(h, t_end - t) if t_end - t > 0 else h

        K[0] = fy
        for s in range(1, 7):
            ys = y + h * (np.asarray(_A[s]) @ K[:s])
            K[s] = f(ys)
        n_eval += 6
        y_new = ys  # stage 7 is evaluated at the 5th-order solution (FSAL)
        err = h * (_E @ K)
        if not np.all(np.isfinite(y_new)) or not np.all(np.isfinite(K[6])):
            if h < 1e-10:
                raise IntegrationError("non-finite state", t)
            n_rejected += 1
            h *= factor_min
            continue
        en = _error_norm(err, y, y_new, cfg.rtol, cfg.atol)
        if en > 1.0:
            n_rejected += 1
            h *= max(factor_min, safety * en ** -0.2)
            continue

        t_new = t + h
        # Dense output for every sample instant inside (t, t_new].
        while k_next < times.size and times[k_next] <= t_new + 1e-12 * max(1.0, abs(t_new)):
            s = (times[k_next] - t) / h
            if s >= 1.0:
                out[:, k_next] = y_new
            else:
                p = np.cumprod(np.full(4, s))
                out[:, k_next] = y + h * ((_P @ p) @ K)
            k_next += 1

        n_steps += 1
        t, y, fy = t_new, y_new, K[6].copy()
        if en == 0.0:
            h *= factor_max
        else:
            h *= min(factor_max, max(factor_min, safety * en ** -0.2))

    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite state", t)
    return Trajectory(times, out, {"steps": n_steps, "rejected": n_rejected, "evaluations": n_eval})


def sample_derivatives(traj: Trajectory, f=None, mode: str = "exact") -> np.ndarray:
    """Time derivatives of a sampled trajectory.

    ``mode="exact"`` evaluates ``f`` at each sample. ``mode="fd"`` uses
    second-order central differences inside and second-order one-sided
    differences at both ends, assuming equidistant samples.
    """
    X = np.asarray(traj.states, dtype=float)
    if mode == "exact":
        if f is None:
            raise ValueError("exact mode needs the right-hand side")
        return np.column_stack([f(X[:, k]) for k in range(X.shape[1])])
    if mode == "fd":
        return finite_difference(X, float(traj.times[1] - traj.times[0]))
    raise ValueError(f"unknown derivative mode {mode!r}")


def finite_difference(X: np.ndarray, dt: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[1] < 3:
        raise ValueError("finite-difference derivatives need at least 3 samples")
    D = np.empty_like(X)
    D[:, 1:-1] = (X[:, 2:] - X[:, :-2]) / (2 * dt)
    D[:, 0] = (-3 * X[:, 0] + 4 * X[:, 1] - X[:, 2]) / (2 * dt)
    D[:, -1] = (3 * X[:, -1] - 4 * X[:, -2] + X[:, -3]) / (2 * dt)
    return D
