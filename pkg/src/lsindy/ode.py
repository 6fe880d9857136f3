"""Dormand-Prince 5(4) integration with dense output on a uniform sample grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["IntegrationConfig", "IntegrationError", "Trajectory", "integrate"]


class IntegrationError(RuntimeError):
    """Integration stopped early; ``t_fail`` is the last accepted time."""

    def __init__(self, message: str, t_fail: float):
        super().__init__(f"{message} (last good time t={t_fail:.6g})")
        self.t_fail = t_fail


@dataclass(frozen=True)
class IntegrationConfig:
    t0: float = 0.0
    t_end: float = 5.0
    dt_sample: float = 0.01
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 1_000_000
    max_step: float = np.inf
    first_step: float | None = None

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ValueError(f"t_end ({self.t_end}) must exceed t0 ({self.t0})")
        if not self.dt_sample > 0:
            raise ValueError("dt_sample must be positive")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1 or not self.max_step > 0:
            raise ValueError("max_steps and max_step must be positive")

    @property
    def n_samples(self) -> int:
        # small slack so that e.g. 5.0 / 0.01 counts 500 intervals
        return int(np.floor((self.t_end - self.t0) / self.dt_sample + 1e-9)) + 1

    def sample_times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) * self.dt_sample


@dataclass(frozen=True)
class Trajectory:
    """Samples ``states[:, k]`` at ``times[k]``; one column per sample."""

    times: np.ndarray
    states: np.ndarray
    n_steps: int = 0
    n_rejected: int = 0


# Dormand & Prince (1980) tableau
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
# difference between the 5th- and embedded 4th-order weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# continuous extension: y(t + th) = y + h * K^T (P @ [th, th^2, th^3, th^4])
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0


def _rms(v):
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(f, t0, y0, f0, rtol, atol, direction_span):
    # Hairer, Norsett & Wanner, Solving ODEs I, sec. II.4
    scale = atol + rtol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_span)


def integrate(f, x0, cfg: IntegrationConfig | None = None) -> Trajectory:
    """Integrate ``dx/dt = f(t, x)`` and sample on ``t0, t0+dt, ..., t_end``.

    The local error of each step is estimated from the embedded 4th-order
    solution and steps are accepted when the scaled RMS error is <= 1.
    Samples between step endpoints come from the 4th-order continuous
    extension, so the sample times are exact whatever the step sequence.

    Raises
    ------
    IntegrationError
        If the step size underflows, ``max_steps`` is exceeded or the
        solution becomes non-finite.
    """
    cfg = cfg or IntegrationConfig()
    y = np.array(x0, dtype=float).reshape(-1)
    times = cfg.sample_times()
    out = np.empty((y.size, times.size))
    out[:, 0] = y
    rtol, atol = cfg.rel_tol, cfg.abs_tol

    t = cfg.t0
    t_stop = times[-1]
    fy = np.asarray(f(t, y), dtype=float)
    if not np.all(np.isfinite(fy)):
        raise IntegrationError("vector field is not finite at the initial state", t)
    if times.size == 1:
        return Trajectory(times, out)

    span = t_stop - t
    h_max = min(cfg.max_step, span)
    h = cfg.first_step or _initial_step(f, t, y, fy, rtol, atol, h_max)
    h = min(h, h_max)

    K = np.empty((7, y.size))
    next_sample = 1
    n_steps = n_rejected = 0
    while next_sample < times.size:
        if n_steps + n_rejected >= cfg.max_steps:
            raise IntegrationError(f"max_steps={cfg.max_steps} exceeded", t)
        if h < 10 * np.spacing(max(abs(t), 1.0)):
            raise IntegrationError(f"step size underflow (h={h:.3g})", t)
        last = t + h >= t_stop - 10 * np.spacing(max(abs(t_stop), 1.0))
        if last:
            h = t_stop - t

        K[0] = fy
        for s in range(1, 7):
            ys = y + h * (np.asarray(_A[s]) @ K[:s])
            K[s] = f(t + _C[s] * h, ys)
        y_new = ys  # stage 7 is evaluated at the 5th-order solution (FSAL)
        err_vec = h * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(err_vec / scale)

        if not np.isfinite(err):
            n_rejected += 1
            h *= _FAC_MIN
            continue
        if err > 1.0:
            n_rejected += 1
            h *= max(_FAC_MIN, _SAFETY * err ** -0.2)
            continue

        t_new = t_stop if last else t + h
        # fill every sample in (t, t_new]
        while next_sample < times.size and times[next_sample] <= t_new:
            theta = (times[next_sample] - t) / h
            q = _P @ np.array([theta, theta**2, theta**3, theta**4])
            out[:, next_sample] = y + h * (q @ K)
            next_sample += 1
        if last:
            out[:, -1] = y_new

        n_steps += 1
        t, y, fy = t_new, y_new, K[6].copy()
        if not np.all(np.isfinite(y)):
            raise IntegrationError("solution became non-finite", t)
        fac = _FAC_MAX if err == 0 else min(_FAC_MAX, _SAFETY * err ** -0.2)
        h = min(h * max(_FAC_MIN, fac), h_max)

    return Trajectory(times, out, n_steps, n_rejected)
