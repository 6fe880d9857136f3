"""Trajectory error metrics, generator averages and FOM/ROM timing."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["EvaluationReport", "average_series", "relative_error", "time_comparison", "timed"]


def _block(A, block):
    A = np.asarray(A, dtype=float)
    n = A.shape[0] // 2
    if block == "delta":
        return A[:n]
    if block == "omega":
        return A[n:]
    if block == "all":
        return A
    raise ValueError(f"block must be 'delta', 'omega' or 'all', got {block!r}")


def relative_error(truth, estimate, block: str = "all") -> float:
    """``||truth - estimate||_F / ||truth||_F`` over one state block and all times."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {estimate.shape}")
    T, E = _block(truth, block), _block(estimate, block)
    norm = np.linalg.norm(T)
    if norm == 0:
        raise ValueError("truth block has zero norm")
    return float(np.linalg.norm(T - E) / norm)


def relative_error_series(truth, estimate, block: str) -> np.ndarray:
    """Per-time ``||e(t)||_2 / ||x(t)||_2`` for plotting; 0 where the truth is 0."""
    T, E = _block(truth, block), _block(estimate, block)
    num = np.linalg.norm(T - E, axis=0)
    den = np.linalg.norm(T, axis=0)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def average_series(traj) -> tuple[np.ndarray, np.ndarray]:
    """Mean rotor angle and mean frequency deviation at every sample."""
    traj = np.asarray(traj, dtype=float)
    if traj.shape[0] % 2:
        raise ValueError("state rows must be even (delta block above omega block)")
    n = traj.shape[0] // 2
    return traj[:n].mean(axis=0), traj[n:].mean(axis=0)


def timed(fn, *args, **kwargs):
    """Call ``fn`` and return ``(result, wall-clock seconds)``."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def time_comparison(fom_run, rom_run) -> tuple[float, float]:
    """Wall-clock seconds of two zero-argument callables, run in order."""
    _, fom = timed(fom_run)
    _, rom = timed(rom_run)
    return fom, rom


@dataclass
class EvaluationReport:
    err_delta: float
    err_omega: float
    r: int | None
    lam: float | None
    poly_order: int | None
    fom_time_s: float | None = None
    rom_time_s: float | None = None
    times: np.ndarray = field(default=None, repr=False)
    err_delta_series: np.ndarray = field(default=None, repr=False)
    err_omega_series: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.err_delta < 0 or self.err_omega < 0:
            raise ValueError("errors must be nonnegative")
        for t in (self.fom_time_s, self.rom_time_s):
            if t is not None and t < 0:
                raise ValueError("times must be nonnegative")

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "err_delta": self.err_delta,
            "err_omega": self.err_omega,
            "error_definition": "Frobenius norm of (truth - estimate) over the block and "
                                "full time window, divided by the Frobenius norm of truth",
            "r": self.r,
            "lambda": self.lam,
            "poly_order": self.poly_order,
        }
        if include_timing:
            d["fom_time_s"] = self.fom_time_s
            d["rom_time_s"] = self.rom_time_s
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=1) + "\n"


def evaluate(truth, estimate, times, r=None, lam=None, poly_order=None,
             fom_time_s=None, rom_time_s=None) -> EvaluationReport:
    return EvaluationReport(
        relative_error(truth, estimate, "delta"),
        relative_error(truth, estimate, "omega"),
        r, lam, poly_order, fom_time_s, rom_time_s,
        np.asarray(times, dtype=float),
        relative_error_series(truth, estimate, "delta"),
        relative_error_series(truth, estimate, "omega"),
    )
