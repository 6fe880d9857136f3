"""Truncated SVD basis, energy-based rank choice, projection and lifting."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .snapshots import SnapshotSet

__all__ = [
    "LatentSnapshotSet",
    "ReducedBasis",
    "compute_basis",
    "cumulative_energy",
    "project",
    "reconstruct",
    "write_spectrum_csv",
]


@dataclass(frozen=True)
class ReducedBasis:
    """Leading left singular vectors ``Phi_r`` (n x r) and the full spectrum."""

    Phi_r: np.ndarray
    singular_values: np.ndarray
    energy_captured: float
    center: np.ndarray | None = None

    @property
    def r(self) -> int:
        return self.Phi_r.shape[1]

    @property
    def n(self) -> int:
        return self.Phi_r.shape[0]


@dataclass(frozen=True)
class LatentSnapshotSet:
    times: np.ndarray
    Z: np.ndarray
    Zdot: np.ndarray


def cumulative_energy(singular_values) -> np.ndarray:
    """Fraction of ``sum(sigma**2)`` captured by the first k values, k = 1.."""
    s2 = np.asarray(singular_values, dtype=float) ** 2
    return np.cumsum(s2) / s2.sum()


def _fix_signs(U):
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def compute_basis(s, energy: float | None = 0.999, rank: int | None = None,
                  center: bool = False) -> ReducedBasis:
    """SVD of the snapshot matrix truncated by energy fraction or fixed rank.

    Parameters
    ----------
    s : SnapshotSet or ndarray
        Snapshots (``n x m``).
    energy : float, optional
        Keep the smallest ``r`` whose cumulative squared singular values reach
        this fraction of the total. Ignored when ``rank`` is given.
    rank : int, optional
        Fixed rank, clamped to ``min(n, m)``.
    center : bool
        Subtract the temporal mean before factorizing. Off by default.
    """
    X = s.X if isinstance(s, SnapshotSet) else np.asarray(s, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("need a 2-D snapshot matrix with at least 2 columns")
    if not np.isfinite(X).all():
        raise ValueError("snapshot matrix is not finite")
    mean = X.mean(axis=1) if center else None
    if center:
        X = X - mean[:, None]
    if not np.any(X):
        raise ValueError("snapshot matrix is identically zero; no basis exists")

    U, sv, _ = la.svd(X, full_matrices=False, lapack_driver="gesdd")
    energies = cumulative_energy(sv)
    if rank is not None:
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        r = min(int(rank), sv.size)
    elif energy is not None:
        if not 0 < energy <= 1:
            raise ValueError(f"energy threshold must lie in (0, 1], got {energy}")
        # tiny slack so that an exact ratio of 1.0 is not lost to rounding
        r = int(np.searchsorted(energies, energy - 1e-12) + 1)
        r = min(r, sv.size)
    else:
        raise ValueError("give an energy threshold or a rank")
    Phi = _fix_signs(U[:, :r])
    return ReducedBasis(Phi, sv, float(energies[r - 1]), mean)


def _offset(b: ReducedBasis):
    return 0.0 if b.center is None else b.center[:, None]


def project(s: SnapshotSet, b: ReducedBasis) -> LatentSnapshotSet:
    """``Z = Phi_r^T X`` and ``Zdot = Phi_r^T Xdot``."""
    if s.X.shape[0] != b.n:
        raise ValueError(f"snapshots have {s.X.shape[0]} rows, basis has {b.n}")
    Z = b.Phi_r.T @ (s.X - _offset(b))
    return LatentSnapshotSet(s.times, Z, b.Phi_r.T @ s.Xdot)


def project_states(X, b: ReducedBasis) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[0] != b.n:
        raise ValueError(f"states have {X.shape[0]} rows, basis has {b.n}")
    if X.ndim == 1:
        return b.Phi_r.T @ (X - (0.0 if b.center is None else b.center))
    return b.Phi_r.T @ (X - _offset(b))


def reconstruct(Z, b: ReducedBasis) -> np.ndarray:
    """Lift latent coordinates back to the full state: ``Phi_r Z``."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape[0] != b.r:
        raise ValueError(f"latent data has {Z.shape[0]} rows, basis rank is {b.r}")
    X = b.Phi_r @ Z
    if b.center is not None:
        X = X + (b.center if Z.ndim == 1 else b.center[:, None])
    return X


def write_spectrum_csv(b: ReducedBasis, path) -> None:
    """Write ``index, sigma, cumulative_energy`` with 1-based indices."""
    sv = b.singular_values
    data = np.column_stack([np.arange(1, sv.size + 1), sv, cumulative_energy(sv)])
    np.savetxt(path, data, delimiter=",", header="index,sigma,cumulative_energy",
               comments="", fmt=["%d", "%.17g", "%.17g"])


def read_spectrum_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)[:, 1].copy()


def write_basis_csv(b: ReducedBasis, path) -> None:
    cols = [f"phi_{k + 1}" for k in range(b.r)]
    data = b.Phi_r
    if b.center is not None:
        cols.append("center")
        data = np.column_stack([data, b.center])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def read_basis(path, spectrum_path=None) -> ReducedBasis:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    Phi = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    center = None
    if header[-1] == "center":
        Phi, center = Phi[:, :-1].copy(), Phi[:, -1].copy()
    if spectrum_path is not None and Path(spectrum_path).exists():
        sv = read_spectrum_csv(spectrum_path)
        captured = float(cumulative_energy(sv)[Phi.shape[1] - 1])
    else:
        sv, captured = np.array([]), float("nan")
    return ReducedBasis(Phi, sv, captured, center)
