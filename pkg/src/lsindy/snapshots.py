"""State and derivative snapshot matrices, finite differences, noise and CSV I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid_model import EffectiveNetwork, GridState, vector_field
from .ode import Trajectory

__all__ = [
    "SnapshotSet",
    "add_noise",
    "assemble",
    "finite_difference",
    "read_snapshot_csv",
    "write_snapshot_csv",
]


@dataclass(frozen=True)
class SnapshotSet:
    """Columns of ``X`` are stacked ``[delta; omega]`` states at ``times``.

    ``provenance`` is ``"exact"``, ``"finite-difference"`` or
    ``"noisy(sigma=..., seed=...)"``.
    """

    times: np.ndarray
    X: np.ndarray
    Xdot: np.ndarray
    provenance: str = "exact"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        X = np.asarray(self.X, dtype=float)
        Xdot = np.asarray(self.Xdot, dtype=float)
        if X.ndim != 2 or X.shape != Xdot.shape:
            raise ValueError(f"X {X.shape} and Xdot {Xdot.shape} must be equal 2-D shapes")
        if X.shape[1] != times.size:
            raise ValueError(f"{X.shape[1]} columns but {times.size} times")
        if X.shape[0] % 2:
            raise ValueError(f"row count {X.shape[0]} is not even")
        if not (np.isfinite(X).all() and np.isfinite(Xdot).all()):
            raise ValueError("snapshot matrices contain non-finite entries")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Xdot", Xdot)

    @property
    def n_g(self) -> int:
        return self.X.shape[0] // 2

    @property
    def m(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def finite_difference(X: np.ndarray, dt: float) -> np.ndarray:
    """Second-order central differences along columns, second-order one-sided
    at both ends."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] < 3:
        raise ValueError("finite differences need at least 3 samples")
    return np.gradient(X, dt, axis=-1, edge_order=2)


def assemble(traj: Trajectory, net: EffectiveNetwork | None = None, derivative_mode="exact"):
    """Build a :class:`SnapshotSet` from a sampled trajectory.

    ``exact`` evaluates the swing vector field of ``net`` at every sample;
    ``finite-difference`` differentiates the samples and ignores ``net``.
    """
    X = np.asarray(traj.states, dtype=float)
    times = np.asarray(traj.times, dtype=float)
    if derivative_mode == "exact":
        if net is None:
            raise ValueError("exact derivatives need the network")
        if X.shape[0] != 2 * net.n_g:
            raise ValueError(f"trajectory has {X.shape[0]} rows, network needs {2 * net.n_g}")
        d = vector_field(net, GridState.from_vector(X))
        Xdot = np.vstack([d.delta, d.omega])
    elif derivative_mode == "finite-difference":
        steps = np.diff(times)
        if steps.size and not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("finite differences need a uniform time grid")
        Xdot = finite_difference(X, steps[0] if steps.size else 1.0)
    else:
        raise ValueError(f"unknown derivative mode {derivative_mode!r}")
    return SnapshotSet(times, X, Xdot, derivative_mode)


def add_noise(s: SnapshotSet, sigma_rel: float, seed: int) -> SnapshotSet:
    """Perturb each row of ``X`` by Gaussian noise scaled to that row's std and
    recompute ``Xdot`` by finite differences of the noisy states."""
    if sigma_rel < 0:
        raise ValueError("sigma_rel must be nonnegative")
    rng = np.random.default_rng(seed)
    row_std = s.X.std(axis=1, keepdims=True)
    noisy = s.X + sigma_rel * row_std * rng.standard_normal(s.X.shape)
    return SnapshotSet(
        s.times, noisy, finite_difference(noisy, s.dt), f"noisy(sigma={sigma_rel}, seed={seed})"
    )


# --------------------------------------------------------------------------
# CSV files
# --------------------------------------------------------------------------


def _header(n, prefix=""):
    return ["t"] + [f"{prefix}delta_{i + 1}" for i in range(n)] + [
        f"{prefix}omega_{i + 1}" for i in range(n)
    ]


def write_state_csv(path, times, X, prefix=""):
    """Write one row per sample with columns ``t, delta_1.., omega_1..``."""
    n = X.shape[0] // 2
    data = np.column_stack([times, X.T])
    np.savetxt(path, data, delimiter=",", header=",".join(_header(n, prefix)),
               comments="", fmt="%.17g")


def read_state_csv(path, prefix=""):
    path = Path(path)
    with path.open() as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    n = (len(header) - 1) // 2
    if header != _header(n, prefix):
        raise ValueError(f"{path}: unexpected header {header[:4]}...")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].copy(), data[:, 1:].T.copy()


def derivative_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_deriv" + path.suffix)


def write_snapshot_csv(s: SnapshotSet, path) -> tuple[Path, Path]:
    """Write states to ``path`` and derivatives to the sibling ``*_deriv.csv``."""
    path = Path(path)
    write_state_csv(path, s.times, s.X)
    dpath = derivative_path(path)
    write_state_csv(dpath, s.times, s.Xdot, prefix="d")
    return path, dpath


def read_snapshot_csv(path, provenance="exact") -> SnapshotSet:
    times, X = read_state_csv(path)
    dpath = derivative_path(path)
    t2, Xdot = read_state_csv(dpath, prefix="d")
    if not np.array_equal(times, t2):
        raise ValueError(f"{dpath}: time column differs from {path}")
    return SnapshotSet(times, X, Xdot, provenance)
