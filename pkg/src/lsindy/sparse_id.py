"""Sequential thresholded least squares, identified models and H/D read-out."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .library import CandidateLibrary, LibraryEvaluator, LibrarySpec
from .ode import IntegrationConfig, Trajectory, integrate
from .reduction import ReducedBasis, project_states, read_basis, reconstruct, write_basis_csv

__all__ = [
    "HDEstimate",
    "RegressionConfig",
    "SparseModel",
    "estimate_HD",
    "fit",
    "load_model",
    "predict_derivative",
    "save_model",
    "simulate_model",
    "stlsq",
    "stlsq_multi",
]


@dataclass(frozen=True)
class RegressionConfig:
    lam: float = 1e-3
    max_iters: int = 10
    normalize_columns: bool = True
    rank_tolerance: float | None = None

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"threshold must be nonnegative, got {self.lam}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class SparseModel:
    """``d/dt coords = Xi^T theta(coords)`` with ``Xi`` of shape ``(p, d)``.

    A model with a ``basis`` lives in latent coordinates ``z = Phi_r^T x``.
    """

    Xi: np.ndarray
    descriptors: tuple[str, ...]
    library_spec: LibrarySpec
    lam: float
    basis: ReducedBasis | None = None
    var_prefix: str = "x"
    empty_columns: tuple[int, ...] = ()
    regression: RegressionConfig = field(default_factory=RegressionConfig)

    def __post_init__(self):
        if self.Xi.ndim != 2 or self.Xi.shape[0] != len(self.descriptors):
            raise ValueError(f"Xi shape {self.Xi.shape} does not match {len(self.descriptors)} descriptors")
        ev = LibraryEvaluator(self.Xi.shape[1], self.library_spec, self.var_prefix)
        if tuple(ev.descriptors) != tuple(self.descriptors):
            raise ValueError("descriptors do not match the library spec")
        object.__setattr__(self, "_evaluator", ev)

    @property
    def coordinate_dim(self) -> int:
        return self.Xi.shape[1]

    @property
    def is_latent(self) -> bool:
        return self.basis is not None

    def support(self) -> np.ndarray:
        return self.Xi != 0

    def rhs(self, t, state):
        return self.Xi.T @ self._evaluator.evaluate_columns(state)

    def equations(self, precision: int = 4) -> list[str]:
        lines = []
        for k in range(self.coordinate_dim):
            terms = [
                f"{self.Xi[j, k]:+.{precision}g} {self.descriptors[j]}"
                for j in np.flatnonzero(self.Xi[:, k])
            ]
            lines.append(f"d{self.var_prefix}{k + 1}/dt = " + (" ".join(terms) or "0"))
        return lines


def stlsq(Theta, y, lam, max_iters=10, normalize=True, rank_tolerance=None):
    """Sparse solution of ``Theta @ xi ~= y`` for one right-hand side.

    Alternates a least-squares solve on the active columns with removal of
    every coefficient whose magnitude is below ``lam``. Thresholds act on
    coefficients in the original column scaling. Stops when no coefficient is
    removed or after ``max_iters`` solves.
    """
    m, p = Theta.shape
    if normalize:
        scale = np.linalg.norm(Theta, axis=0)
        scale[scale == 0] = 1.0
    else:
        scale = np.ones(p)
    A = Theta / scale
    active = np.ones(p, dtype=bool)
    xi = np.zeros(p)
    for _ in range(max_iters):
        xi = np.zeros(p)
        if not active.any():
            break
        sol = np.linalg.lstsq(A[:, active], y, rcond=rank_tolerance)[0]
        xi[active] = sol / scale[active]
        small = active & (np.abs(xi) < lam)
        if not small.any():
            break
        active &= ~small
    xi[~active] = 0.0
    return xi


def stlsq_multi(Theta, Y, lam, max_iters=10, normalize=True, rank_tolerance=None):
    """:func:`stlsq` for every column of ``Y`` (m x d), returning ``(p, d)``.

    Right-hand sides that share an active set at a given iteration are solved
    together, so the first (full-library) solve is done once for all of them.
    """
    m, p = Theta.shape
    Y = np.asarray(Y, dtype=float)
    d = Y.shape[1]
    if normalize:
        scale = np.linalg.norm(Theta, axis=0)
        scale[scale == 0] = 1.0
    else:
        scale = np.ones(p)
    A = Theta / scale
    active = np.ones((d, p), dtype=bool)
    Xi = np.zeros((p, d))
    pending = list(range(d))
    for _ in range(max_iters):
        if not pending:
            break
        groups: dict[bytes, list[int]] = {}
        for k in pending:
            groups.setdefault(active[k].tobytes(), []).append(k)
        still = []
        for cols in groups.values():
            mask = active[cols[0]]
            Xi[:, cols] = 0.0
            if not mask.any():
                continue
            sol = np.linalg.lstsq(A[:, mask], Y[:, cols], rcond=rank_tolerance)[0]
            Xi[np.ix_(np.flatnonzero(mask), cols)] = sol / scale[mask, None]
            for c in cols:
                small = active[c] & (np.abs(Xi[:, c]) < lam)
                if small.any():
                    active[c] &= ~small
                    still.append(c)
        pending = still
    Xi[~active.T] = 0.0
    return Xi


def fit(lib: CandidateLibrary, derivatives, cfg: RegressionConfig | None = None,
        basis: ReducedBasis | None = None, var_prefix: str = "x") -> SparseModel:
    """Fit one sparse regression per coordinate.

    Parameters
    ----------
    lib : CandidateLibrary
        Library evaluated on the same ``m`` samples as ``derivatives``.
    derivatives : ndarray, shape (m, d)
        Time derivatives, one row per sample.
    cfg : RegressionConfig
    basis : ReducedBasis, optional
        Attach to mark the model as latent.
    """
    cfg = cfg or RegressionConfig()
    Y = np.asarray(derivatives, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != lib.Theta.shape[0]:
        raise ValueError(f"library has {lib.Theta.shape[0]} rows, derivatives {Y.shape[0]}")
    if not np.isfinite(lib.Theta).all() or not np.isfinite(Y).all():
        raise ValueError("library or derivatives are not finite")

    Xi = stlsq_multi(lib.Theta, Y, cfg.lam, cfg.max_iters, cfg.normalize_columns,
                     cfg.rank_tolerance)
    empty = tuple(int(k) for k in np.flatnonzero(~Xi.any(axis=0)) if np.any(Y[:, k]))
    if empty:
        warnings.warn(f"no active terms left for coordinates {list(empty)}", stacklevel=2)
    return SparseModel(Xi, lib.descriptors, lib.spec, cfg.lam, basis, var_prefix, empty, cfg)


def predict_derivative(model: SparseModel, state) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape[0] != model.coordinate_dim:
        raise ValueError(f"state has {state.shape[0]} entries, model expects {model.coordinate_dim}")
    return model.rhs(0.0, state)


@dataclass(frozen=True)
class ModelRun:
    trajectory: Trajectory
    full_states: np.ndarray | None = None


def simulate_model(model: SparseModel, z0, cfg: IntegrationConfig | None = None) -> ModelRun:
    """Integrate the identified model; latent models are also lifted back to
    the full state."""
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (model.coordinate_dim,):
        raise ValueError(f"initial condition has shape {z0.shape}, expected ({model.coordinate_dim},)")
    traj = integrate(model.rhs, z0, cfg)
    full = reconstruct(traj.states, model.basis) if model.basis is not None else None
    return ModelRun(traj, full)


def initial_coordinates(model: SparseModel, x0) -> np.ndarray:
    """Full initial state mapped into the model's coordinates."""
    x0 = np.asarray(x0, dtype=float)
    return project_states(x0, model.basis) if model.basis is not None else x0


# --------------------------------------------------------------------------
# inertia and damping read-out
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HDEstimate:
    """Per-generator estimates; ``nan`` where ``route`` is ``"unrecoverable"``."""

    H: np.ndarray
    D: np.ndarray
    route: tuple[str, ...]

    @property
    def recoverable(self) -> np.ndarray:
        return np.array([r != "unrecoverable" for r in self.route])

    def to_dict(self) -> dict:
        return {
            "H": [None if np.isnan(v) else float(v) for v in self.H],
            "D": [None if np.isnan(v) else float(v) for v in self.D],
            "route": list(self.route),
        }


def estimate_HD(model: SparseModel, structure, tol: float = 1e-12) -> HDEstimate:
    """Read inertia and damping off a full-state swing model.

    ``structure`` supplies the known ``F``, ``K``, ``gamma`` and ``omega_R``
    (an :class:`EffectiveNetwork` works; its H and D are not used).

    The frequency equation of generator i has constant coefficient
    ``omega_R F_i / (2 H_i)`` and self coefficient ``-D_i / (2 H_i)``. When
    ``F_i`` is zero, H comes from the ``sin(delta_i - delta_j)`` coefficient
    of the strongest neighbour j, ``-omega_R K_ij cos(gamma_ij) / (2 H_i)``.
    """
    if model.is_latent:
        raise ValueError("H/D read-out needs a full-state model")
    d = model.coordinate_dim
    n = d // 2
    F = np.asarray(structure.F, dtype=float)
    K = np.asarray(structure.K, dtype=float)
    gamma = np.asarray(structure.gamma, dtype=float)
    w_R = float(structure.omega_R)
    if F.size != n or d != 2 * n:
        raise ValueError(f"model has {d} coordinates, network has {F.size} generators")

    row = {s: k for k, s in enumerate(model.descriptors)}
    p = model.var_prefix

    def coef(label, col):
        k = row.get(label)
        return 0.0 if k is None else float(model.Xi[k, col])

    H = np.full(n, np.nan)
    D = np.full(n, np.nan)
    route = []
    for i in range(n):
        col = n + i
        c0 = coef("1", col)
        h = np.nan
        how = "unrecoverable"
        if abs(F[i]) > tol and abs(c0) > tol:
            h, how = w_R * F[i] / (2.0 * c0), "constant"
        else:
            k_row = K[i].copy()
            k_row[i] = 0.0
            if k_row.max() > 0:
                j = int(np.argmax(k_row))
                a, b = min(i, j), max(i, j)
                c_sin = coef(f"sin({p}{a + 1}-{p}{b + 1})", col)
                if abs(c_sin) > tol:
                    h = w_R * K[i, j] * np.cos(gamma[i, j]) / (2.0 * abs(c_sin))
                    how = "coupling"
        if how != "unrecoverable":
            H[i] = h
            D[i] = -2.0 * h * coef(f"{p}{col + 1}", col)
        route.append(how)
    return HDEstimate(H, D, tuple(route))


# --------------------------------------------------------------------------
# model files
# --------------------------------------------------------------------------


def save_model(model: SparseModel, path, basis_file: str = "basis.csv",
               spectrum_file: str = "spectrum.csv") -> None:
    """Write the model JSON; a latent model's basis goes to a sibling CSV."""
    path = Path(path)
    p, d = model.Xi.shape
    doc = {
        "descriptors": list(model.descriptors),
        "shape": [p, d],
        "coefficients": [
            [j, k, float(model.Xi[j, k])] for j in range(p) for k in range(d)
        ],
        "library_spec": model.library_spec.to_dict(),
        "lambda": model.lam,
        "regression": asdict(model.regression),
        "var_prefix": model.var_prefix,
        "basis": None,
    }
    if model.basis is not None:
        from .reduction import write_spectrum_csv

        write_basis_csv(model.basis, path.with_name(basis_file))
        if model.basis.singular_values.size:
            write_spectrum_csv(model.basis, path.with_name(spectrum_file))
        doc["basis"] = {"file": basis_file, "spectrum": spectrum_file, "r": model.basis.r}
    path.write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def load_model(path) -> SparseModel:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    p, d = doc["shape"]
    Xi = np.zeros((p, d))
    for j, k, v in doc["coefficients"]:
        Xi[int(j), int(k)] = v
    basis = None
    if doc.get("basis"):
        basis = read_basis(path.with_name(doc["basis"]["file"]),
                           path.with_name(doc["basis"]["spectrum"]))
    return SparseModel(
        Xi,
        tuple(doc["descriptors"]),
        LibrarySpec.from_dict(doc["library_spec"]),
        float(doc["lambda"]),
        basis,
        doc.get("var_prefix", "x"),
        regression=RegressionConfig(**doc.get("regression", {"lam": doc["lambda"]})),
    )
