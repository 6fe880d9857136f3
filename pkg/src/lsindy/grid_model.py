"""Effective-network swing dynamics: network type, vector field, synthetic
networks and the JSON network file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "DEFAULT_OMEGA_R",
    "EffectiveNetwork",
    "GridState",
    "NetworkFileError",
    "ParameterRanges",
    "generate_synthetic",
    "load_network",
    "save_network",
    "vector_field",
]

DEFAULT_OMEGA_R = 2.0 * np.pi * 60.0


class NetworkFileError(ValueError):
    """Raised when a network file or parameter set violates the schema."""


def _as_vector(name, values, n):
    arr = np.array(values, dtype=float)
    if arr.shape != (n,):
        raise NetworkFileError(f"{name}: expected length {n}, got shape {arr.shape}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise NetworkFileError(f"{name}[{bad[0]}] is not finite")
    return arr


@dataclass(frozen=True, eq=False)
class EffectiveNetwork:
    """Swing-equation network with per-generator and pairwise parameters.

    ``K`` and ``gamma`` are dense ``(n_g, n_g)`` arrays; their diagonals are
    ignored and zeroed on construction.
    """

    omega_R: float
    H: np.ndarray
    D: np.ndarray
    F: np.ndarray
    K: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        H = np.array(self.H, dtype=float).reshape(-1)
        n = H.size
        if n < 1:
            raise NetworkFileError("n_g must be at least 1")
        H = _as_vector("H", H, n)
        D = _as_vector("D", self.D, n)
        F = _as_vector("F", self.F, n)
        K = np.array(self.K, dtype=float)
        gamma = np.array(self.gamma, dtype=float)
        for name, mat in (("K", K), ("gamma", gamma)):
            if mat.shape != (n, n):
                raise NetworkFileError(f"{name}: expected shape {(n, n)}, got {mat.shape}")
            if not np.all(np.isfinite(mat)):
                raise NetworkFileError(f"{name} contains non-finite entries")
        np.fill_diagonal(K, 0.0)
        np.fill_diagonal(gamma, 0.0)

        if not (np.isfinite(self.omega_R) and self.omega_R > 0):
            raise NetworkFileError(f"omega_R must be positive, got {self.omega_R}")
        bad = np.flatnonzero(H <= 0)
        if bad.size:
            raise NetworkFileError(f"H[{bad[0]}] = {H[bad[0]]} must be > 0")
        bad = np.flatnonzero(D < 0)
        if bad.size:
            raise NetworkFileError(f"D[{bad[0]}] = {D[bad[0]]} must be >= 0")
        neg = np.argwhere(K < 0)
        if neg.size:
            i, j = neg[0]
            raise NetworkFileError(f"K[{i},{j}] = {K[i, j]} must be >= 0")
        stray = np.argwhere((K == 0) & (gamma != 0))
        if stray.size:
            i, j = stray[0]
            raise NetworkFileError(
                f"gamma[{i},{j}] is nonzero where K[{i},{j}] is zero; "
                "K and gamma must share a sparsity pattern"
            )

        for name, arr in (("H", H), ("D", D), ("F", F), ("K", K), ("gamma", gamma)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "omega_R", float(self.omega_R))

    @property
    def n_g(self) -> int:
        return self.H.size

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Directed coupling pairs ``(i, j)`` with ``K[i, j] > 0``."""
        i, j = np.nonzero(self.K)
        return i, j

    @cached_property
    def _coupling_operator(self):
        i, j = self.edges
        n_e = i.size
        scatter = sp.csr_matrix(
            (np.ones(n_e), (i, np.arange(n_e))), shape=(self.n_g, n_e)
        )
        return scatter, self.K[i, j], self.gamma[i, j]

    def coupling_power(self, delta: np.ndarray) -> np.ndarray:
        """``sum_j K_ij sin(delta_i - delta_j - gamma_ij)`` for each generator.

        ``delta`` may be ``(n_g,)`` or ``(n_g, m)``.
        """
        i, j = self.edges
        scatter, k, g = self._coupling_operator
        if i.size == 0:
            return np.zeros_like(delta, dtype=float)
        diff = delta[i] - delta[j]
        if delta.ndim == 2:
            terms = k[:, None] * np.sin(diff - g[:, None])
        else:
            terms = k * np.sin(diff - g)
        return scatter @ terms

    def equal(self, other: "EffectiveNetwork") -> bool:
        """Bit-level equality of every numeric field."""
        return self.omega_R == other.omega_R and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("H", "D", "F", "K", "gamma")
        )


@dataclass(frozen=True)
class GridState:
    """Rotor angles (rad) and frequency deviations from ``omega_R`` (rad/s)."""

    delta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        if delta.shape != omega.shape:
            raise ValueError(f"delta {delta.shape} and omega {omega.shape} differ in shape")
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(omega))):
            raise ValueError("state contains non-finite entries")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "GridState":
        x = np.asarray(x, dtype=float)
        if x.shape[0] % 2:
            raise ValueError(f"stacked state needs an even row count, got {x.shape[0]}")
        n = x.shape[0] // 2
        return cls(x[:n], x[n:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.delta, self.omega])


def vector_field(net: EffectiveNetwork, s: GridState) -> GridState:
    """Right-hand side of the swing equation.

    Returns ``(ddelta/dt, domega/dt)`` as a :class:`GridState`.  Works on
    single states and on batches whose columns are states.
    """
    if s.delta.shape[0] != net.n_g:
        raise ValueError(f"state has {s.delta.shape[0]} generators, network has {net.n_g}")
    H, D, F = net.H, net.D, net.F
    if s.delta.ndim == 2:
        H, D, F = H[:, None], D[:, None], F[:, None]
    accel = (net.omega_R / (2.0 * H)) * (
        F - (D / net.omega_R) * s.omega - net.coupling_power(s.delta)
    )
    return GridState(s.omega.copy(), accel)


def stacked_field(net: EffectiveNetwork):
    """``f(t, x)`` acting on the stacked ``[delta; omega]`` vector."""
    n = net.n_g

    def f(t, x):
        d = vector_field(net, GridState(x[:n], x[n:]))
        return np.concatenate([d.delta, d.omega])

    return f


# --------------------------------------------------------------------------
# synthetic networks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterRanges:
    """Uniform sampling ranges for :func:`generate_synthetic`."""

    H: tuple[float, float] = (2.0, 6.0)
    D: tuple[float, float] = (0.5, 2.0)
    K: tuple[float, float] = (0.5, 2.0)
    gamma: tuple[float, float] = (0.0, 0.3)
    delta_eq: tuple[float, float] = (-0.2, 0.2)
    omega_R: float = DEFAULT_OMEGA_R

    def validate(self):
        for name in ("H", "D", "K", "gamma", "delta_eq"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
                raise ValueError(f"range {name}=({lo}, {hi}) is infeasible")
        if self.H[0] <= 0:
            raise ValueError(f"H lower bound must be positive, got {self.H[0]}")
        if self.D[0] < 0 or self.K[0] < 0:
            raise ValueError("D and K ranges must be nonnegative")
        if not self.omega_R > 0:
            raise ValueError("omega_R must be positive")


def _adjacency(n, topology, density, rng):
    adj = np.zeros((n, n), dtype=bool)
    if n == 1:
        return adj
    if topology == "ring":
        idx = np.arange(n)
        adj[idx, (idx + 1) % n] = True
    elif topology == "random-sparse":
        upper = np.triu(rng.random((n, n)) < density, k=1)
        adj |= upper
        adj |= adj.T
        # join components so every generator feels the rest of the grid
        n_comp, labels = connected_components(sp.csr_matrix(adj), directed=False)
        if n_comp > 1:
            reps = [rng.choice(np.flatnonzero(labels == c)) for c in range(n_comp)]
            for a, b in zip(reps[:-1], reps[1:]):
                adj[a, b] = True
    else:
        raise ValueError(f"unknown topology {topology!r}; use 'ring' or 'random-sparse'")
    return adj | adj.T


def generate_synthetic(
    n_g: int,
    topology: str = "ring",
    seed: int = 0,
    ranges: ParameterRanges | None = None,
    density: float = 0.1,
    return_equilibrium: bool = False,
):
    """Draw a random effective network with a known synchronous equilibrium.

    Parameters
    ----------
    n_g : int
        Number of generators.
    topology : {"ring", "random-sparse"}
        Coupling graph. ``random-sparse`` keeps each pair with probability
        ``density`` and then links any disconnected components.
    seed : int
        Seed for :func:`numpy.random.default_rng`.
    ranges : ParameterRanges, optional
        Sampling ranges for H, D, K, gamma and the target equilibrium angles.
    density : float
        Edge probability for ``random-sparse``; must lie in (0, 1].
    return_equilibrium : bool
        Also return the equilibrium angles used to balance ``F``.

    Returns
    -------
    EffectiveNetwork or (EffectiveNetwork, ndarray)
    """
    ranges = ranges or ParameterRanges()
    ranges.validate()
    if n_g < 1:
        raise ValueError(f"n_g must be >= 1, got {n_g}")
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")

    rng = np.random.default_rng(seed)
    H = rng.uniform(*ranges.H, size=n_g)
    D = rng.uniform(*ranges.D, size=n_g)
    adj = _adjacency(n_g, topology, density, rng)
    K = np.triu(rng.uniform(*ranges.K, size=(n_g, n_g)), k=1)
    gamma = np.triu(rng.uniform(*ranges.gamma, size=(n_g, n_g)), k=1)
    K = np.where(adj, K + K.T, 0.0)
    gamma = np.where(adj, gamma + gamma.T, 0.0)
    delta_eq = rng.uniform(*ranges.delta_eq, size=n_g)

    # F balances the coupling at delta_eq so (delta_eq, 0) is an equilibrium
    probe = EffectiveNetwork(ranges.omega_R, H, D, np.zeros(n_g), K, gamma)
    F = probe.coupling_power(delta_eq)
    net = EffectiveNetwork(ranges.omega_R, H, D, F, K, gamma)
    if return_equilibrium:
        return net, delta_eq
    return net


def equilibrium_residual(net: EffectiveNetwork, delta_eq: np.ndarray) -> float:
    """Max-norm of the vector field at ``(delta_eq, 0)``."""
    d = vector_field(net, GridState(delta_eq, np.zeros(net.n_g)))
    return float(max(np.abs(d.delta).max(), np.abs(d.omega).max()))


# --------------------------------------------------------------------------
# network files
# --------------------------------------------------------------------------

_KEYS = {"n_g", "omega_R", "H", "D", "F", "coupling"}
_COUPLING_KEYS = {"i", "j", "K", "gamma"}


def network_to_dict(net: EffectiveNetwork) -> dict:
    i, j = net.edges
    return {
        "n_g": net.n_g,
        "omega_R": net.omega_R,
        "H": net.H.tolist(),
        "D": net.D.tolist(),
        "F": net.F.tolist(),
        "coupling": [
            {"i": int(a), "j": int(b), "K": float(net.K[a, b]), "gamma": float(net.gamma[a, b])}
            for a, b in zip(i, j)
        ],
    }


def network_from_dict(doc: dict) -> EffectiveNetwork:
    if not isinstance(doc, dict):
        raise NetworkFileError("network document must be a JSON object")
    unknown = set(doc) - _KEYS
    if unknown:
        raise NetworkFileError(f"unknown keys: {sorted(unknown)}")
    missing = _KEYS - set(doc)
    if missing:
        raise NetworkFileError(f"missing keys: {sorted(missing)}")
    n = doc["n_g"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise NetworkFileError(f"n_g must be a positive integer, got {n!r}")
    if not isinstance(doc["omega_R"], (int, float)) or isinstance(doc["omega_R"], bool):
        raise NetworkFileError("omega_R must be a number")
    vecs = {}
    for name in ("H", "D", "F"):
        vals = doc[name]
        if not isinstance(vals, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals
        ):
            raise NetworkFileError(f"{name} must be an array of numbers")
        vecs[name] = _as_vector(name, vals, n)

    K = np.zeros((n, n))
    gamma = np.zeros((n, n))
    seen = set()
    if not isinstance(doc["coupling"], list):
        raise NetworkFileError("coupling must be an array")
    for idx, entry in enumerate(doc["coupling"]):
        where = f"coupling[{idx}]"
        if not isinstance(entry, dict) or set(entry) != _COUPLING_KEYS:
            raise NetworkFileError(f"{where} must have exactly the keys {sorted(_COUPLING_KEYS)}")
        i, j = entry["i"], entry["j"]
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (i, j)):
            raise NetworkFileError(f"{where}: i and j must be integers")
        if not (0 <= i < n and 0 <= j < n):
            raise NetworkFileError(f"{where}: index out of range for n_g={n}")
        if i == j:
            raise NetworkFileError(f"{where}: self-coupling i == j == {i}")
        if (i, j) in seen:
            raise NetworkFileError(f"{where}: duplicate pair ({i}, {j})")
        seen.add((i, j))
        k, g = entry["K"], entry["gamma"]
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (k, g)):
            raise NetworkFileError(f"{where}: K and gamma must be numbers")
        if k == 0 and g != 0:
            raise NetworkFileError(
                f"{where}: gamma is nonzero but K is zero (sparsity mismatch)"
            )
        K[i, j] = k
        gamma[i, j] = g
    if not np.isfinite(K).all() or not np.isfinite(gamma).all():
        raise NetworkFileError("coupling contains non-finite values")
    return EffectiveNetwork(float(doc["omega_R"]), vecs["H"], vecs["D"], vecs["F"], K, gamma)


def save_network(net: EffectiveNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1) + "\n")


def load_network(path) -> EffectiveNetwork:
    """Read a network JSON file, raising :class:`NetworkFileError` on bad input."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkFileError(f"{path}: invalid JSON ({exc})") from exc
    return network_from_dict(doc)
