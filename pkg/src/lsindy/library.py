"""Candidate-function libraries: polynomials in graded lexicographic order plus
optional sine/cosine terms."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import combinations, combinations_with_replacement
from math import comb

import numpy as np

__all__ = [
    "CandidateLibrary",
    "LibraryEvaluator",
    "LibrarySpec",
    "LibraryTooLarge",
    "build",
    "polynomial_count",
]

TRIG_KINDS = ("none", "per-coordinate", "pairwise-difference")
MAX_POLY_ORDER = 5
DEFAULT_MEMORY_BUDGET = 2 * 1024**3  # bytes


class LibraryTooLarge(ValueError):
    """Refusal to allocate a library matrix above the memory budget."""

    def __init__(self, n_rows, n_cols, budget):
        self.n_bytes = 8 * n_rows * n_cols
        super().__init__(
            f"library of {n_rows} x {n_cols} float64 needs {self.n_bytes / 2**20:.1f} MiB, "
            f"over the {budget / 2**20:.1f} MiB budget"
        )


@dataclass(frozen=True)
class LibrarySpec:
    """Which candidate functions to include.

    ``trig_coordinates`` and ``poly_coordinates`` restrict the trig and the
    polynomial terms to subsets of coordinate indices (e.g. trig on the
    rotor-angle block only); ``None`` means all coordinates.
    """

    poly_order: int = 1
    include_constant: bool = True
    trig: str = "none"
    trig_frequency: float = 1.0
    trig_coordinates: tuple[int, ...] | None = None
    poly_coordinates: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0 <= self.poly_order <= MAX_POLY_ORDER:
            raise ValueError(f"poly_order must lie in [0, {MAX_POLY_ORDER}], got {self.poly_order}")
        if self.trig not in TRIG_KINDS:
            raise ValueError(f"trig must be one of {TRIG_KINDS}, got {self.trig!r}")
        if self.poly_order == 0 and not self.include_constant and self.trig == "none":
            raise ValueError("library has no enabled term class")
        for name in ("trig_coordinates", "poly_coordinates"):
            idx = getattr(self, name)
            if idx is not None:
                idx = tuple(int(i) for i in idx)
                if len(set(idx)) != len(idx):
                    raise ValueError(f"{name} has repeated indices")
                object.__setattr__(self, name, idx)

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("trig_coordinates", "poly_coordinates"):
            if d[name] is not None:
                d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LibrarySpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown library keys: {sorted(unknown)}")
        return cls(**d)


def polynomial_count(d: int, order: int, include_constant: bool = True) -> int:
    """Number of monomials of total degree <= ``order`` in ``d`` variables."""
    return comb(d + order, order) - (0 if include_constant else 1)


_SUPERSCRIPT = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


def _monomial_label(idx, names):
    """``(0, 0, 2)`` -> ``"x1²·x3"``."""
    parts = []
    for k in sorted(set(idx)):
        e = idx.count(k)
        parts.append(names[k] if e == 1 else names[k] + str(e).translate(_SUPERSCRIPT))
    return "·".join(parts)


class LibraryEvaluator:
    """Evaluates a library over ``d`` coordinates, column by column.

    Degree-k monomials are built from their degree-(k-1) prefix times one
    coordinate, so each column costs one multiply per sample.
    """

    def __init__(self, d: int, spec: LibrarySpec, var_prefix: str = "x"):
        if d < 1:
            raise ValueError("need at least one coordinate")
        self.d = d
        self.spec = spec
        names = [f"{var_prefix}{i + 1}" for i in range(d)]
        self.descriptors: list[str] = []
        if spec.include_constant:
            self.descriptors.append("1")

        poly_idx = (
            list(range(d)) if spec.poly_coordinates is None else list(spec.poly_coordinates)
        )
        if any(not 0 <= i < d for i in poly_idx):
            raise ValueError(f"poly_coordinates {poly_idx} out of range for d={d}")
        self._poly_idx = np.array(poly_idx, dtype=np.intp)
        # (parent index into previous degree block, multiplying coordinate)
        self._poly_steps: list[tuple[np.ndarray, np.ndarray]] = []
        prev_index = {(i,): k for k, i in enumerate(poly_idx)}
        if spec.poly_order >= 1:
            self.descriptors += [names[i] for i in poly_idx]
        for deg in range(2, spec.poly_order + 1):
            tuples = list(combinations_with_replacement(poly_idx, deg))
            parents = np.array([prev_index[t[:-1]] for t in tuples], dtype=np.intp)
            coords = np.array([t[-1] for t in tuples], dtype=np.intp)
            self._poly_steps.append((parents, coords))
            self.descriptors += [_monomial_label(t, names) for t in tuples]
            prev_index = {t: k for k, t in enumerate(tuples)}

        trig_idx = (
            list(range(d)) if spec.trig_coordinates is None else list(spec.trig_coordinates)
        )
        if any(not 0 <= i < d for i in trig_idx):
            raise ValueError(f"trig_coordinates {trig_idx} out of range for d={d}")
        w = spec.trig_frequency
        wtxt = "" if w == 1 else f"{w:g}·"
        self._trig_a = self._trig_b = None
        if spec.trig == "per-coordinate":
            self._trig_a = np.array(trig_idx, dtype=np.intp)
            args = [f"{wtxt}{names[i]}" for i in trig_idx]
        elif spec.trig == "pairwise-difference":
            pairs = list(combinations(trig_idx, 2))
            self._trig_a = np.array([p[0] for p in pairs], dtype=np.intp)
            self._trig_b = np.array([p[1] for p in pairs], dtype=np.intp)
            diff = [f"{names[i]}-{names[j]}" for i, j in pairs]
            args = [f"{w:g}·({s})" if w != 1 else s for s in diff]
        else:
            args = []
        self.descriptors += [f"sin({a})" for a in args] + [f"cos({a})" for a in args]
        if len(set(self.descriptors)) != len(self.descriptors):
            raise ValueError("duplicate library descriptors")

    @property
    def n_terms(self) -> int:
        return len(self.descriptors)

    def evaluate_columns(self, data: np.ndarray) -> np.ndarray:
        """Rows are candidates, columns samples: shape ``(p, m)``.

        ``data`` is ``(d, m)`` or a single ``(d,)`` state (then ``(p,)``).
        """
        data = np.asarray(data, dtype=float)
        blocks = []
        tail = data.shape[1:]
        if self.spec.include_constant:
            blocks.append(np.ones((1,) + tail))
        if self.spec.poly_order >= 1:
            prev = data if self.spec.poly_coordinates is None else data[self._poly_idx]
            blocks.append(prev)
            for parents, coords in self._poly_steps:
                prev = prev[parents] * data[coords]
                blocks.append(prev)
        if self._trig_a is not None:
            arg = data[self._trig_a]
            if self._trig_b is not None:
                arg = arg - data[self._trig_b]
            arg = self.spec.trig_frequency * arg
            blocks.append(np.sin(arg))
            blocks.append(np.cos(arg))
        return np.concatenate(blocks, axis=0)

    def __call__(self, state: np.ndarray) -> np.ndarray:
        return self.evaluate_columns(state)


@dataclass(frozen=True)
class CandidateLibrary:
    """Evaluated ``Theta`` (m x p), one column per descriptor."""

    Theta: np.ndarray
    descriptors: tuple[str, ...]
    spec: LibrarySpec
    column_norms: np.ndarray

    @property
    def n_terms(self) -> int:
        return len(self.descriptors)


def build(data, spec: LibrarySpec | None = None, var_prefix: str = "x",
          memory_budget: int = DEFAULT_MEMORY_BUDGET) -> CandidateLibrary:
    """Evaluate the candidate library on ``data`` (d x m, one column per sample).

    Columns are ordered: constant, linear terms in coordinate order, higher
    monomials in graded lexicographic order, then all sines and all cosines.
    Row ``k`` of the result is the library evaluated at ``data[:, k]``.

    Raises
    ------
    LibraryTooLarge
        If the ``m x p`` matrix would exceed ``memory_budget`` bytes.
    """
    spec = spec or LibrarySpec()
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if not np.isfinite(data).all():
        raise ValueError("library data is not finite")
    d, m = data.shape
    ev = LibraryEvaluator(d, spec, var_prefix)
    if 8 * m * ev.n_terms > memory_budget:
        raise LibraryTooLarge(m, ev.n_terms, memory_budget)
    Theta = np.ascontiguousarray(ev.evaluate_columns(data).T)
    return CandidateLibrary(Theta, tuple(ev.descriptors), spec, np.linalg.norm(Theta, axis=0))
