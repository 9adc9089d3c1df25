"""File library, popularity, allocation/placement records and cache sampling.

Files are 1-based and sorted by popularity (file 1 is the most popular).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .specfun import DomainError

__all__ = [
    "zipf_popularity",
    "ContentParams",
    "FileAllocation",
    "CachePlacement",
    "validate",
    "segment_starts",
    "segment_lengths",
    "sample_cache_contents",
    "holds_file",
]

_FEAS_TOL = 1e-9


def zipf_popularity(F: int, gamma: float) -> np.ndarray:
    """Zipf request probabilities ``q_f = f^-gamma / sum_i i^-gamma``."""
    if int(F) != F or F < 1:
        raise DomainError(f"F must be a positive integer, got {F}")
    if gamma < 0 or not math.isfinite(gamma):
        raise DomainError(f"Zipf exponent must be >= 0, got {gamma}")
    w = np.arange(1, int(F) + 1, dtype=float) ** (-float(gamma))
    return w / w.sum()


@dataclass(frozen=True)
class ContentParams:
    F: int
    gamma: float
    C: int
    B: int
    q: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if int(self.F) != self.F or self.F < 1:
            raise DomainError(f"F must be a positive integer, got {self.F}")
        if self.C < 0 or self.B < 0 or int(self.C) != self.C or int(self.B) != self.B:
            raise DomainError(f"C and B must be non-negative integers, got C={self.C}, B={self.B}")
        if self.B + self.C > self.F:
            raise DomainError(f"need B + C <= F, got B={self.B}, C={self.C}, F={self.F}")
        q = zipf_popularity(self.F, self.gamma) if self.q is None else np.asarray(self.q, float)
        if q.shape != (self.F,):
            raise DomainError(f"popularity vector must have length F={self.F}")
        if np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-12 or np.any(np.diff(q) > 1e-15):
            raise DomainError("popularity must be positive, non-increasing and sum to 1")
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def popularity(self, f: int) -> float:
        return float(self.q[f - 1])

    def replace(self, **changes) -> "ContentParams":
        """Copy with some fields changed; ``q`` is recomputed unless given."""
        fields = dict(F=self.F, gamma=self.gamma, C=self.C, B=self.B, q=None)
        fields.update(changes)
        return ContentParams(**fields)


@dataclass(frozen=True)
class FileAllocation:
    """Partition of the library into cached files and backhaul files."""

    cached: tuple[int, ...]
    backhaul: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cached", tuple(int(f) for f in self.cached))
        object.__setattr__(self, "backhaul", tuple(int(f) for f in self.backhaul))

    @classmethod
    def from_cached(cls, cached: Sequence[int], F: int) -> "FileAllocation":
        cached = tuple(sorted(int(f) for f in cached))
        s = set(cached)
        return cls(cached, tuple(f for f in range(1, F + 1) if f not in s))

    @classmethod
    def from_backhaul(cls, backhaul: Sequence[int], F: int) -> "FileAllocation":
        backhaul = tuple(sorted(int(f) for f in backhaul))
        s = set(backhaul)
        return cls(tuple(f for f in range(1, F + 1) if f not in s), backhaul)


@dataclass(frozen=True)
class CachePlacement:
    """Caching probability ``t_f`` of every cached file."""

    t: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "t", {int(f): float(v) for f, v in self.t.items()})

    @classmethod
    def from_vector(cls, files: Sequence[int], values: Sequence[float]) -> "CachePlacement":
        if len(files) != len(values):
            raise DomainError("files and values differ in length")
        return cls(dict(zip(files, values)))

    def vector(self, files: Sequence[int]) -> np.ndarray:
        return np.array([self.t.get(f, 0.0) for f in files], dtype=float)

    @property
    def total(self) -> float:
        return float(sum(self.t.values()))


def validate(alloc: FileAllocation, placement: CachePlacement, params: ContentParams) -> list[str]:
    """List every violated constraint; an empty list means feasible."""
    problems = []
    cached, backhaul = set(alloc.cached), set(alloc.backhaul)
    universe = set(range(1, params.F + 1))
    if len(cached) != len(alloc.cached) or len(backhaul) != len(alloc.backhaul):
        problems.append("duplicate file index in allocation")
    if cached & backhaul:
        problems.append(f"cached and backhaul sets are not disjoint: {sorted(cached & backhaul)}")
    if cached | backhaul != universe:
        missing = sorted(universe - cached - backhaul)
        extra = sorted((cached | backhaul) - universe)
        if missing:
            problems.append(f"files not allocated: {missing}")
        if extra:
            problems.append(f"unknown file indices: {extra}")
    stray = sorted(set(placement.t) - cached)
    if stray:
        problems.append(f"placement covers files outside the cached set: {stray}")
    for f, v in sorted(placement.t.items()):
        if not (-_FEAS_TOL <= v <= 1.0 + _FEAS_TOL) or not math.isfinite(v):
            problems.append(f"t_{f}={v} outside [0, 1]")
    total = sum(placement.t.get(f, 0.0) for f in cached)
    if total > params.C + _FEAS_TOL:
        problems.append(f"sum of caching probabilities {total:g} exceeds C={params.C}")
    return problems


def segment_starts(t: Sequence[float]) -> np.ndarray:
    """Left ends of the consecutive unit-interval segments of lengths ``t``."""
    t = np.asarray(t, dtype=float)
    return np.concatenate(([0.0], np.cumsum(t)[:-1]))


def segment_lengths(t: Sequence[float]) -> np.ndarray:
    """Segment widths as laid out in floating point (differences of the cumulative sum)."""
    return np.diff(np.concatenate(([0.0], np.cumsum(np.asarray(t, dtype=float)))))


def _check_placement(t, C):
    t = np.asarray(t, dtype=float)
    if np.any(t < -_FEAS_TOL) or np.any(t > 1 + _FEAS_TOL):
        raise DomainError("caching probabilities must lie in [0, 1]")
    if t.sum() > C + _FEAS_TOL:
        raise DomainError(f"sum of caching probabilities {t.sum():g} exceeds C={C}")
    return np.clip(t, 0.0, 1.0)


def sample_cache_contents(placement: CachePlacement, C: int, u: float) -> set[int]:
    """Systematic sampling of one BS cache from a single uniform draw ``u``.

    Segments of length ``t_f`` are laid end to end on ``[0, sum t)``; the points
    ``u, u+1, u+2, ...`` select the files whose segments they hit.  Each segment
    is at most one unit long, so files are distinct and file ``f`` is selected
    with probability exactly ``t_f``.  At most ``ceil(sum t) <= C`` files are
    returned.
    """
    if not 0.0 <= u < 1.0:
        raise DomainError(f"u must lie in [0, 1), got {u}")
    files = sorted(placement.t)
    t = _check_placement([placement.t[f] for f in files], C)
    ends = np.cumsum(t)
    if not len(ends):
        return set()
    points = u + np.arange(math.ceil(ends[-1]) + 1)
    points = points[points < ends[-1]]
    # each point lands in exactly one segment; zero-width segments are skipped
    idx = np.searchsorted(ends, points, side="right")
    return {files[i] for i in idx}


def holds_file(u, start, length):
    """Vectorized membership test: does the point set ``u + k`` hit ``[start, start+length)``?

    Broadcasts over ``u`` and over ``start``/``length``.
    """
    u = np.asarray(u, dtype=float)
    offset = np.mod(u - np.asarray(start, dtype=float), 1.0)
    return offset < np.asarray(length, dtype=float)
