"""Young frames, hook lengths, types and typeclasses.

Everything here is exact integer arithmetic except the normalized profiles,
which are float arrays because they are compared against spectra.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial, prod
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True, order=False)
class YoungFrame:
    """A partition of ``n`` stored without trailing zeros.

    ``d_max`` records the row bound the frame was enumerated under; it is
    metadata only and does not take part in equality or hashing.
    """

    parts: tuple[int, ...]
    d_max: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        parts = tuple(int(p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise ValueError("a Young frame needs at least one box")
        if any(p < 1 for p in parts):
            raise ValueError(f"parts must be positive: {parts}")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"parts must be non-increasing: {parts}")
        if self.d_max is not None and len(parts) > self.d_max:
            raise ValueError(f"{parts} has more than {self.d_max} rows")

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def rows(self) -> int:
        return len(self.parts)

    def padded(self, d: int) -> tuple[int, ...]:
        if self.rows > d:
            raise ValueError(f"{self.parts} has more than {d} rows")
        return self.parts + (0,) * (d - self.rows)

    def conjugate(self) -> YoungFrame:
        return YoungFrame(tuple(sum(1 for p in self.parts if p > j) for j in range(self.parts[0])))

    def cells(self) -> Iterator[tuple[int, int]]:
        """Cells as 1-based (row, column) pairs in reading order."""
        for i, p in enumerate(self.parts, start=1):
            for j in range(1, p + 1):
                yield i, j

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.parts)) + ")"


def _partitions(n: int, max_part: int, max_rows: int) -> Iterator[tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    if max_rows == 0:
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in _partitions(n - first, first, max_rows - 1):
            yield (first,) + rest


def enumerate_frames(d: int, n: int) -> list[YoungFrame]:
    """All frames in YF_{d,n}, in lexicographically decreasing order of parts."""
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    return [YoungFrame(p, d_max=d) for p in _partitions(n, n, d)]


def hook_lengths(frame: YoungFrame) -> dict[tuple[int, int], int]:
    conj = frame.conjugate().parts
    return {
        (i, j): (frame.parts[i - 1] - j) + (conj[j - 1] - i) + 1
        for i, j in frame.cells()
    }


def dim_irrep(frame: YoungFrame) -> int:
    """Dimension of the irreducible S_n module, by the hook-length formula."""
    hooks = prod(hook_lengths(frame).values())
    dim, rem = divmod(factorial(frame.n), hooks)
    assert rem == 0, "hook product must divide n!"
    return dim


def normalized_profile(frame: YoungFrame, d: int) -> np.ndarray:
    n = frame.n
    return np.array([p / n for p in frame.padded(d)], dtype=float)


def profile_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """l1 distance between two profiles of equal length."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"profile lengths differ: {p.shape} vs {q.shape}")
    return float(np.abs(p - q).sum())


def validate_type(counts: Sequence[int]) -> tuple[int, ...]:
    counts = tuple(int(c) for c in counts)
    if not counts or any(c < 0 for c in counts):
        raise ValueError(f"type counts must be non-negative: {counts}")
    return counts


def downsort(counts: Sequence[int]) -> YoungFrame:
    counts = validate_type(counts)
    parts = tuple(sorted((c for c in counts if c > 0), reverse=True))
    if not parts:
        raise ValueError("the all-zero type has no frame")
    return YoungFrame(parts)


def typeclass_size(counts: Sequence[int]) -> int:
    counts = validate_type(counts)
    return factorial(sum(counts)) // prod(factorial(c) for c in counts)


def enumerate_types(d: int, n: int) -> Iterator[tuple[int, ...]]:
    """All types on an alphabet of size d for strings of length n."""
    if d == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in enumerate_types(d - 1, n - first):
            yield (first,) + rest


def count_types(d: int, n: int) -> int:
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    return comb(n + d - 1, d - 1)
