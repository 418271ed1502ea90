"""Symmetric-group elements, conjugacy classes and irreducible characters."""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import factorial, prod
from typing import Iterator, Sequence

from .partitions import YoungFrame, dim_irrep, enumerate_frames

MAX_ITERATION_DEGREE = 10


@dataclass(frozen=True)
class Permutation:
    """A permutation of {0, ..., n-1} in one-line notation (0-based images)."""

    images: tuple[int, ...]

    def __post_init__(self) -> None:
        images = tuple(int(i) for i in self.images)
        object.__setattr__(self, "images", images)
        if sorted(images) != list(range(len(images))):
            raise ValueError(f"not a bijection on range({len(images)}): {images}")

    @classmethod
    def from_one_line(cls, images: Sequence[int]) -> Permutation:
        """Build from the usual 1-based one-line notation, e.g. (2, 3, 1)."""
        return cls(tuple(i - 1 for i in images))

    @classmethod
    def identity(cls, n: int) -> Permutation:
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.images)

    def one_line(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in self.images)

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __matmul__(self, other: Permutation) -> Permutation:
        return compose(self, other)

    def inverse(self) -> Permutation:
        inv = [0] * self.n
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def cycles(self) -> list[tuple[int, ...]]:
        seen = [False] * self.n
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cycle = []
            i = start
            while not seen[i]:
                seen[i] = True
                cycle.append(i)
                i = self.images[i]
            out.append(tuple(cycle))
        return out

    def sign(self) -> int:
        return -1 if (self.n - len(self.cycles())) % 2 else 1


def compose(a: Permutation, b: Permutation) -> Permutation:
    """(a o b)(i) = a(b(i))."""
    if a.n != b.n:
        raise ValueError(f"degree mismatch: {a.n} vs {b.n}")
    return Permutation(tuple(a.images[j] for j in b.images))


def iterate_group(n: int) -> Iterator[Permutation]:
    """All of S_n in lexicographic one-line order."""
    if not 1 <= n <= MAX_ITERATION_DEGREE:
        raise ValueError(f"group iteration supports 1 <= n <= {MAX_ITERATION_DEGREE}, got {n}")
    for images in itertools.permutations(range(n)):
        yield Permutation(images)


def cycle_type(p: Permutation) -> YoungFrame:
    return YoungFrame(tuple(sorted((len(c) for c in p.cycles()), reverse=True)))


def centralizer_order(c: YoungFrame) -> int:
    return prod(k**m * factorial(m) for k, m in Counter(c.parts).items())


def class_size(c: YoungFrame) -> int:
    return factorial(c.n) // centralizer_order(c)


def _beta_set(parts: tuple[int, ...]) -> tuple[int, ...]:
    l = len(parts)
    return tuple(p + l - 1 - i for i, p in enumerate(parts))


def _from_beta(beta: Sequence[int]) -> tuple[int, ...]:
    beta = sorted(beta, reverse=True)
    l = len(beta)
    parts = tuple(b - (l - 1 - i) for i, b in enumerate(beta))
    return tuple(p for p in parts if p > 0)


@lru_cache(maxsize=None)
def _mn(parts: tuple[int, ...], cycles: tuple[int, ...]) -> int:
    if not cycles:
        return 1 if not parts else 0
    k, rest = cycles[0], cycles[1:]
    beta = _beta_set(parts)
    occupied = set(beta)
    total = 0
    for b in beta:
        target = b - k
        if target < 0 or target in occupied:
            continue
        # border-strip height = number of beads jumped over
        height = sum(1 for x in beta if target < x < b)
        new_beta = [x for x in beta if x != b] + [target]
        total += (-1) ** height * _mn(_from_beta(new_beta), rest)
    return total


def character(frame: YoungFrame, c: YoungFrame) -> int:
    """chi_frame evaluated on the class with cycle type ``c`` (Murnaghan-Nakayama)."""
    if frame.n != c.n:
        raise ValueError(f"frame {frame} and class {c} partition different n")
    return _mn(frame.parts, c.parts)


@dataclass(frozen=True)
class CharacterTable:
    n: int
    entries: dict[tuple[YoungFrame, YoungFrame], int]

    @property
    def frames(self) -> list[YoungFrame]:
        return enumerate_frames(self.n, self.n)

    def __getitem__(self, key: tuple[YoungFrame, YoungFrame]) -> int:
        frame, c = key
        return self.entries[(YoungFrame(frame.parts), YoungFrame(c.parts))]


def character_table(n: int) -> CharacterTable:
    frames = [YoungFrame(f.parts) for f in enumerate_frames(n, n)]
    return CharacterTable(n, {(f, c): character(f, c) for f in frames for c in frames})


def check_table(table: CharacterTable) -> None:
    """Raise if identity column, row or column orthogonality fails."""
    frames = [YoungFrame(f.parts) for f in table.frames]
    order = factorial(table.n)
    ident = YoungFrame((1,) * table.n)
    for f in frames:
        if table[f, ident] != dim_irrep(f):
            raise AssertionError(f"chi_{f}(e) != dim F_{f}")
    for f, g in itertools.product(frames, repeat=2):
        s = sum(class_size(c) * table[f, c] * table[g, c] for c in frames)
        if s != (order if f == g else 0):
            raise AssertionError(f"row orthogonality fails for {f}, {g}")
    for c, c2 in itertools.product(frames, repeat=2):
        s = sum(table[f, c] * table[f, c2] for f in frames)
        if s != (centralizer_order(c) if c == c2 else 0):
            raise AssertionError(f"column orthogonality fails for {c}, {c2}")
