"""Linear algebra on H_A^{(x)n} (x) H_B^{(x)n}.

Basis ordering is fixed throughout the package: all n A-slots come first,
then all n B-slots, each block in row-major (first slot most significant)
order. Permutations act by moving the tensor factor in slot k to slot
sigma(k); this makes ``sigma -> B(sigma)`` a homomorphism.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence, Union

import numpy as np

from .symgroup import Permutation

DEFAULT_DENSE_CAP = 4096
HERMITIAN_TOL = 1e-10


class CapExceededError(ValueError):
    """Raised when an operator would exceed the dense-dimension cap."""


class ActionKind(str, enum.Enum):
    A = "A"
    B = "B"
    AB = "AB"
    AxB = "AxB"


@dataclass(frozen=True)
class TensorSpace:
    """The (d_A, d_B, n) context every tensor-power operator lives in.

    A single-system space is just ``TensorSpace(d, 1, n)`` used with kind A.
    """

    d_A: int
    d_B: int
    n: int
    dense_cap: int = DEFAULT_DENSE_CAP

    def __post_init__(self) -> None:
        if self.d_A < 1 or self.d_B < 1 or self.n < 1:
            raise ValueError(f"invalid tensor space {self.d_A}, {self.d_B}, {self.n}")

    @property
    def dim_A(self) -> int:
        return self.d_A**self.n

    @property
    def dim_B(self) -> int:
        return self.d_B**self.n

    @property
    def dim(self) -> int:
        return self.dim_A * self.dim_B

    def local_dim(self, kind: ActionKind | str) -> int:
        """Single-copy dimension the action of ``kind`` sees (d_A, d_B or d_A*d_B)."""
        kind = ActionKind(kind)
        if kind is ActionKind.A:
            return self.d_A
        if kind is ActionKind.B:
            return self.d_B
        return self.d_A * self.d_B

    def native_dim(self, kind: ActionKind | str) -> int:
        """Dimension of the space the kind's projectors are built on."""
        kind = ActionKind(kind)
        if kind is ActionKind.A:
            return self.dim_A
        if kind is ActionKind.B:
            return self.dim_B
        return self.dim

    def require_dense(self, dim: int | None = None) -> None:
        dim = self.dim if dim is None else dim
        if dim > self.dense_cap:
            raise CapExceededError(
                f"dense dimension {dim} exceeds dense cap {self.dense_cap} "
                f"(d_A={self.d_A}, d_B={self.d_B}, n={self.n})"
            )


def _slot_source(n: int, sigma: Permutation) -> tuple[int, ...]:
    # output axis j reads input axis sigma^{-1}(j)
    if sigma.n != n:
        raise ValueError(f"permutation of degree {sigma.n} on {n} slots")
    return sigma.inverse().images


@lru_cache(maxsize=4096)
def _source_index(shape: tuple[int, ...], axes: tuple[int, ...]) -> np.ndarray:
    size = int(np.prod(shape))
    idx = np.arange(size).reshape(shape).transpose(axes).ravel()
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True)
class PermutationOperator:
    """A 0/1 permutation matrix kept as an index map.

    ``(P x)[i] = x[source[i]]``; the dense matrix has ones at (i, source[i]).
    """

    source: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.source)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x[self.source]

    def conjugate(self, m: np.ndarray) -> np.ndarray:
        """P m P^T without materializing P."""
        return m[np.ix_(self.source, self.source)]

    def dense(self, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        if self.dim > cap:
            raise CapExceededError(f"dense dimension {self.dim} exceeds dense cap {cap}")
        out = np.zeros((self.dim, self.dim))
        out[np.arange(self.dim), self.source] = 1.0
        return out

    def __matmul__(self, other: np.ndarray) -> np.ndarray:
        return self.apply(other)


Element = Union[Permutation, tuple[Permutation, Permutation]]


def permutation_operator(
    space: TensorSpace,
    kind: ActionKind | str,
    sigma: Element,
    *,
    native: bool = False,
    dense: bool = False,
) -> PermutationOperator | np.ndarray:
    """B^kind(sigma) as an index map (or a dense matrix if ``dense``).

    By default the operator acts on the full A-then-B space, so kind A is
    B^A(sigma) (x) 1_B. With ``native=True`` kinds A and B act on their own
    factor only. For kind AxB, ``sigma`` is a pair (sigma_A, sigma_B).
    """
    kind = ActionKind(kind)
    n = space.n
    ident = tuple(range(n))
    if kind is ActionKind.AxB:
        sig_a, sig_b = sigma
        a_axes, b_axes = _slot_source(n, sig_a), _slot_source(n, sig_b)
    elif kind is ActionKind.AB:
        a_axes = b_axes = _slot_source(n, sigma)
    elif kind is ActionKind.A:
        a_axes, b_axes = _slot_source(n, sigma), ident
    else:
        a_axes, b_axes = ident, _slot_source(n, sigma)

    if native and kind is ActionKind.A:
        src = _source_index((space.d_A,) * n, a_axes)
    elif native and kind is ActionKind.B:
        src = _source_index((space.d_B,) * n, b_axes)
    else:
        shape = (space.d_A,) * n + (space.d_B,) * n
        axes = tuple(a_axes) + tuple(n + k for k in b_axes)
        src = _source_index(shape, axes)
    op = PermutationOperator(src)
    return op.dense(space.dense_cap) if dense else op


def interleaved_to_a_first(m: np.ndarray, d_A: int, d_B: int, n: int) -> np.ndarray:
    """Reorder an operator on (H_A (x) H_B)^{(x)n} into the A-first basis."""
    dims = (d_A, d_B) * n
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    axes = order + [2 * n + k for k in order]
    dim = m.shape[0]
    return m.reshape(dims + dims).transpose(axes).reshape(dim, dim)


def tensor_power(
    rho: np.ndarray,
    n: int,
    dims: tuple[int, int] | None = None,
    *,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> np.ndarray:
    """rho^{(x)n}; for a bipartite ``rho`` pass ``dims=(d_A, d_B)`` to get A-first order."""
    rho = np.asarray(rho)
    total = rho.shape[0] ** n
    if total > dense_cap:
        raise CapExceededError(f"dense dimension {total} exceeds dense cap {dense_cap}")
    out = np.ones((1, 1), dtype=rho.dtype)
    for _ in range(n):
        out = np.kron(out, rho)
    if dims is not None and n > 1 and min(dims) > 1:
        out = interleaved_to_a_first(out, dims[0], dims[1], n)
    return out


def partial_trace_B(x: np.ndarray, space: TensorSpace) -> np.ndarray:
    """Trace out all n B-slots of an operator on the full space."""
    a, b = space.dim_A, space.dim_B
    return np.einsum("ibjb->ij", x.reshape(a, b, a, b))


def partial_trace_A(x: np.ndarray, space: TensorSpace) -> np.ndarray:
    a, b = space.dim_A, space.dim_B
    return np.einsum("aiaj->ij", x.reshape(a, b, a, b))


def is_hermitian(x: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(x - x.conj().T), initial=0.0) <= tol)


def trace_norm(x: np.ndarray) -> float:
    """Sum of singular values (eigenvalue route for Hermitian input)."""
    x = np.asarray(x)
    if is_hermitian(x, 1e-12):
        return float(np.abs(np.linalg.eigvalsh((x + x.conj().T) / 2)).sum())
    return float(np.linalg.svd(x, compute_uv=False).sum())


def operator_norm(x: np.ndarray) -> float:
    if not np.any(x):
        return 0.0
    return float(np.linalg.norm(x, 2))


def validate_spectrum(values: Sequence[float], tol: float = 1e-12) -> np.ndarray:
    s = np.asarray(values, dtype=float)
    if s.ndim != 1 or len(s) == 0:
        raise ValueError("spectrum must be a non-empty 1-d sequence")
    if np.any(s < -tol):
        raise ValueError(f"spectrum has negative entries: {s}")
    if abs(s.sum() - 1.0) > tol:
        raise ValueError(f"spectrum sums to {s.sum()}, not 1")
    if np.any(np.diff(s) > tol):
        raise ValueError(f"spectrum must be non-increasing: {s}")
    return np.clip(s, 0.0, None)


def spectrum(rho: np.ndarray) -> np.ndarray:
    """Eigenvalues of a density operator, sorted non-increasingly, tiny negatives clipped."""
    vals = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[::-1]
    vals = np.clip(vals, 0.0, None)
    return vals / vals.sum()


def validate_density(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density operator must be square, got {rho.shape}")
    if not is_hermitian(rho, tol):
        raise ValueError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"density operator has trace {np.trace(rho)}")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -tol:
        raise ValueError("density operator is not positive semidefinite")
    return rho


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_density(d: int, seed: int, spectrum: Sequence[float] | None = None) -> np.ndarray:
    """Seeded random state: diag(spectrum) conjugated by a Haar-random unitary.

    Without a spectrum one is drawn uniformly from the simplex first.
    """
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    rng = np.random.default_rng(seed)
    if spectrum is None:
        s = np.sort(rng.dirichlet(np.ones(d)))[::-1]
    else:
        s = validate_spectrum(spectrum)
        if len(s) != d:
            raise ValueError(f"spectrum has length {len(s)}, expected {d}")
    u = haar_unitary(d, rng)
    rho = (u * s) @ u.conj().T
    return (rho + rho.conj().T) / 2


class Marginals(NamedTuple):
    rho_A: np.ndarray
    rho_B: np.ndarray
    r: np.ndarray
    r_A: np.ndarray
    r_B: np.ndarray


def marginals(rho_AB: np.ndarray, d_A: int, d_B: int) -> Marginals:
    rho_AB = np.asarray(rho_AB)
    if rho_AB.shape != (d_A * d_B, d_A * d_B):
        raise ValueError(f"state of shape {rho_AB.shape} does not factor as {d_A} x {d_B}")
    t = rho_AB.reshape(d_A, d_B, d_A, d_B)
    rho_A = np.einsum("ibjb->ij", t)
    rho_B = np.einsum("aiaj->ij", t)
    return Marginals(rho_A, rho_B, spectrum(rho_AB), spectrum(rho_A), spectrum(rho_B))
