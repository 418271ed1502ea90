"""Central, refined and typical projectors on tensor-power spaces.

Central projectors come from the character sum
``P_lambda = (dim F_lambda / n!) sum_sigma chi_lambda(sigma) B(sigma)``.
The refinement into single copies of F_lambda is chosen compatible with the
A/B split: every copy lies under exactly one ``P_mu^A (x) P_nu^B``.
"""
from __future__ import annotations

import hashlib
import itertools
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Iterable, Sequence

import numpy as np

from .partitions import (
    YoungFrame,
    dim_irrep,
    enumerate_frames,
    normalized_profile,
    profile_distance,
    validate_type,
)
from .symgroup import Permutation, character, compose, cycle_type, iterate_group
from .tensorspace import (
    ActionKind,
    CapExceededError,
    TensorSpace,
    interleaved_to_a_first,
    permutation_operator,
)

PROFILE_TOL = 1e-12
MAX_REFINE_ATTEMPTS = 5


class RefinementError(RuntimeError):
    """The random commutant element failed to split an isotypic block."""


class MatrixUnitError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CentralProjector:
    kind: ActionKind
    frame: YoungFrame
    matrix: np.ndarray
    multiplicity: int

    @property
    def dim_irrep(self) -> int:
        return dim_irrep(self.frame)


def _multiplicity(matrix: np.ndarray, frame: YoungFrame) -> int:
    tr = float(np.trace(matrix).real) / dim_irrep(frame)
    m = int(round(tr))
    if abs(tr - m) > 1e-6:
        raise ArithmeticError(f"multiplicity of {frame} is not an integer: {tr}")
    return m


def _character_sum(space: TensorSpace, kind: ActionKind, frame: YoungFrame) -> np.ndarray:
    n = space.n
    dim = space.native_dim(kind)
    space.require_dense(dim)
    out = np.zeros((dim, dim))
    rows = np.arange(dim)
    chis: dict[tuple[int, ...], int] = {}
    native = kind in (ActionKind.A, ActionKind.B)
    for sigma in iterate_group(n):
        ct = cycle_type(sigma).parts
        if ct not in chis:
            chis[ct] = character(frame, YoungFrame(ct))
        if chis[ct] == 0:
            continue
        op = permutation_operator(space, kind, sigma, native=native)
        out[rows, op.source] += chis[ct]
    out *= dim_irrep(frame) / factorial(n)
    return out


def central_projector(
    space: TensorSpace, kind: ActionKind | str, frame: YoungFrame | tuple[YoungFrame, YoungFrame]
) -> CentralProjector:
    """Isotypic projector of ``frame`` for the action ``kind`` on its native space.

    Kinds A and B live on H_A^{(x)n} and H_B^{(x)n}; AB and AxB on the full
    space. For AxB, ``frame`` is a pair (mu, nu) and the result is
    P_mu^A (x) P_nu^B. Frames with more rows than the local dimension give
    the zero operator.
    """
    kind = ActionKind(kind)
    if kind is ActionKind.AxB:
        mu, nu = frame
        pa = central_projectors(space, ActionKind.A).get(YoungFrame(mu.parts))
        pb = central_projectors(space, ActionKind.B).get(YoungFrame(nu.parts))
        space.require_dense()
        if pa is None or pb is None:
            mat = np.zeros((space.dim, space.dim))
        else:
            mat = np.kron(pa.matrix, pb.matrix)
        dim = dim_irrep(mu) * dim_irrep(nu)
        m = int(round(float(np.trace(mat)) / dim))
        return CentralProjector(kind, frame, mat, m)  # type: ignore[arg-type]
    frame = YoungFrame(frame.parts)
    if frame.n != space.n:
        raise ValueError(f"frame {frame} does not have {space.n} boxes")
    if frame.rows > space.local_dim(kind):
        dim = space.native_dim(kind)
        space.require_dense(dim)
        return CentralProjector(kind, frame, np.zeros((dim, dim)), 0)
    cached = central_projectors(space, kind).get(frame)
    if cached is not None:
        return cached
    mat = _character_sum(space, kind, frame)
    return CentralProjector(kind, frame, mat, _multiplicity(mat, frame))


_REGISTRY: dict[tuple, dict[YoungFrame, CentralProjector]] = {}


def _registry_key(space: TensorSpace, kind: ActionKind) -> tuple:
    if kind is ActionKind.A:
        return (kind.value, space.d_A, 1, space.n)
    if kind is ActionKind.B:
        return (kind.value, space.d_B, 1, space.n)
    return (kind.value, space.d_A, space.d_B, space.n)


def register_projectors(space: TensorSpace, kind: ActionKind | str, projs: Iterable[CentralProjector]) -> None:
    """Install an already-built (e.g. cache-loaded) projector set."""
    kind = ActionKind(kind)
    _REGISTRY[_registry_key(space, kind)] = {p.frame: p for p in projs}


def central_projectors(space: TensorSpace, kind: ActionKind | str) -> dict[YoungFrame, CentralProjector]:
    """All non-zero central projectors of ``kind``, keyed by frame, memoized."""
    kind = ActionKind(kind)
    if kind is ActionKind.AxB:
        raise ValueError("AxB projectors are indexed by frame pairs; use central_projector")
    key = _registry_key(space, kind)
    if key not in _REGISTRY:
        space.require_dense(space.native_dim(kind))
        out = {}
        for frame in enumerate_frames(space.local_dim(kind), space.n):
            frame = YoungFrame(frame.parts)
            mat = _character_sum(space, kind, frame)
            out[frame] = CentralProjector(kind, frame, mat, _multiplicity(mat, frame))
        _REGISTRY[key] = out
    return _REGISTRY[key]


def clear_registry() -> None:
    _REGISTRY.clear()
    _refinement_cached.cache_clear()


@dataclass(frozen=True, eq=False)
class TypicalProjector:
    kind: ActionKind
    center: np.ndarray
    radius: float
    matrix: np.ndarray
    frames: tuple[YoungFrame, ...]

    @property
    def is_zero(self) -> bool:
        return not self.frames


def typical_frames(
    d: int, n: int, spectrum: Sequence[float], radius: float, *, strict: bool = False
) -> list[YoungFrame]:
    """Frames of YF_{d,n} whose profile is within l1 ``radius`` of ``spectrum``."""
    out = []
    for frame in enumerate_frames(d, n):
        dist = profile_distance(normalized_profile(frame, d), spectrum)
        inside = dist < radius - PROFILE_TOL if strict else dist <= radius + PROFILE_TOL
        if inside:
            out.append(YoungFrame(frame.parts))
    return out


def typical_projector(
    space: TensorSpace, kind: ActionKind | str, spectrum: Sequence[float], radius: float
) -> TypicalProjector:
    """Sum of central projectors whose frame profile is within ``radius`` of ``spectrum``.

    The zero operator is a legitimate result when no frame qualifies.
    """
    kind = ActionKind(kind)
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    d = space.local_dim(kind)
    s = np.asarray(spectrum, dtype=float)
    if len(s) != d:
        raise ValueError(f"spectrum of length {len(s)} for local dimension {d}")
    dim = space.native_dim(kind)
    projs = central_projectors(space, kind)
    frames = tuple(typical_frames(d, space.n, s, radius))
    mat = np.zeros((dim, dim))
    for f in frames:
        mat += projs[f].matrix
    return TypicalProjector(kind, s, float(radius), mat, frames)


# --------------------------------------------------------------------------
# refinement compatible with the A/B split


@dataclass(frozen=True, eq=False)
class RefinedProjector:
    frame: YoungFrame
    index: int
    matrix: np.ndarray
    parent: tuple[YoungFrame, YoungFrame]
    basis: np.ndarray = field(repr=False)


def group_average(space: TensorSpace, m: np.ndarray, kind: ActionKind = ActionKind.AB) -> np.ndarray:
    """(1/n!) sum_sigma B(sigma) m B(sigma)^T in lexicographic group order."""
    out = np.zeros_like(m)
    for sigma in iterate_group(space.n):
        out += permutation_operator(space, kind, sigma).conjugate(m)
    return out / factorial(space.n)


def _random_commutant_element(space: TensorSpace, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    dim = space.dim
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return group_average(space, (g + g.conj().T) / 2)


def _range_basis(p: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((p + p.conj().T) / 2)
    return vecs[:, vals > 0.5]


def _split(h: np.ndarray, f: int) -> list[np.ndarray] | None:
    """Eigenvector blocks of size f, or None if the eigenvalues do not cluster cleanly."""
    vals, vecs = np.linalg.eigh(h)
    k = len(vals) // f
    scale = 1.0 + float(np.max(np.abs(vals), initial=0.0))
    blocks = []
    for b in range(k):
        chunk = vals[b * f : (b + 1) * f]
        if chunk[-1] - chunk[0] > 1e-8 * scale:
            return None
        if b > 0 and chunk[0] - vals[b * f - 1] < 1e-6 * scale:
            return None
        blocks.append(vecs[:, b * f : (b + 1) * f])
    return blocks


def refine(space: TensorSpace, frame: YoungFrame, seed: int = 0) -> list[RefinedProjector]:
    """Split P_frame^{AB} into m orthogonal copies of F_frame, each under one P_mu (x) P_nu.

    For every parent pair (mu, nu) the block (P_mu (x) P_nu) P_frame is cut by
    the eigenspaces of a random Hermitian element of the commutant. A block
    whose eigenvalues collide is retried with a fresh seed.
    """
    frame = YoungFrame(frame.parts)
    p_ab = central_projectors(space, ActionKind.AB).get(frame)
    if p_ab is None:
        return []
    f = dim_irrep(frame)
    pa = central_projectors(space, ActionKind.A)
    pb = central_projectors(space, ActionKind.B)
    for attempt in range(MAX_REFINE_ATTEMPTS):
        x = _random_commutant_element(space, seed + 7919 * attempt)
        out: list[RefinedProjector] = []
        ok = True
        for mu, nu in itertools.product(pa, pb):
            w = np.kron(pa[mu].matrix, pb[nu].matrix) @ p_ab.matrix
            v = _range_basis(w)
            if v.shape[1] == 0:
                continue
            if v.shape[1] % f:
                raise RefinementError(f"block ({mu},{nu}) of {frame} has rank {v.shape[1]}, not a multiple of {f}")
            blocks = _split(v.conj().T @ x @ v, f)
            if blocks is None:
                ok = False
                break
            for blk in blocks:
                basis = v @ blk
                out.append(RefinedProjector(frame, len(out), basis @ basis.conj().T, (mu, nu), basis))
        if ok:
            return out
    raise RefinementError(f"could not split {frame} after {MAX_REFINE_ATTEMPTS} attempts")


@lru_cache(maxsize=32)
def _refinement_cached(space: TensorSpace, seed: int) -> dict[YoungFrame, list[RefinedProjector]]:
    return {f: refine(space, f, seed) for f in central_projectors(space, ActionKind.AB)}


def refinement(space: TensorSpace, seed: int = 0) -> dict[YoungFrame, list[RefinedProjector]]:
    """Refined projectors for every AB frame, memoized per (space, seed)."""
    return _refinement_cached(space, seed)


def members_by_parent(
    refined: Iterable[RefinedProjector],
) -> dict[tuple[YoungFrame, YoungFrame], list[RefinedProjector]]:
    out: dict[tuple[YoungFrame, YoungFrame], list[RefinedProjector]] = {}
    for r in refined:
        out.setdefault(r.parent, []).append(r)
    return out


# --------------------------------------------------------------------------
# matrix units and commutant coefficients


@dataclass(frozen=True, eq=False)
class MatrixUnitFamily:
    """Matrix units Y_ij = W_i W_j^dagger for one frame.

    ``isometries[i]`` is a D x f orthonormal basis W_i of copy i, aligned so
    that W_i W_0^dagger intertwines copy 0 with copy i. Units are built on
    demand; the full m x m array would not fit in memory at n = 4.
    """

    frame: YoungFrame
    isometries: np.ndarray  # shape (m, D, f)

    @property
    def m(self) -> int:
        return self.isometries.shape[0]

    @property
    def dim_irrep(self) -> int:
        return self.isometries.shape[2]

    def unit(self, i: int, j: int) -> np.ndarray:
        return self.isometries[i] @ self.isometries[j].conj().T

    @property
    def stacked(self) -> np.ndarray:
        """All W_i side by side, D x (m f)."""
        m, dim, f = self.isometries.shape
        return self.isometries.transpose(1, 0, 2).reshape(dim, m * f)


def matrix_units(
    space: TensorSpace, frame: YoungFrame, refined: Sequence[RefinedProjector], seed: int = 0
) -> MatrixUnitFamily:
    """Intertwiners between the copies in ``refined``.

    Copy 0 keeps its refinement basis. For copy i, a seeded random operator
    P_i G P_0 is group-averaged into an intertwiner, then scaled to an
    isometry (Schur's lemma makes Z^dagger Z a multiple of P_0).
    """
    frame = YoungFrame(frame.parts)
    f = dim_irrep(frame)
    if not refined:
        return MatrixUnitFamily(frame, np.zeros((0, space.dim, f), dtype=complex))
    rng = np.random.default_rng(seed)
    dim = space.dim
    w0 = refined[0].basis
    ws = [w0]
    for r in refined[1:]:
        for _ in range(MAX_REFINE_ATTEMPTS):
            g = rng.standard_normal((dim, f)) + 1j * rng.standard_normal((dim, f))
            seed_op = (r.matrix @ g) @ w0.conj().T
            z = group_average(space, seed_op) @ w0
            c = float(np.linalg.norm(z) ** 2) / f
            if c > 1e-10:
                break
        else:
            raise MatrixUnitError(f"intertwiner for copy {r.index} of {frame} vanished")
        ws.append(z / np.sqrt(c))
    fam = MatrixUnitFamily(frame, np.stack(ws))
    res = matrix_unit_residuals(fam, refined)
    worst = max(res.values())
    if worst > 1e-7:
        raise MatrixUnitError(f"matrix units for {frame} off by {worst:.3e}: {res}")
    return fam


def matrix_unit_residuals(fam: MatrixUnitFamily, refined: Sequence[RefinedProjector]) -> dict[str, float]:
    """Operator-norm residuals of the three matrix-unit relations and tr Y_ii = dim F.

    With Y_ij = W_i W_j^dagger, the product relation Y_ij Y_kl = delta_jk Y_il
    holds for all index quadruples exactly when the W_i have orthonormal,
    mutually orthogonal columns, i.e. when the stacked Gram matrix is the
    identity; its deviation bounds every product residual.
    """
    stacked = fam.stacked
    gram = stacked.conj().T @ stacked
    product = float(np.linalg.norm(gram - np.eye(gram.shape[0]), 2)) if gram.size else 0.0
    diag = 0.0
    support = 0.0
    trace = 0.0
    for i, r in enumerate(refined):
        w = fam.isometries[i]
        diag = max(diag, float(np.linalg.norm(w @ w.conj().T - r.matrix, 2)))
        support = max(support, float(np.linalg.norm(r.matrix @ w - w, 2)))
        trace = max(trace, abs(float(np.trace(w.conj().T @ w).real) - fam.dim_irrep))
    return {"product": product, "diagonal": diag, "support": support, "trace": trace}


def commutant_coefficients(fam: MatrixUnitFamily, p_rho: np.ndarray) -> np.ndarray:
    """c with P_lambda rho^{(x)n} = sum_ij c_ij Y_ij, via c_ij = tr{Y_ij^dagger P rho}/dim F."""
    m, f = fam.m, fam.dim_irrep
    stacked = fam.stacked
    blocks = (stacked.conj().T @ p_rho @ stacked).reshape(m, f, m, f)
    return np.einsum("iaja->ij", blocks) / f


def reconstruct(fam: MatrixUnitFamily, c: np.ndarray) -> np.ndarray:
    stacked = fam.stacked
    return stacked @ np.kron(c, np.eye(fam.dim_irrep)) @ stacked.conj().T


# --------------------------------------------------------------------------
# Young symmetrizers and typeclasses


def canonical_tableau(frame: YoungFrame) -> list[list[int]]:
    """Row-reading standard tableau (0-based slots): row i holds lambda_1+...+lambda_{i-1}+j."""
    rows, start = [], 0
    for p in frame.parts:
        rows.append(list(range(start, start + p)))
        start += p
    return rows


def _set_permutations(n: int, blocks: Sequence[Sequence[int]]) -> list[tuple[Permutation, int]]:
    """All permutations preserving each block setwise, with their signs."""
    per_block = [list(itertools.permutations(b)) for b in blocks]
    out = []
    for choice in itertools.product(*per_block):
        images = list(range(n))
        for block, img in zip(blocks, choice):
            for src, dst in zip(block, img):
                images[src] = dst
        p = Permutation(tuple(images))
        out.append((p, p.sign()))
    return out


def young_symmetrizer(frame: YoungFrame, tableau: Sequence[Sequence[int]] | None = None) -> dict[Permutation, int]:
    """E_T = sum_{pi in C_T} sgn(pi) sum_{tau in R_T} pi o tau as a group-algebra element."""
    rows = [list(r) for r in (tableau or canonical_tableau(frame))]
    n = frame.n
    cols = [[r[j] for r in rows if len(r) > j] for j in range(len(rows[0]))]
    row_group = _set_permutations(n, rows)
    col_group = _set_permutations(n, cols)
    out: dict[Permutation, int] = {}
    for pi, sgn in col_group:
        for tau, _ in row_group:
            g = compose(pi, tau)
            out[g] = out.get(g, 0) + sgn
    return out


def group_algebra_operator(
    space: TensorSpace, kind: ActionKind | str, element: dict[Permutation, int], *, native: bool = True
) -> np.ndarray:
    kind = ActionKind(kind)
    dim = space.native_dim(kind) if native else space.dim
    space.require_dense(dim)
    out = np.zeros((dim, dim))
    rows = np.arange(dim)
    for g, coeff in element.items():
        op = permutation_operator(space, kind, g, native=native and kind in (ActionKind.A, ActionKind.B))
        out[rows, op.source] += coeff
    return out


def permute_word(word: Sequence[int], g: Permutation) -> tuple[int, ...]:
    """Letters of B(g) e_word: the letter in slot k moves to slot g(k)."""
    out = [0] * len(word)
    for k, letter in enumerate(word):
        out[g(k)] = letter
    return tuple(out)


def canonical_word(frame: YoungFrame) -> tuple[int, ...]:
    """The word e_0^{lambda_1} e_1^{lambda_2} ...: row i of the canonical tableau holds letter i."""
    return tuple(i for i, p in enumerate(frame.parts) for _ in range(p))


def symmetrizer_overlap(frame: YoungFrame, word: Sequence[int] | None = None) -> int:
    """<v, B(E_T) v> in exact integer arithmetic, v the basis word ``word``."""
    word = tuple(word) if word is not None else canonical_word(frame)
    return sum(c for g, c in young_symmetrizer(frame).items() if permute_word(word, g) == word)


def _digits(index: np.ndarray, base: int, count: int) -> np.ndarray:
    out = np.empty((len(index), count), dtype=np.int64)
    rest = index.copy()
    for k in range(count - 1, -1, -1):
        out[:, k] = rest % base
        rest //= base
    return out


def typeclass_mask(space: TensorSpace, counts: Sequence[int]) -> np.ndarray:
    """Boolean diagonal of the typeclass projector in the computational product basis.

    The single-copy symbol of slot k is a_k * d_B + b_k.
    """
    counts = validate_type(counts)
    d = space.d_A * space.d_B
    if len(counts) != d or sum(counts) != space.n:
        raise ValueError(f"type {counts} is not a type on [{d}]^{space.n}")
    idx = np.arange(space.dim)
    a = _digits(idx // space.dim_B, space.d_A, space.n)
    b = _digits(idx % space.dim_B, space.d_B, space.n)
    symbols = a * space.d_B + b
    hist = np.stack([(symbols == s).sum(axis=1) for s in range(d)], axis=1)
    return np.all(hist == np.array(counts), axis=1)


def typeclass_projector(
    space: TensorSpace, counts: Sequence[int], basis: np.ndarray | None = None
) -> np.ndarray:
    """Projector onto H_t, spanned by words of type ``counts`` in the single-copy ``basis``.

    ``basis`` holds the single-copy vectors as columns (e.g. eigenvectors of
    rho_AB); the default is the computational basis.
    """
    space.require_dense()
    diag = typeclass_mask(space, counts).astype(float)
    if basis is None:
        return np.diag(diag)
    u = tensor_power_unitary(basis, space)
    return (u * diag) @ u.conj().T


def tensor_power_unitary(u: np.ndarray, space: TensorSpace) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for _ in range(space.n):
        out = np.kron(out, u)
    if space.n > 1 and space.d_A > 1 and space.d_B > 1:
        out = interleaved_to_a_first(out, space.d_A, space.d_B, space.n)
    return out


# --------------------------------------------------------------------------
# serialization of central projector sets

MAGIC = b"SWTP"
FORMAT_VERSION = 1
_KIND_CODES = {ActionKind.A: 0, ActionKind.B: 1, ActionKind.AB: 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


class SerializationError(ValueError):
    pass


def checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def serialize_projectors(
    kind: ActionKind | str, d_A: int, d_B: int, n: int, projs: Sequence[CentralProjector]
) -> bytes:
    """Binary form: header, frame metadata, complex matrices (re, im little-endian), 64-bit checksum."""
    kind = ActionKind(kind)
    if kind not in _KIND_CODES:
        raise SerializationError(f"cannot serialize kind {kind}")
    parts = [MAGIC, struct.pack("<HBHHHI", FORMAT_VERSION, _KIND_CODES[kind], d_A, d_B, n, len(projs))]
    dim = projs[0].matrix.shape[0] if projs else 0
    for p in projs:
        parts.append(struct.pack("<B", p.frame.rows))
        parts.append(struct.pack(f"<{p.frame.rows}H", *p.frame.parts))
        parts.append(struct.pack("<Q", p.multiplicity))
    parts.append(struct.pack("<I", dim))
    for p in projs:
        m = np.asarray(p.matrix, dtype=np.complex128)
        parts.append(m.astype("<c16").tobytes(order="C"))
    payload = b"".join(parts)
    return payload + checksum(payload)


def deserialize_projectors(blob: bytes) -> tuple[tuple[ActionKind, int, int, int], list[CentralProjector]]:
    if len(blob) < 8 + len(MAGIC):
        raise SerializationError("truncated projector file")
    payload, digest = blob[:-8], blob[-8:]
    if checksum(payload) != digest:
        raise SerializationError("checksum mismatch in projector file")
    if payload[:4] != MAGIC:
        raise SerializationError("bad magic in projector file")
    off = 4
    version, code, d_A, d_B, n, count = struct.unpack_from("<HBHHHI", payload, off)
    off += struct.calcsize("<HBHHHI")
    if version != FORMAT_VERSION:
        raise SerializationError(f"unsupported format version {version}")
    kind = _CODE_KINDS[code]
    meta = []
    for _ in range(count):
        (rows,) = struct.unpack_from("<B", payload, off)
        off += 1
        frame_parts = struct.unpack_from(f"<{rows}H", payload, off)
        off += 2 * rows
        (mult,) = struct.unpack_from("<Q", payload, off)
        off += 8
        meta.append((YoungFrame(frame_parts), mult))
    (dim,) = struct.unpack_from("<I", payload, off)
    off += 4
    projs = []
    size = dim * dim * 16
    for frame, mult in meta:
        m = np.frombuffer(payload, dtype="<c16", count=dim * dim, offset=off).reshape(dim, dim)
        off += size
        mat = m.real.copy() if not np.any(m.imag) else m.astype(np.complex128)
        projs.append(CentralProjector(kind, frame, mat, int(mult)))
    if off != len(payload):
        raise SerializationError("trailing bytes in projector file")
    return (kind, d_A, d_B, n), projs


def tensor_space_dims(kind: ActionKind, space: TensorSpace) -> tuple[int, int]:
    """(d_A, d_B) header fields for a kind's projector set."""
    if kind is ActionKind.A:
        return space.d_A, 0
    if kind is ActionKind.B:
        return space.d_B, 0
    return space.d_A, space.d_B


def total_trace(projs: Iterable[CentralProjector]) -> int:
    return sum(p.multiplicity * p.dim_irrep for p in projs)

