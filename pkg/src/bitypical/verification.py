"""Module-level invariant suites run by ``bitypical verify``.

Every suite returns a list of ExactCheck records and never raises on a
failed check. Brute-force counters here are deliberately naive so they can
serve as independent references for the closed-form routines.
"""
from __future__ import annotations

import itertools
from math import factorial, prod
from typing import Iterator, Sequence

import numpy as np

from . import bounds
from .partitions import (
    YoungFrame,
    count_types,
    dim_irrep,
    enumerate_frames,
    enumerate_types,
    typeclass_size,
)
from .projectors import (
    central_projectors,
    matrix_unit_residuals,
    members_by_parent,
    refinement,
    symmetrizer_overlap,
)
from .symgroup import (
    Permutation,
    character,
    character_table,
    check_table,
    class_size,
    iterate_group,
)
from .tensorspace import (
    ActionKind,
    TensorSpace,
    operator_norm,
    permutation_operator,
    random_density,
    spectrum,
    tensor_power,
)
from .typicality import ExactCheck, check_le, units_for, worst

PROBE_DIM = 1024
PROBES = 8


# --------------------------------------------------------------------------
# brute-force references


def brute_partitions(n: int, max_rows: int) -> list[tuple[int, ...]]:
    """Non-increasing tuples summing to n, found by filtering all compositions."""
    out = set()
    for rows in range(1, min(n, max_rows) + 1):
        for combo in itertools.product(range(1, n + 1), repeat=rows):
            if sum(combo) == n and all(a >= b for a, b in zip(combo, combo[1:])):
                out.add(combo)
    return sorted(out, reverse=True)


def count_standard_tableaux(parts: Sequence[int]) -> int:
    """Number of standard fillings, by removing the largest entry from each corner."""
    parts = tuple(p for p in parts if p > 0)
    if sum(parts) <= 1:
        return 1
    total = 0
    for i, p in enumerate(parts):
        nxt = parts[i + 1] if i + 1 < len(parts) else 0
        if p > nxt:
            total += count_standard_tableaux(parts[:i] + (p - 1,) + parts[i + 1 :])
    return total


def power_sum_trace(frame: YoungFrame, r: Sequence[float]) -> float:
    """tr{P_frame rho^{(x)n}} from the character sum with tr{B(sigma) rho^{(x)n}} = prod_cycles p_k(r)."""
    r = np.asarray(r, dtype=float)
    n = frame.n
    total = 0.0
    for c in enumerate_frames(n, n):
        c = YoungFrame(c.parts)
        total += class_size(c) * character(frame, c) * prod(float((r**k).sum()) for k in c.parts)
    return dim_irrep(frame) * total / factorial(n)


# --------------------------------------------------------------------------
# helpers


def _probe(dim: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((dim, PROBES))


def _idempotency(m: np.ndarray) -> float:
    if m.shape[0] <= PROBE_DIM:
        return operator_norm(m @ m - m)
    v = _probe(m.shape[0])
    mv = m @ v
    return float(np.linalg.norm(m @ mv - mv, 2) / np.linalg.norm(v, 2))


def _generators(n: int) -> Iterator[Permutation]:
    """Adjacent transpositions and the long cycle generate S_n."""
    for k in range(n - 1):
        images = list(range(n))
        images[k], images[k + 1] = images[k + 1], images[k]
        yield Permutation(tuple(images))
    yield Permutation(tuple((i + 1) % n for i in range(n)))


# --------------------------------------------------------------------------
# suites


def partitions_suite(d: int, n: int) -> list[ExactCheck]:
    frames = [f.parts for f in enumerate_frames(d, n)]
    brute = brute_partitions(n, d)
    out = [ExactCheck("partitions.enumeration", float(frames != brute), 0.0, {"d": d, "n": n, "count": len(frames)})]
    if n <= 7:
        bad = [f for f in frames if count_standard_tableaux(f) != dim_irrep(YoungFrame(f))]
        out.append(ExactCheck("partitions.hook_formula", float(len(bad)), 0.0, {"n": n, "bad": [list(b) for b in bad]}))
    types = list(enumerate_types(d, n))
    out.append(ExactCheck("partitions.type_count", float(abs(len(types) - count_types(d, n))), 0.0, {"d": d, "n": n}))
    out.append(ExactCheck("partitions.typeclass_sizes", float(abs(sum(typeclass_size(t) for t in types) - d**n)), 0.0, {"d": d, "n": n}))
    sandwich = []
    for f in enumerate_frames(d, n):
        db = bounds.dim_bounds(f, d, n)
        sandwich.append(ExactCheck("bounds.dim_sandwich", 0.0 if db.ordered() else 1.0, 0.0, {"frame": str(f)}))
    out.append(worst("bounds.dim_sandwich", sandwich, d=d, n=n))
    return out


def symgroup_suite(n: int) -> list[ExactCheck]:
    table = character_table(n)
    try:
        check_table(table)
        residual, msg = 0.0, ""
    except AssertionError as err:
        residual, msg = 1.0, str(err)
    out = [ExactCheck("symgroup.character_table", residual, 0.0, {"n": n, "error": msg})]
    if n <= 6:
        # homomorphism of the sign and cycle-type class function
        bad = 0
        perms = list(iterate_group(n))
        rng = np.random.default_rng(n)
        for _ in range(50):
            a, b = perms[rng.integers(len(perms))], perms[rng.integers(len(perms))]
            bad += (a @ b).sign() != a.sign() * b.sign()
        out.append(ExactCheck("symgroup.sign_homomorphism", float(bad), 0.0, {"n": n}))
    return out


def character_oracle_suite(n: int, *, dense_cap: int | None = None) -> list[ExactCheck]:
    """chi_frame(sigma) = tr{P_frame B(sigma)} / m_frame on (C^n)^{(x)n}, where every frame occurs."""
    space = TensorSpace(n, 1, n) if dense_cap is None else TensorSpace(n, 1, n, dense_cap)
    projs = central_projectors(space, ActionKind.A)
    checks = []
    for c in enumerate_frames(n, n):
        c = YoungFrame(c.parts)
        # a representative with cycle type c: consecutive cycles
        images, start = list(range(n)), 0
        for k in c.parts:
            for j in range(k):
                images[start + j] = start + (j + 1) % k
            start += k
        src = permutation_operator(space, ActionKind.A, Permutation(tuple(images)), native=True).source
        for f, p in projs.items():
            trace = float(p.matrix[src, np.arange(len(src))].sum())
            checks.append(ExactCheck("symgroup.character_oracle", abs(trace / p.multiplicity - character(f, c)), 1e-9, {"frame": str(f), "class": str(c)}))
    return [worst("symgroup.character_oracle", checks, n=n)]


def operator_suite(space: TensorSpace, kind: ActionKind) -> list[ExactCheck]:
    """Completeness, orthogonality, idempotency and equivariance of one central projector set."""
    kind = ActionKind(kind)
    projs = central_projectors(space, kind)
    dim = space.native_dim(kind)
    tag = f"projectors.{kind.value}"
    ctx = {"d_A": space.d_A, "d_B": space.d_B, "n": space.n}
    total = sum(p.matrix for p in projs.values())
    out = [ExactCheck(f"{tag}.completeness", float(np.max(np.abs(total - np.eye(dim)))), 1e-9, ctx)]
    out.append(ExactCheck(
        f"{tag}.schur_weyl_accounting",
        float(abs(sum(p.multiplicity * p.dim_irrep for p in projs.values()) - dim)),
        0.0, {**ctx, "dim": dim},
    ))
    frac = max(
        abs(float(np.trace(p.matrix)) / p.dim_irrep - round(float(np.trace(p.matrix)) / p.dim_irrep))
        for p in projs.values()
    )
    out.append(ExactCheck(f"{tag}.integer_multiplicities", frac, 1e-6, ctx))
    out.append(worst(f"{tag}.idempotent", [ExactCheck(f"{tag}.idempotent", _idempotency(p.matrix), 1e-9, {"frame": str(f)}) for f, p in projs.items()]))
    out.append(worst(f"{tag}.hermitian", [
        ExactCheck(f"{tag}.hermitian", float(np.max(np.abs(p.matrix - p.matrix.conj().T))), 1e-12, {"frame": str(f)})
        for f, p in projs.items()
    ]))
    # tr{P Q} = 0 for positive P, Q forces P Q = 0
    ortho = [
        ExactCheck(f"{tag}.orthogonal", abs(float(np.vdot(p.matrix, q.matrix).real)), 1e-8, {"pair": [str(f), str(g)]})
        for (f, p), (g, q) in itertools.combinations(projs.items(), 2)
    ]
    out.append(worst(f"{tag}.orthogonal", ortho))
    comm = []
    for sigma in _generators(space.n):
        op = permutation_operator(space, kind, sigma, native=kind is not ActionKind.AB)
        for f, p in projs.items():
            comm.append(ExactCheck(f"{tag}.commutes_with_action", float(np.max(np.abs(op.conjugate(p.matrix) - p.matrix))), 1e-10, {"frame": str(f)}))
    out.append(worst(f"{tag}.commutes_with_action", comm))
    return out


def unitary_commutation_suite(space: TensorSpace, kind: ActionKind, seed: int = 0) -> list[ExactCheck]:
    """P_frame commutes with U^{(x)n} for a random local unitary U (the other half of the duality)."""
    kind = ActionKind(kind)
    d = space.local_dim(kind)
    rho = random_density(d, seed)
    _, u = np.linalg.eigh(rho)
    dims = None if kind is not ActionKind.AB else (space.d_A, space.d_B)
    big = tensor_power(u, space.n, dims, dense_cap=space.dense_cap)
    checks = []
    for f, p in central_projectors(space, kind).items():
        if big.shape[0] <= PROBE_DIM:
            res = operator_norm(big @ p.matrix - p.matrix @ big)
        else:
            v = _probe(big.shape[0], seed)
            res = float(np.linalg.norm(big @ (p.matrix @ v) - p.matrix @ (big @ v), 2) / np.linalg.norm(v, 2))
        checks.append(ExactCheck(f"projectors.{kind.value}.commutes_with_unitary", res, 1e-9, {"frame": str(f)}))
    return [worst(f"projectors.{kind.value}.commutes_with_unitary", checks)]


def refinement_suite(space: TensorSpace, seed: int = 0) -> list[ExactCheck]:
    """Parent resolution, rank, domination, orthogonality and matrix-unit relations."""
    pa = central_projectors(space, ActionKind.A)
    pb = central_projectors(space, ActionKind.B)
    pab = central_projectors(space, ActionKind.AB)
    refined = refinement(space, seed)
    units = units_for(space, seed)
    resolution, rank, dom, ortho, complete, comm, mu_res = [], [], [], [], [], [], []
    for frame, rs in refined.items():
        f = dim_irrep(frame)
        p_lam = pab[frame].matrix
        groups = members_by_parent(rs)
        for mu, nu in itertools.product(pa, pb):
            target = np.kron(pa[mu].matrix, pb[nu].matrix) @ p_lam
            got = sum((r.matrix for r in groups.get((mu, nu), [])), np.zeros_like(p_lam, dtype=complex))
            resolution.append(ExactCheck("refinement.parent_resolution", operator_norm(got - target), 1e-8, {"frame": str(frame), "parent": [str(mu), str(nu)]}))
        for r in rs:
            rank.append(ExactCheck("refinement.rank", abs(float(np.trace(r.matrix).real) - f), 1e-8, {"frame": str(frame), "i": r.index}))
            parent = np.kron(pa[r.parent[0]].matrix, pb[r.parent[1]].matrix)
            dom.append(ExactCheck("refinement.dominated", operator_norm(parent @ r.matrix - r.matrix), 1e-8, {"frame": str(frame), "i": r.index}))
        basis = np.concatenate([r.basis for r in rs], axis=1) if rs else np.zeros((space.dim, 0))
        gram = basis.conj().T @ basis
        ortho.append(ExactCheck("refinement.orthogonal", operator_norm(gram - np.eye(gram.shape[0])), 1e-8, {"frame": str(frame)}))
        complete.append(ExactCheck("refinement.completeness", operator_norm(basis @ basis.conj().T - p_lam), 1e-8, {"frame": str(frame), "m": len(rs)}))
        for sigma in _generators(space.n):
            op = permutation_operator(space, ActionKind.AB, sigma)
            for r in rs:
                comm.append(ExactCheck("refinement.commutes_with_action", float(np.max(np.abs(op.conjugate(r.matrix) - r.matrix))), 1e-8, {"frame": str(frame), "i": r.index}))
        res = matrix_unit_residuals(units[frame], rs)
        mu_res.append(ExactCheck("refinement.matrix_units", max(res.values()), 1e-8, {"frame": str(frame), **res}))
    names = ["parent_resolution", "rank", "dominated", "orthogonal", "completeness", "commutes_with_action", "matrix_units"]
    groups = [resolution, rank, dom, ortho, complete, comm, mu_res]
    return [worst(f"refinement.{name}", g, d_A=space.d_A, d_B=space.d_B, n=space.n) for name, g in zip(names, groups)]


def keyl_werner_suite(d: int, n: int, states: int = 20, seed: int = 0, *, dense_cap: int | None = None) -> list[ExactCheck]:
    """Keyl-Werner for the single-system action on random states, plus the power-sum cross-check.

    Traces are dense vdot's up to PROBE_DIM; beyond that the state is
    diagonalized first (P_frame commutes with U^{(x)n}), so only the diagonal
    of P_frame is needed.
    """
    space = TensorSpace(d, 1, n) if dense_cap is None else TensorSpace(d, 1, n, dense_cap)
    projs = central_projectors(space, ActionKind.A)
    kw, cross = [], []
    for s in range(states):
        rho = random_density(d, seed + s)
        r = spectrum(rho)
        if space.dim_A <= PROBE_DIM:
            power = tensor_power(rho, n, dense_cap=space.dense_cap)
            traces = {f: float(np.vdot(p.matrix, power).real) for f, p in projs.items()}
        else:
            diag = _kron_vector(r, n)
            traces = {f: float(np.diagonal(p.matrix) @ diag) for f, p in projs.items()}
        for f, t in traces.items():
            kw.append(check_le("keyl_werner.single", t, bounds.keyl_werner_rhs(f, r, n, d), frame=str(f), state=seed + s))
            cross.append(ExactCheck("keyl_werner.power_sum", abs(t - power_sum_trace(f, r)), 1e-10, {"frame": str(f), "state": seed + s}))
    return [worst("keyl_werner.single", kw, d=d, n=n, states=states), worst("keyl_werner.power_sum", cross, d=d, n=n)]


def _kron_vector(r: np.ndarray, n: int) -> np.ndarray:
    out = np.ones(1)
    for _ in range(n):
        out = np.kron(out, r)
    return out


def symmetrizer_suite(n_max: int = 5) -> list[ExactCheck]:
    """<v, B(E_T) v> = prod lambda_i! on the canonical word, in integer arithmetic."""
    checks = []
    for n in range(1, n_max + 1):
        for f in enumerate_frames(n, n):
            f = YoungFrame(f.parts)
            got = symmetrizer_overlap(f)
            want = prod(factorial(p) for p in f.parts)
            checks.append(ExactCheck("lemma3.symmetrizer_overlap", float(abs(got - want)), 0.0, {"frame": str(f), "got": got, "want": want}))
    return [worst("lemma3.symmetrizer_overlap", checks, n_max=n_max)]


def single_system_suite(d: int, n: int, states: int = 20, seed: int = 0, *, dense_cap: int | None = None) -> list[ExactCheck]:
    space = TensorSpace(d, 1, n) if dense_cap is None else TensorSpace(d, 1, n, dense_cap)
    out = partitions_suite(d, n)
    out += operator_suite(space, ActionKind.A)
    out += unitary_commutation_suite(space, ActionKind.A, seed)
    out += keyl_werner_suite(d, n, states, seed, dense_cap=dense_cap)
    return [_tag(c, d=d, n=n) for c in out]


def bipartite_suite(space: TensorSpace, seed: int = 0) -> list[ExactCheck]:
    out = []
    for kind in (ActionKind.A, ActionKind.B, ActionKind.AB):
        out += operator_suite(space, kind)
    out += unitary_commutation_suite(space, ActionKind.AB, seed)
    out += refinement_suite(space, seed)
    return out


def _tag(check: ExactCheck, **ctx) -> ExactCheck:
    check.details = {**ctx, **check.details}
    return check
