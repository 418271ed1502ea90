"""The bipartite typicality state Phi and every check made on it.

Inequalities that can be proved step by step at finite n are *exact checks*
(pass/fail with a residual). Inequalities that rely on the gamma_1 dimension
estimate only hold for n beyond an unspecified threshold; they become
*margin entries*, which report log2 slack and never pass or fail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import bounds
from .partitions import (
    YoungFrame,
    dim_irrep,
    downsort,
    enumerate_types,
    normalized_profile,
    profile_distance,
)
from .projectors import (
    MatrixUnitFamily,
    RefinedProjector,
    TypicalProjector,
    central_projectors,
    commutant_coefficients,
    matrix_unit_residuals,
    matrix_units,
    reconstruct,
    refinement,
    typeclass_projector,
    typical_projector,
)
from .tensorspace import (
    ActionKind,
    TensorSpace,
    marginals,
    operator_norm,
    partial_trace_A,
    partial_trace_B,
    tensor_power,
    trace_norm,
    validate_density,
)

COMMUTATOR_TOL = 1e-9
IDENTITY_TOL = 1e-8
INEQ_RTOL = 1e-9
INEQ_ATOL = 1e-12


@dataclass
class ExactCheck:
    name: str
    residual: float
    tolerance: float
    passed: bool = field(init=False)
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.passed = bool(self.residual <= self.tolerance)


@dataclass
class MarginEntry:
    """One evaluated inequality. ``direction`` is "le" (lhs <= rhs) or "ge".

    ``log2_margin`` is positive when the inequality holds with room to spare.
    """

    id: str
    lhs: float
    rhs: float
    direction: str
    hypothesis_met: bool
    empty: bool = False
    details: dict[str, Any] = field(default_factory=dict)
    log2_rhs: float | None = None  # exact log of rhs where rhs itself under/overflows

    @property
    def log2_margin(self) -> float:
        if self.empty:
            return -math.inf
        return log2_margin(self.lhs, self.rhs, self.direction, self.log2_rhs)


def _log2(x: float) -> float:
    # non-positive bounds count as -inf: a "ge" bound below zero holds trivially
    if math.isnan(x):
        return math.nan
    return math.log2(x) if x > 0 else -math.inf


def log2_margin(lhs: float, rhs: float, direction: str, log2_rhs: float | None = None) -> float:
    lr = _log2(rhs) if log2_rhs is None else log2_rhs
    ll = _log2(lhs)
    if math.isnan(lr) or math.isnan(ll):
        return math.nan
    if math.isinf(lr) and lr == ll:
        return 0.0
    return lr - ll if direction == "le" else ll - lr


def check_le(name: str, lhs: float, rhs: float, *, rtol: float = INEQ_RTOL, atol: float = INEQ_ATOL, **details) -> ExactCheck:
    return ExactCheck(
        name,
        residual=max(0.0, float(lhs) - float(rhs)),
        tolerance=atol + rtol * abs(float(rhs)),
        details={"lhs": float(lhs), "rhs": float(rhs), **details},
    )


def worst(name: str, checks: Sequence[ExactCheck], **details) -> ExactCheck:
    """Collapse many instances of one check into the instance with the largest excess."""
    if not checks:
        return ExactCheck(name, 0.0, 0.0, details={"instances": 0, **details})
    top = max(checks, key=lambda c: c.residual - c.tolerance)
    out = ExactCheck(name, top.residual, top.tolerance, details={**top.details, **details})
    out.details["instances"] = len(checks)
    out.details["violations"] = sum(not c.passed for c in checks)
    return out


# --------------------------------------------------------------------------
# Phi


@dataclass(eq=False)
class PhiState:
    ctx: bounds.BoundContext
    space: TensorSpace
    rho: np.ndarray
    rho_power: np.ndarray
    rho_A: np.ndarray
    rho_B: np.ndarray
    p_A: TypicalProjector
    p_B: TypicalProjector
    p_AB: TypicalProjector
    product: np.ndarray  # P_eps^A (x) P_eps^B on the full space
    q: np.ndarray  # product @ P_delta^AB
    phi: np.ndarray
    traces: dict[str, float]

    @property
    def empty(self) -> bool:
        return self.traces["trace"] <= 1e-15


def build_phi(
    rho_AB: np.ndarray,
    d_A: int,
    d_B: int,
    n: int,
    eps: float,
    delta: float,
    *,
    dense_cap: int | None = None,
) -> PhiState:
    """Phi = (P_eps^A (x) P_eps^B) P_delta^AB rho^{(x)n} (P_eps^A (x) P_eps^B)."""
    if eps < 0 or delta < 0:
        raise ValueError(f"radii must be non-negative, got eps={eps}, delta={delta}")
    space = TensorSpace(d_A, d_B, n) if dense_cap is None else TensorSpace(d_A, d_B, n, dense_cap)
    space.require_dense()
    rho = validate_density(rho_AB)
    marg = marginals(rho, d_A, d_B)
    ctx = bounds.BoundContext(d_A, d_B, n, marg.r, marg.r_A, marg.r_B, float(eps), float(delta))
    rho_power = tensor_power(rho, n, (d_A, d_B), dense_cap=space.dense_cap)
    p_A = typical_projector(space, ActionKind.A, marg.r_A, eps)
    p_B = typical_projector(space, ActionKind.B, marg.r_B, eps)
    p_AB = typical_projector(space, ActionKind.AB, marg.r, delta)
    product = np.kron(p_A.matrix, p_B.matrix)
    q = product @ p_AB.matrix
    phi = q @ rho_power @ product
    phi = (phi + phi.conj().T) / 2
    reduced = partial_trace_B(phi, space)
    traces = {
        "trace": float(np.trace(phi).real),
        "purity": float(np.vdot(phi, phi).real),
        "marginal_purity": float(np.vdot(reduced, reduced).real),
        "trace_distance": trace_norm(phi - rho_power),
    }
    return PhiState(ctx, space, rho, rho_power, marg.rho_A, marg.rho_B, p_A, p_B, p_AB, product, q, phi, traces)


def _sandwich(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = p @ x @ p
    return (out + out.conj().T) / 2


# --------------------------------------------------------------------------
# refined data shared by Lemma 2 style computations


@dataclass(eq=False)
class FrameData:
    """Per-frame quantities of one state: traces over refined copies and c."""

    frame: YoungFrame
    refined: list[RefinedProjector]
    units: MatrixUnitFamily
    pair_traces: np.ndarray  # L_ij = tr{P_i rho P_j rho}
    copy_traces: np.ndarray  # t_i = tr{P_i rho}
    c: np.ndarray

    @property
    def dim_irrep(self) -> int:
        return dim_irrep(self.frame)


_UNITS: dict[tuple, dict[YoungFrame, MatrixUnitFamily]] = {}


def units_for(space: TensorSpace, seed: int = 0) -> dict[YoungFrame, MatrixUnitFamily]:
    key = (space, seed)
    if key not in _UNITS:
        _UNITS[key] = {f: matrix_units(space, f, rs, seed) for f, rs in refinement(space, seed).items()}
    return _UNITS[key]


def frame_data(state: PhiState, seed: int = 0) -> dict[YoungFrame, FrameData]:
    space = state.space
    refined = refinement(space, seed)
    units = units_for(space, seed)
    rho = state.rho_power
    out = {}
    for frame, rs in refined.items():
        f = dim_irrep(frame)
        m = len(rs)
        basis = np.concatenate([r.basis for r in rs], axis=1)
        blocks = (basis.conj().T @ rho @ basis).reshape(m, f, m, f)
        pair = np.einsum("iajb,iajb->ij", blocks, blocks.conj()).real
        copy = np.einsum("iaia->i", blocks).real
        p_rho = central_projectors(space, ActionKind.AB)[frame].matrix @ rho
        c = commutant_coefficients(units[frame], p_rho)
        out[frame] = FrameData(frame, rs, units[frame], pair, copy, c)
    return out


# --------------------------------------------------------------------------
# exact suite


def exact_suite(state: PhiState, seed: int = 0, data: dict[YoungFrame, FrameData] | None = None) -> list[ExactCheck]:
    """Every finite-n identity and inequality about Phi and its ingredients.

    Never aborts on a failed check; failures are recorded with their operands.
    """
    space, ctx = state.space, state.ctx
    rho = state.rho_power
    data = frame_data(state, seed) if data is None else data
    p_ab = state.p_AB.matrix
    checks: list[ExactCheck] = []

    # commutation and the shape of Phi
    checks.append(ExactCheck("commutation.commutes_with_product", operator_norm(p_ab @ state.product - state.product @ p_ab), COMMUTATOR_TOL))
    checks.append(ExactCheck("commutation.commutes_with_state", operator_norm(p_ab @ rho - rho @ p_ab), COMMUTATOR_TOL))
    q = state.q
    checks.append(ExactCheck("phi.q_is_projector", max(operator_norm(q @ q - q), operator_norm(q - q.conj().T)), IDENTITY_TOL))
    checks.append(ExactCheck("phi.two_sided_sandwich", operator_norm(state.phi - _sandwich(q, rho)), COMMUTATOR_TOL))
    tr_phi = state.traces["trace"]
    checks.append(ExactCheck("phi.trace_in_unit_interval", max(0.0, -tr_phi, tr_phi - 1.0), 1e-12, {"trace": tr_phi}))

    # gentle measurement, for Phi and for the product-only sandwich
    checks.append(check_le("gentle.phi", state.traces["trace_distance"], 2 * math.sqrt(max(0.0, 1 - tr_phi))))
    psi = _sandwich(state.product, rho)
    tr_psi = float(np.trace(psi).real)
    checks.append(check_le("gentle.product", trace_norm(psi - rho), 2 * math.sqrt(max(0.0, 1 - tr_psi))))

    # Hilbert-Schmidt contraction chain
    rho_sq_power = rho @ rho
    qr2 = float(np.trace(q @ rho_sq_power).real)
    checks.append(check_le("collision.sandwich_contracts", state.traces["purity"], qr2))
    checks.append(check_le("collision.projection_contracts", qr2, float(np.trace(rho_sq_power).real)))

    # Keyl-Werner for the three actions on this state
    for kind, s, d, dim_rho in (
        (ActionKind.AB, ctx.r, ctx.d, rho),
        (ActionKind.A, ctx.r_A, ctx.d_A, None),
        (ActionKind.B, ctx.r_B, ctx.d_B, None),
    ):
        if dim_rho is None:
            local = state.rho_A if kind is ActionKind.A else state.rho_B
            dim_rho = tensor_power(local, space.n, dense_cap=space.dense_cap)
        inst = []
        for frame, cp in central_projectors(space, kind).items():
            lhs = float(np.vdot(cp.matrix, dim_rho).real)
            inst.append(check_le(f"keyl_werner.{kind.value}", lhs, bounds.keyl_werner_rhs(frame, s, space.n, d), frame=str(frame)))
        checks.append(worst(f"keyl_werner.{kind.value}", inst))

    # Lemma 2 skeleton
    unit_res, herm, minors, diag_formula, recon, sandwich, pair_identity = [], [], [], [], [], [], []
    for frame, fd in data.items():
        f = fd.dim_irrep
        res = matrix_unit_residuals(fd.units, fd.refined)
        unit_res.append(ExactCheck("lemma2.matrix_units", max(res.values()), IDENTITY_TOL, {"frame": str(frame), **res}))
        c = fd.c
        herm.append(ExactCheck("lemma2.c_hermitian", float(np.max(np.abs(c - c.conj().T), initial=0.0)), 1e-10, {"frame": str(frame)}))
        diag = np.real(np.diag(c))
        minor_slack = np.outer(diag, diag) - np.abs(c) ** 2
        minors.append(ExactCheck("lemma2.c_minors", max(0.0, -float(minor_slack.min(initial=0.0))), 1e-10, {"frame": str(frame)}))
        diag_formula.append(ExactCheck("lemma2.c_diagonal", float(np.max(np.abs(diag - fd.copy_traces / f), initial=0.0)), 1e-10, {"frame": str(frame)}))
        p_rho = central_projectors(space, ActionKind.AB)[frame].matrix @ rho
        recon.append(ExactCheck("lemma2.reconstruction", operator_norm(reconstruct(fd.units, c) - p_rho), IDENTITY_TOL, {"frame": str(frame)}))
        bound_sandwich = np.outer(fd.copy_traces, fd.copy_traces) / f
        excess = fd.pair_traces - bound_sandwich
        i, j = np.unravel_index(np.argmax(excess - INEQ_RTOL * np.abs(bound_sandwich)), excess.shape)
        sandwich.append(check_le("lemma2.sandwich_step", fd.pair_traces[i, j], bound_sandwich[i, j], frame=str(frame), i=int(i), j=int(j)))
        sandwich[-1].details["violations"] = int(np.sum(excess > INEQ_ATOL + INEQ_RTOL * np.abs(bound_sandwich)))
        pair_identity.append(ExactCheck("lemma2.pair_trace_identity", float(np.max(np.abs(fd.pair_traces - np.abs(c) ** 2 * f), initial=0.0)), IDENTITY_TOL, {"frame": str(frame)}))
    for name, group in (
        ("lemma2.matrix_units", unit_res),
        ("lemma2.c_hermitian", herm),
        ("lemma2.c_minors", minors),
        ("lemma2.c_diagonal", diag_formula),
        ("lemma2.reconstruction", recon),
        ("lemma2.sandwich_step", sandwich),
        ("lemma2.pair_trace_identity", pair_identity),
    ):
        checks.append(worst(name, group))

    checks.append(worst("lemma4", lemma4_checks(state)))
    checks.append(worst("lemma3.containment", lemma3_checks(state)))

    checks.extend(marginal_chain_checks(state))
    checks.extend(set_partition_E(state, data).checks)
    checks.extend(lemma2_bound_report(state, data).checks)
    return sorted(checks, key=lambda c: c.name)


def lemma4_checks(state: PhiState) -> list[ExactCheck]:
    """dim F_lambda prod_j r_j^{2 lambda_j} <= tr{P_lambda (rho^2)^{(x)n}} for every lambda."""
    ctx, space = state.ctx, state.space
    rho_sq_power = state.rho_power @ state.rho_power
    out = []
    for frame, cp in central_projectors(space, ActionKind.AB).items():
        lhs = dim_irrep(frame) * math.prod(float(r) ** (2 * p) for r, p in zip(ctx.r, frame.padded(ctx.d)))
        rhs = float(np.vdot(cp.matrix, rho_sq_power).real)
        # lower bound: assert lhs <= rhs
        out.append(check_le("lemma4", lhs, rhs, frame=str(frame)))
    return out


def lemma3_checks(state: PhiState) -> list[ExactCheck]:
    """For every type N: tr{P_{N_down} p_{H_t}} >= dim F_{N_down}, in the eigenbasis of rho_AB."""
    space, ctx = state.space, state.ctx
    _, vecs = np.linalg.eigh(state.rho)
    basis = vecs[:, ::-1]
    projs = central_projectors(space, ActionKind.AB)
    out = []
    for counts in enumerate_types(ctx.d, space.n):
        frame = downsort(counts)
        t = typeclass_projector(space, counts, basis)
        overlap = float(np.vdot(projs[frame].matrix, t).real)
        out.append(check_le("lemma3.containment", dim_irrep(frame) - 1e-6, overlap, rtol=0.0, atol=0.0, type=list(counts)))
    return out


def marginal_chain_checks(state: PhiState) -> list[ExactCheck]:
    """tr{(tr_B Phi)^2} <= tr{(tr_B PsiP)^2} <= tr{P_A Y P_A rho_A} <= tr{(P_A rho_A^{(x)n})^2}."""
    space = state.space
    rho = state.rho_power
    p_a = state.p_A.matrix
    psi = _sandwich(state.product, rho)
    red_psi = partial_trace_B(psi, space)
    eye_a = np.eye(space.dim_A)
    b_only = _sandwich(np.kron(eye_a, state.p_B.matrix), rho)
    y = partial_trace_B(b_only, space)
    rho_a_power = partial_trace_B(rho, space)
    step_partial = float(np.vdot(red_psi, red_psi).real)
    step_local = float(np.trace(p_a @ y @ p_a @ rho_a_power).real)
    final = float(np.trace(p_a @ rho_a_power @ p_a @ rho_a_power).real)
    return [
        check_le("marginal.partial_trace_step", state.traces["marginal_purity"], step_partial),
        check_le("marginal.local_sandwich_step", step_partial, step_local),
        check_le("marginal.final", step_local, final),
        ExactCheck(
            "marginal.state_consistency",
            operator_norm(rho_a_power - tensor_power(state.rho_A, space.n, dense_cap=space.dense_cap)),
            1e-10,
        ),
    ]


# --------------------------------------------------------------------------
# sets A, B, AB, E and the quantity X


@dataclass
class PartitionE:
    A: list[tuple[YoungFrame, int]]
    B: list[tuple[YoungFrame, int]]
    AB: list[tuple[YoungFrame, int]]
    X: float
    X_decomposition: float
    X_double_sum: float
    checks: list[ExactCheck]

    @property
    def E(self) -> list[tuple[YoungFrame, int]]:
        return sorted(self.A + self.B + self.AB, key=lambda t: (t[0].parts, t[1]), reverse=False)


def set_partition_E(state: PhiState, data: dict[YoungFrame, FrameData]) -> PartitionE:
    """Classify refined copies with lambda in B_delta(r) by the typicality of their parents."""
    ctx = state.ctx
    sets: dict[str, list[tuple[YoungFrame, int]]] = {"A": [], "B": [], "AB": []}
    decomposition = 0.0
    double_sum = 0.0
    in_ball = set(state.p_AB.frames)
    bad_count = 0
    for frame, fd in data.items():
        if frame not in in_ball:
            continue
        atypical = np.zeros(len(fd.refined), dtype=bool)
        for r in fd.refined:
            mu, nu = r.parent
            far_a = profile_distance(normalized_profile(mu, ctx.d_A), ctx.r_A) > ctx.eps + 1e-12
            far_b = profile_distance(normalized_profile(nu, ctx.d_B), ctx.r_B) > ctx.eps + 1e-12
            if far_a or far_b:
                atypical[r.index] = True
                key = "AB" if far_a and far_b else ("A" if far_a else "B")
                sets[key].append((frame, r.index))
        bad_count += int(atypical.sum())
        either = atypical[:, None] | atypical[None, :]
        decomposition += float(fd.pair_traces[either].sum())
        double_sum += 2.0 * float(fd.pair_traces[atypical, :].sum())
    rho = state.rho_power
    total = float(np.trace(state.p_AB.matrix @ rho @ rho).real)
    qr = state.q @ rho
    kept = float(np.trace(qr @ qr).real)
    x = total - kept
    max_m = sum(len(data[f].refined) for f in in_ball if f in data)
    checks = [
        ExactCheck("theorem_proof.X_nonnegative", max(0.0, -x), 1e-9, {"X": x}),
        ExactCheck("theorem_proof.X_decomposition", abs(x - decomposition), 1e-9, {"X": x, "decomposition": decomposition}),
        check_le("theorem_proof.X_double_sum", x, double_sum),
        ExactCheck("theorem_proof.E_size", max(0, bad_count - max_m), 0, {"E": bad_count, "copies": max_m}),
    ]
    return PartitionE(sets["A"], sets["B"], sets["AB"], x, decomposition, double_sum, checks)


# --------------------------------------------------------------------------
# Lemma 2 bound report


@dataclass
class Lemma2Report:
    entries: list[MarginEntry]
    checks: list[ExactCheck]


def _kw_marginal(state: PhiState, side: str, frame: YoungFrame) -> tuple[float, float]:
    """(tr{P_frame rho_side^{(x)n}}, its Keyl-Werner bound)."""
    ctx, space = state.ctx, state.space
    kind = ActionKind.A if side == "A" else ActionKind.B
    local = state.rho_A if side == "A" else state.rho_B
    s = ctx.r_A if side == "A" else ctx.r_B
    d = ctx.d_A if side == "A" else ctx.d_B
    proj = central_projectors(space, kind)[YoungFrame(frame.parts)].matrix
    power = tensor_power(local, space.n, dense_cap=space.dense_cap)
    return float(np.vdot(proj, power).real), bounds.keyl_werner_rhs(frame, s, space.n, d)


def lemma2_bound_report(state: PhiState, data: dict[YoungFrame, FrameData], *, per_pair: bool = False) -> Lemma2Report:
    """Evaluate both Lemma 2 statements for every qualifying (lambda, i, j).

    Statement 1 is run under two radius assignments: "printed" (lambda within
    eps of r, parent farther than delta) and "applied" (lambda within delta,
    parent farther than eps), each for the A and the B parent. The finite-n
    chain through the sandwich step and Keyl-Werner is asserted per pair; the stated
    exponential bounds are margin entries. Unless ``per_pair``, one entry
    (the pair with the smallest margin) is kept per statement variant.
    """
    ctx, space = state.ctx, state.space
    n, d = space.n, ctx.d
    g = bounds.gammas(n, ctx.d_A, ctx.d_B, ctx.c1)
    h_r = bounds.entropy(ctx.r)
    hyp = bounds.gamma1_hypothesis(n, d)
    ab_projs = central_projectors(space, ActionKind.AB)
    entries: list[MarginEntry] = []
    chain: list[ExactCheck] = []

    def lam_info(frame: YoungFrame) -> tuple[float, float, float]:
        dist = profile_distance(normalized_profile(frame, d), ctx.r)
        tr_lam = float(np.vdot(ab_projs[frame].matrix, state.rho_power).real)
        return dist, tr_lam, bounds.keyl_werner_rhs(frame, ctx.r, n, d)

    kw_cache: dict[tuple[str, YoungFrame], tuple[float, float]] = {}
    parent_cache: dict[tuple[YoungFrame, YoungFrame], float] = {}

    def parent_trace(mu: YoungFrame, nu: YoungFrame) -> float:
        if (mu, nu) not in parent_cache:
            pa = central_projectors(space, ActionKind.A)[mu].matrix
            pb = central_projectors(space, ActionKind.B)[nu].matrix
            parent_cache[(mu, nu)] = float(np.vdot(np.kron(pa, pb), state.rho_power).real)
        return parent_cache[(mu, nu)]

    variants = []
    for assignment in ("printed", "applied"):
        lam_radius, parent_radius = (ctx.eps, ctx.delta) if assignment == "printed" else (ctx.delta, ctx.eps)
        for side in ("A", "B"):
            variants.append((assignment, side, lam_radius, parent_radius))

    for assignment, side, lam_radius, parent_radius in variants:
        if assignment == "printed":
            exponent = 2 * ctx.delta**2 + h_r + _xlogx_term(ctx.eps, d) - g.g2
        else:
            exponent = 2 * ctx.eps**2 + h_r + _xlogx_term(ctx.delta, d) - g.g2
        log_rhs = -n * exponent
        rhs = pow2(log_rhs)
        found: list[MarginEntry] = []
        for frame, fd in data.items():
            dist, tr_lam, kw_lam = lam_info(frame)
            inside = dist < lam_radius - 1e-12 if assignment == "printed" else dist <= lam_radius + 1e-12
            if not inside:
                continue
            f = fd.dim_irrep
            for r in fd.refined:
                parent = r.parent[0] if side == "A" else r.parent[1]
                s = ctx.r_A if side == "A" else ctx.r_B
                dl = ctx.d_A if side == "A" else ctx.d_B
                if profile_distance(normalized_profile(parent, dl), s) <= parent_radius + 1e-12:
                    continue
                key = (side, parent)
                if key not in kw_cache:
                    kw_cache[key] = _kw_marginal(state, side, parent)
                tr_parent_marg, kw_parent = kw_cache[key]
                tr_parent = parent_trace(*r.parent)
                i = r.index
                for j in range(len(fd.refined)):
                    lhs = float(fd.pair_traces[i, j])
                    step_sandwich = fd.copy_traces[i] * fd.copy_traces[j] / f
                    step_assume = tr_parent * tr_lam / f
                    step_marg = tr_parent_marg * tr_lam / f
                    step_kw = kw_parent * kw_lam / f
                    tag = dict(frame=str(frame), i=i, j=j, assignment=assignment, side=side)
                    chain.extend([
                        check_le("lemma2.s1.chain_sandwich", lhs, step_sandwich, **tag),
                        check_le("lemma2.s1.chain_parent", step_sandwich, step_assume, **tag),
                        check_le("lemma2.s1.chain_marginal", step_assume, step_marg, **tag),
                        check_le("lemma2.s1.chain_keyl_werner", step_marg, step_kw, **tag),
                    ])
                    found.append(MarginEntry(
                        "lemma2.s1", lhs, rhs, "le", hyp,
                        details={**tag, "n": n, "eps": ctx.eps, "delta": ctx.delta},
                        log2_rhs=log_rhs,
                    ))
        entries.extend(_collapse(found, "lemma2.s1", rhs, hyp, per_pair,
                                 dict(assignment=assignment, side=side, n=n, eps=ctx.eps, delta=ctx.delta)))

    found = []
    for frame, fd in data.items():
        dist, tr_lam, kw_lam = lam_info(frame)
        if dist <= ctx.eps + 1e-12:
            continue
        f = fd.dim_irrep
        lam_bar = normalized_profile(frame, d)
        log_rhs2 = -n * (4 * ctx.eps**2 + bounds.entropy(lam_bar) - g.g7)
        m = len(fd.refined)
        for i in range(m):
            for j in range(m):
                lhs = float(fd.pair_traces[i, j])
                step_sandwich = fd.copy_traces[i] * fd.copy_traces[j] / f
                tag = dict(frame=str(frame), i=i, j=j)
                chain.extend([
                    check_le("lemma2.s2.chain_sandwich", lhs, step_sandwich, **tag),
                    check_le("lemma2.s2.chain_central", step_sandwich, tr_lam**2 / f, **tag),
                    check_le("lemma2.s2.chain_keyl_werner", tr_lam**2 / f, kw_lam**2 / f, **tag),
                ])
                found.append(MarginEntry("lemma2.s2", lhs, pow2(log_rhs2), "le", hyp,
                                         details={**tag, "n": n, "eps": ctx.eps, "delta": ctx.delta},
                                         log2_rhs=log_rhs2))
    entries.extend(_collapse(found, "lemma2.s2", math.nan, hyp, per_pair,
                             dict(n=n, eps=ctx.eps, delta=ctx.delta)))

    names = sorted({c.name for c in chain}) or []
    checks = [worst(name, [c for c in chain if c.name == name]) for name in names]
    for name in ("lemma2.s1.chain_sandwich", "lemma2.s2.chain_sandwich"):
        if name not in names:
            checks.append(worst(name, []))
    return Lemma2Report(entries, checks)


def pow2(x: float) -> float:
    """2^x without OverflowError; huge exponents give inf."""
    return math.inf if x > 1023 else 2.0**x


def _log1m_pow2(x: float) -> float:
    """log2(1 - 2^x) for x <= 0; -inf at x = 0."""
    if x >= 0:
        return -math.inf if x == 0 else math.nan
    return math.log2(-math.expm1(x * bounds.LN2))


def _xlogx_term(x: float, d: int) -> float:
    """x log(x d) as it appears in the Lemma 2 exponent, with 0 log 0 = 0."""
    return x * math.log2(x * d) if x > 0 else 0.0


def _collapse(found: list[MarginEntry], ident: str, rhs: float, hyp: bool, per_pair: bool, details: dict) -> list[MarginEntry]:
    if per_pair:
        return found
    if not found:
        return [MarginEntry(ident, 0.0, rhs, "le", hyp, empty=True, details={**details, "pairs": 0})]
    top = min(found, key=lambda e: e.log2_margin)
    top.details["pairs"] = len(found)
    return [top]


# --------------------------------------------------------------------------
# theorem margins


def theorem_margins(state: PhiState) -> list[MarginEntry]:
    """One entry per displayed inequality of the main theorem plus the Corollary 1 bound."""
    ctx, space = state.ctx, state.space
    n = space.n
    rho = state.rho_power
    eps, delta = ctx.eps, ctx.delta
    g = bounds.gammas(n, ctx.d_A, ctx.d_B, ctx.c1, delta if delta > 0 else None, strict=False)
    gamma = g.gamma
    hyp = bounds.hypothesis_met(ctx)
    h_r = bounds.entropy(ctx.r)
    h_ra = bounds.entropy(ctx.r_A)
    mn = min(eps, delta)
    tr = state.traces
    empty = state.empty

    psi = _sandwich(state.product, rho)
    pr = state.product @ rho
    product_trace = float(np.trace(pr).real)
    product_purity = float(np.trace(pr @ pr).real)
    phi_val = g.phi if delta > 0 else 0.0

    common = {"n": n, "eps": eps, "delta": delta, "gamma": gamma}
    lg3 = math.log2(3)
    tail_eps = _log1m_pow2(-n * eps**2)
    tail_2eps = _log1m_pow2(-2 * n * eps**2)
    rows = [
        # id, lhs, log2 rhs (None when rhs is not a pure exponential), rhs, direction, empty-sensitive
        ("theorem.marginal_collision", tr["marginal_purity"], -n * (h_ra - gamma), None, "le", True),
        ("theorem.trace_distance", tr["trace_distance"], lg3 - n * (mn**2 + gamma / 2), None, "le", False),
        ("theorem.collision_lower", tr["purity"], -n * h_r - n * (phi_val + gamma) + tail_eps, None, "ge", True),
        ("theorem.collision_upper", tr["purity"], -n * (h_r - gamma), None, "le", True),
        ("theorem.trace", tr["trace"], None, 1 - pow2(-n * (2 * mn**2 + gamma)), "ge", True),
        ("theorem.product_trace_distance", trace_norm(psi - rho), lg3 - n * (eps**2 + gamma / 2), None, "le", False),
        ("theorem.product_collision", product_purity, -n * (h_r + gamma) + tail_2eps, None, "ge", False),
        ("theorem.product_trace", product_trace, None, 1 - pow2(-n * (2 * eps**2 + gamma)), "ge", False),
    ]
    out = []
    for ident, lhs, lrhs, rhs, direction, sensitive in rows:
        if lrhs is not None:
            rhs = pow2(lrhs)
        details = dict(common, phi=phi_val) if ident == "theorem.collision_lower" else dict(common)
        out.append(MarginEntry(ident, float(lhs), float(rhs), direction, hyp, sensitive and empty, details, lrhs))
    out.append(corollary1_entry(state))
    return out


def corollary1_value(state: PhiState) -> tuple[float, float]:
    """(tr{P_eps^AB rho P_eps^AB rho}, 2^{-n(H(r) + 2 eps c1 + eps log(d/eps))}) with radius eps."""
    ctx, space = state.ctx, state.space
    eps = ctx.eps
    p = typical_projector(space, ActionKind.AB, ctx.r, eps).matrix
    rho = state.rho_power
    pr = p @ rho
    lhs = float(np.trace(pr @ pr).real)
    extra = eps * math.log2(ctx.d / eps) if eps > 0 else 0.0
    return lhs, pow2(-space.n * (bounds.entropy(ctx.r) + 2 * eps * ctx.c1 + extra))


def corollary1_entry(state: PhiState) -> MarginEntry:
    lhs, rhs = corollary1_value(state)
    ctx = state.ctx
    hyp = bounds.gamma1_hypothesis(ctx.n, ctx.d) and 0 < ctx.eps <= 0.5
    return MarginEntry("corollary1.collision_lower", lhs, rhs, "ge", hyp, False,
                       {"n": ctx.n, "eps": ctx.eps, "delta": ctx.delta})


# --------------------------------------------------------------------------
# grid runs


@dataclass
class TypicalityReport:
    exact_checks: list[dict[str, Any]]
    margin_entries: list[dict[str, Any]]
    provenance: dict[str, Any]

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.exact_checks)


def check_record(check: ExactCheck, **context) -> dict[str, Any]:
    return {
        "name": check.name,
        **context,
        "residual": check.residual,
        "tolerance": check.tolerance,
        "pass": check.passed,
        "details": check.details,
    }


def margin_record(entry: MarginEntry, **context) -> dict[str, Any]:
    return {
        "id": entry.id,
        **context,
        "lhs": entry.lhs,
        "rhs": entry.rhs,
        "direction": entry.direction,
        "log2_margin": entry.log2_margin,
        "hypothesis_met": entry.hypothesis_met,
        "empty": entry.empty,
        "details": entry.details,
    }


def run_grid(
    rho_AB: np.ndarray,
    d_A: int,
    d_B: int,
    n: int,
    eps_list: Iterable[float],
    delta_list: Iterable[float],
    *,
    seed: int = 0,
    dense_cap: int | None = None,
    margins: bool = True,
) -> tuple[list[dict[str, Any]], list[dict[str, Any]]]:
    """Exact checks and margin entries over an (eps, delta) grid at one n.

    Grid points are visited in sorted order so reports are reproducible.
    """
    eps_list = sorted(set(float(e) for e in eps_list))
    delta_list = sorted(set(float(x) for x in delta_list))
    checks: list[dict[str, Any]] = []
    entries: list[dict[str, Any]] = []
    traces: dict[tuple[float, float], float] = {}
    data = None
    for eps in eps_list:
        for delta in delta_list:
            state = build_phi(rho_AB, d_A, d_B, n, eps, delta, dense_cap=dense_cap)
            if data is None:
                data = frame_data(state, seed)
            traces[(eps, delta)] = state.traces["trace"]
            ctx = {"n": n, "eps": eps, "delta": delta}
            for c in exact_suite(state, seed, data):
                checks.append(check_record(c, **ctx))
            if margins:
                for e in theorem_margins(state):
                    entries.append(margin_record(e, **ctx))
                for e in lemma2_bound_report(state, data).entries:
                    entries.append(margin_record(e, **ctx))
    checks.append(check_record(monotonicity_check(traces), n=n, eps=None, delta=None))
    return checks, entries


def monotonicity_check(traces: dict[tuple[float, float], float]) -> ExactCheck:
    """tr Phi is non-decreasing in eps and in delta across the grid."""
    eps_values = sorted({k[0] for k in traces})
    delta_values = sorted({k[1] for k in traces})
    drop = 0.0
    for e in eps_values:
        for a, b in zip(delta_values, delta_values[1:]):
            drop = max(drop, traces[(e, a)] - traces[(e, b)])
    for x in delta_values:
        for a, b in zip(eps_values, eps_values[1:]):
            drop = max(drop, traces[(a, x)] - traces[(b, x)])
    return ExactCheck("grid.trace_monotone", drop, 1e-10, {"points": len(traces)})
