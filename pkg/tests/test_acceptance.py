"""One group of tests per acceptance criterion.

Each test carries ``@pytest.mark.acceptance(k, title)``; the terminal summary
prints a PASS/FAIL line per criterion (see conftest.py).
"""
import itertools
import json
import time
from math import factorial, prod

import jsonschema
import numpy as np
import pytest

import oracles
from conftest import GRID, SEEDS
from bitypical import verification
from bitypical.bounds import keyl_werner_rhs
from bitypical.cli import RunConfig, cmd_report, cmd_verify, dumps, schema_path
from bitypical.partitions import YoungFrame, dim_irrep, downsort, enumerate_frames, enumerate_types
from bitypical.projectors import (
    central_projectors,
    clear_registry,
    commutant_coefficients,
    matrix_unit_residuals,
    refinement,
    symmetrizer_overlap,
    typeclass_projector,
)
from bitypical.symgroup import character, iterate_group
from bitypical.tensorspace import TensorSpace, operator_norm, random_density, spectrum, tensor_power
from bitypical.typicality import build_phi, corollary1_value, units_for

F = YoungFrame
acceptance = pytest.mark.acceptance


def records(grid_results, prefix):
    out = []
    for (seed, n), (checks, _) in grid_results.items():
        out += [dict(c, seed=seed) for c in checks if c["name"].startswith(prefix)]
    return out


def assert_all_pass(recs, tol=None):
    assert recs, "no records"
    bad = [(r["name"], r["seed"], r["n"], r.get("eps"), r.get("delta"), r["residual"]) for r in recs if not r["pass"]]
    assert not bad, bad[:10]
    if tol is not None:
        assert max(r["tolerance"] for r in recs) <= tol


# 1 ---------------------------------------------------------------------------

@acceptance(1, "Schur-Weyl accounting for d_A = d_B = 2, n = 2, 3, 4")
@pytest.mark.parametrize("n, total", [(2, 16), (3, 64), (4, 256)])
def test_schur_weyl_accounting(n, total):
    start = time.perf_counter()
    projs = central_projectors(TensorSpace(2, 2, n), "AB")
    acc = 0
    for f, p in projs.items():
        m = np.trace(p.matrix).real / dim_irrep(f)
        assert abs(m - round(m)) <= 1e-6
        acc += round(m) * dim_irrep(f)
    assert acc == total
    assert time.perf_counter() - start < 60


# 2 ---------------------------------------------------------------------------

@acceptance(2, "exact decomposition at (2, 2, 2)")
def test_decomposition_traces(space2):
    projs = central_projectors(space2, "AB")
    assert np.trace(projs[F((2,))].matrix).real == pytest.approx(10, abs=1e-10)
    assert np.trace(projs[F((1, 1))].matrix).real == pytest.approx(6, abs=1e-10)
    # independent derivation: eigenspaces of the diagonal swap on C^4 (x) C^4
    swap = oracles.ab_perm_matrix(2, 2, 2, (1, 0))
    w = np.linalg.eigvalsh(swap)
    assert (np.sum(w > 0), np.sum(w < 0)) == (10, 6)


@acceptance(2, "exact decomposition at (2, 2, 2)")
def test_refinement_resolution(space2):
    pa, pb = central_projectors(space2, "A"), central_projectors(space2, "B")
    ref = refinement(space2)
    pairs = list(itertools.product(pa, pb))
    assert len(pairs) == 4
    for mu, nu in pairs:
        target = np.kron(pa[mu].matrix, pb[nu].matrix)
        got = sum(r.matrix for rs in ref.values() for r in rs if r.parent == (mu, nu))
        assert operator_norm(got - target) <= 1e-8


@acceptance(2, "exact decomposition at (2, 2, 2)")
def test_parent_multiplicities(space2):
    def counts(frame):
        out = {}
        for r in refinement(space2)[frame]:
            key = (r.parent[0].parts, r.parent[1].parts)
            out[key] = out.get(key, 0) + 1
        return out

    assert counts(F((2,))) == {((2,), (2,)): 9, ((1, 1), (1, 1)): 1}
    assert counts(F((1, 1))) == {((2,), (1, 1)): 3, ((1, 1), (2,)): 3}


# 3 ---------------------------------------------------------------------------

@acceptance(3, "commutators within 1e-9 across the grid, 5 seeds, n = 2, 3")
def test_commutators(grid_results):
    recs = records(grid_results, "commutation.")
    assert len(recs) == 2 * len(SEEDS) * 2 * len(GRID) ** 2
    assert_all_pass(recs, tol=1e-9)


# 4 ---------------------------------------------------------------------------

@acceptance(4, "Keyl-Werner inequality, zero violations")
@pytest.mark.parametrize("d, n", list(itertools.product((2, 3, 4), (2, 3, 4, 5))))
def test_keyl_werner_single_system(d, n):
    checks = verification.keyl_werner_suite(d, n, states=20, seed=1000)
    kw = {c.name: c for c in checks}["keyl_werner.single"]
    assert kw.details["instances"] == 20 * len(enumerate_frames(d, n))
    assert kw.details["violations"] == 0 and kw.passed


@acceptance(4, "Keyl-Werner inequality, zero violations")
@pytest.mark.parametrize("n", [2, 3])
def test_keyl_werner_bipartite(n):
    projs = central_projectors(TensorSpace(2, 2, n), "AB")
    for seed in range(20):
        rho = random_density(4, 2000 + seed)
        power = tensor_power(rho, n, (2, 2))
        s = spectrum(rho)
        for f, p in projs.items():
            lhs = np.vdot(p.matrix, power).real
            assert lhs <= keyl_werner_rhs(f, s, n, 4) * (1 + 1e-9) + 1e-12


# 5 ---------------------------------------------------------------------------

@acceptance(5, "collision lower bounds (Lemma 4, Corollary 1), zero violations")
def test_lemma4(grid_results):
    recs = records(grid_results, "lemma4")
    assert_all_pass(recs)
    assert all(r["details"]["instances"] > 0 for r in recs)


@acceptance(5, "collision lower bounds (Lemma 4, Corollary 1), zero violations")
def test_corollary1():
    violations = []
    for seed in SEEDS:
        rho = random_density(4, seed)
        for n in (2, 3):
            for eps in GRID:
                lhs, rhs = corollary1_value(build_phi(rho, 2, 2, n, eps, 2.0))
                if lhs < rhs:
                    violations.append((seed, n, eps, lhs, rhs))
    assert not violations, f"{len(violations)} violations, e.g. {violations[:3]}"


# 6 ---------------------------------------------------------------------------

@acceptance(6, "matrix units, coefficient minors, trace identity and the sandwich step")
def test_lemma2_skeleton_grid(grid_results):
    for name, tol in [
        ("lemma2.matrix_units", 1e-8),
        ("lemma2.c_minors", 1e-10),
        ("lemma2.pair_trace_identity", 1e-8),
        ("lemma2.sandwich_step", None),
    ]:
        recs = [r for r in records(grid_results, name) if r["name"] == name]
        assert_all_pass(recs, tol=tol)
        assert all(r["details"].get("violations", 0) == 0 for r in recs)


@acceptance(6, "matrix units, coefficient minors, trace identity and the sandwich step")
def test_lemma2_skeleton_with_multiplicity():
    space = TensorSpace(2, 2, 3)
    units = units_for(space)
    ref = refinement(space)
    multi = [f for f in ref if len(ref[f]) >= 2]
    assert multi
    for seed in SEEDS:
        rho = tensor_power(random_density(4, seed), 3, (2, 2))
        for f in multi:
            fam, rs = units[f], ref[f]
            assert max(matrix_unit_residuals(fam, rs).values()) <= 1e-8
            p_rho = central_projectors(space, "AB")[f].matrix @ rho
            c = commutant_coefficients(fam, p_rho)
            dim = dim_irrep(f)
            for i, j in itertools.product(range(len(rs)), repeat=2):
                assert np.real(c[i, i] * c[j, j]) - abs(c[i, j]) ** 2 >= -1e-10
                lhs = np.trace(rs[i].matrix @ rho @ rs[j].matrix @ rho).real
                assert abs(lhs - abs(c[i, j]) ** 2 * dim) <= 1e-8
                ti, tj = np.trace(rs[i].matrix @ rho).real, np.trace(rs[j].matrix @ rho).real
                assert lhs <= ti * tj / dim * (1 + 1e-9) + 1e-12


# 7 ---------------------------------------------------------------------------

@acceptance(7, "typeclass containment and symmetrizer overlap")
@pytest.mark.parametrize("seed", SEEDS)
def test_typeclass_containment(space3, seed):
    _, vecs = np.linalg.eigh(random_density(4, seed))
    projs = central_projectors(space3, "AB")
    types = list(enumerate_types(4, 3))
    assert len(types) == 20
    for counts in types:
        frame = downsort(counts)
        p_t = typeclass_projector(space3, counts, vecs)
        overlap = np.vdot(projs[F(frame.parts)].matrix, p_t).real
        assert overlap >= dim_irrep(frame) - 1e-6


@acceptance(7, "typeclass containment and symmetrizer overlap")
@pytest.mark.parametrize("n", range(1, 6))
def test_symmetrizer_overlap(n):
    for f in enumerate_frames(n, n):
        got = symmetrizer_overlap(f)
        assert isinstance(got, int)
        assert got == prod(factorial(p) for p in f.parts)


# 8 ---------------------------------------------------------------------------

@acceptance(8, "gentle measurement bound on the full grid")
def test_gentle_measurement(grid_results):
    recs = [r for r in records(grid_results, "gentle.phi")]
    assert len(recs) == len(SEEDS) * 2 * len(GRID) ** 2
    assert_all_pass(recs)


# 9 ---------------------------------------------------------------------------

@acceptance(9, "oracle equivalences")
@pytest.mark.parametrize("n", range(1, 8))
def test_dim_irrep_oracle(n):
    for f in enumerate_frames(n, n):
        assert dim_irrep(f) == oracles.syt_count(f.parts)


@acceptance(9, "oracle equivalences")
@pytest.mark.parametrize("n", range(1, 6))
def test_character_oracle(n):
    space = TensorSpace(n, 1, n)
    projs = central_projectors(space, "A")
    assert len(projs) == len(enumerate_frames(n, n))
    dims = (n,) * n
    reps = {}
    for sigma in iterate_group(n):
        reps.setdefault(oracles.cycle_type(sigma.images), sigma.images)
    for ct, sigma in reps.items():
        op = oracles.perm_matrix(dims, sigma)
        for f, p in projs.items():
            assert np.sum(p.matrix * op.T) / p.multiplicity == pytest.approx(character(f, F(ct)), abs=1e-8)


@acceptance(9, "oracle equivalences")
@pytest.mark.parametrize("n", range(1, 11))
def test_partition_oracle(n):
    for d in range(1, n + 1):
        assert [f.parts for f in enumerate_frames(d, n)] == oracles.partitions_by_filter(n, d)


# 10 --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def sweep_reports():
    cfg = dict(n=[2, 3], deterministic=True)
    first, code1 = cmd_report(RunConfig(**cfg))
    clear_registry()
    second, code2 = cmd_report(RunConfig(**cfg))
    return dumps(first), dumps(second), (code1, code2)


@acceptance(10, "margin report completeness and determinism")
def test_margin_completeness(sweep_reports):
    text, _, codes = sweep_reports
    assert codes == (0, 0)
    report = json.loads(text)
    jsonschema.validate(report, json.loads(schema_path().read_text()))
    theorem_ids = {
        "theorem.marginal_collision", "theorem.trace_distance", "theorem.collision_lower", "theorem.collision_upper",
        "theorem.trace", "theorem.product_trace_distance", "theorem.product_collision", "theorem.product_trace",
    }
    by_point = {}
    for e in report["margin_entries"]:
        assert "pass" not in e
        for key in ("lhs", "rhs", "log2_margin", "hypothesis_met"):
            assert key in e
        by_point.setdefault((e["n"], e["eps"], e["delta"]), set()).add(e["id"])
    assert len(by_point) == 2 * len(GRID) ** 2
    for ids in by_point.values():
        assert theorem_ids <= ids
        assert {"lemma2.s1", "lemma2.s2"} <= ids
    assert set(report["summary_by_n"]) == {"2", "3"}


@acceptance(10, "margin report completeness and determinism")
def test_report_determinism(sweep_reports):
    first, second, _ = sweep_reports
    assert first == second


# 11 --------------------------------------------------------------------------

@acceptance(11, "performance envelope")
@pytest.mark.slow
def test_verify_n2_time():
    clear_registry()
    start = time.perf_counter()
    _, code = cmd_verify(RunConfig(n=[2], deterministic=True))
    assert code == 0
    assert time.perf_counter() - start < 30


@acceptance(11, "performance envelope")
@pytest.mark.slow
def test_verify_through_n4_time():
    clear_registry()
    start = time.perf_counter()
    _, code = cmd_verify(RunConfig(n=[2, 3, 4], deterministic=True))
    assert code == 0
    assert time.perf_counter() - start < 300


@acceptance(11, "performance envelope")
@pytest.mark.slow
def test_single_system_suites_time():
    clear_registry()
    start = time.perf_counter()
    for d in (2, 3, 4):
        for n in range(2, 7):
            checks = verification.single_system_suite(d, n, dense_cap=4096)
            assert all(c.passed for c in checks), [c.name for c in checks if not c.passed]
    assert time.perf_counter() - start < 600
