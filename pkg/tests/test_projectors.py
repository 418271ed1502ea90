import itertools
from collections import Counter
from math import factorial, prod

import numpy as np
import pytest

import oracles
from bitypical.partitions import YoungFrame, dim_irrep, enumerate_frames, enumerate_types
from bitypical.projectors import (
    CentralProjector,
    SerializationError,
    canonical_tableau,
    central_projector,
    central_projectors,
    clear_registry,
    commutant_coefficients,
    deserialize_projectors,
    group_algebra_operator,
    matrix_unit_residuals,
    matrix_units,
    members_by_parent,
    reconstruct,
    refinement,
    serialize_projectors,
    symmetrizer_overlap,
    total_trace,
    typeclass_projector,
    typical_frames,
    typical_projector,
    young_symmetrizer,
)
from bitypical.symgroup import iterate_group
from bitypical.tensorspace import ActionKind, TensorSpace, operator_norm, permutation_operator, random_density, tensor_power
from bitypical.typicality import units_for

F = YoungFrame


class TestCentralProjectors:
    def test_two_qubit_symmetric_and_antisymmetric(self, space2):
        swap = oracles.perm_matrix((2, 2), (1, 0))
        sym = central_projector(space2, "A", F((2,)))
        anti = central_projector(space2, "A", F((1, 1)))
        np.testing.assert_allclose(sym.matrix, (np.eye(4) + swap) / 2, atol=1e-14)
        np.testing.assert_allclose(anti.matrix, (np.eye(4) - swap) / 2, atol=1e-14)
        assert np.trace(sym.matrix) == pytest.approx(3)
        assert np.trace(anti.matrix) == pytest.approx(1)

    def test_bipartite_traces(self, space2):
        projs = central_projectors(space2, "AB")
        assert np.trace(projs[F((2,))].matrix) == pytest.approx(10)
        assert np.trace(projs[F((1, 1))].matrix) == pytest.approx(6)

    @pytest.mark.parametrize("d, n", [(2, 2), (2, 3), (3, 2), (3, 3), (2, 4)])
    def test_matches_young_symmetrizer_span(self, d, n):
        space = TensorSpace(d, 1, n)
        projs = central_projectors(space, "A")
        for f in enumerate_frames(n, n):
            expected = oracles.isotypic_projector_from_symmetrizer(d, f.parts)
            got = projs[f].matrix if f in projs else np.zeros_like(expected)
            np.testing.assert_allclose(got, expected, atol=1e-9)

    def test_too_many_rows_gives_zero(self, space3):
        p = central_projector(space3, "A", F((1, 1, 1)))
        assert p.multiplicity == 0 and not np.any(p.matrix)

    def test_product_kind(self, space2):
        p = central_projector(space2, "AxB", (F((2,)), F((1, 1))))
        assert p.matrix.shape == (16, 16)
        assert np.trace(p.matrix) == pytest.approx(3)

    def test_box_count_mismatch(self, space2):
        with pytest.raises(ValueError):
            central_projector(space2, "A", F((3,)))

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("kind", ["A", "B", "AB"])
    def test_resolution_of_identity(self, n, kind):
        space = TensorSpace(2, 2, n)
        projs = central_projectors(space, kind)
        dim = space.native_dim(kind)
        total = sum(p.matrix for p in projs.values())
        assert np.max(np.abs(total - np.eye(dim))) <= 1e-9
        assert total_trace(projs.values()) == dim
        for (f, p), (g, q) in itertools.combinations(projs.items(), 2):
            assert operator_norm(p.matrix @ q.matrix) <= 1e-9
        for p in projs.values():
            assert operator_norm(p.matrix @ p.matrix - p.matrix) <= 1e-9

    @pytest.mark.parametrize("kind", ["A", "B", "AB"])
    def test_commutes_with_action(self, space3, kind):
        projs = central_projectors(space3, kind)
        for sigma in iterate_group(3):
            op = permutation_operator(space3, kind, sigma, native=kind != "AB", dense=True)
            for p in projs.values():
                assert operator_norm(op @ p.matrix - p.matrix @ op) <= 1e-9

    def test_registry_is_memoized(self, space2):
        assert central_projectors(space2, "AB") is central_projectors(space2, "AB")

    def test_cleared_registry_rebuilds_identical(self):
        space = TensorSpace(2, 2, 2)
        before = {f: p.matrix.copy() for f, p in central_projectors(space, "AB").items()}
        clear_registry()
        after = central_projectors(space, "AB")
        for f in before:
            assert before[f].tobytes() == after[f].matrix.tobytes()


class TestTypicalProjector:
    def test_maximal_radius_is_identity(self, space2):
        t = typical_projector(space2, "AB", [0.4, 0.3, 0.2, 0.1], 2.0)
        np.testing.assert_allclose(t.matrix, np.eye(16), atol=1e-12)

    def test_zero_radius_irrational_spectrum_is_zero(self, space2):
        s = np.array([1 / np.sqrt(2), 1 - 1 / np.sqrt(2)])
        t = typical_projector(space2, "A", s, 0.0)
        assert t.is_zero and not np.any(t.matrix)

    def test_single_frame_selected(self):
        assert typical_frames(2, 4, [0.75, 0.25], 0.01) == [F((3, 1))]

    def test_sum_of_selected_frames(self, space3):
        s = [0.6, 0.4]
        t = typical_projector(space3, "A", s, 0.5)
        projs = central_projectors(space3, "A")
        np.testing.assert_allclose(t.matrix, sum(projs[f].matrix for f in t.frames))

    def test_spectrum_length_checked(self, space2):
        with pytest.raises(ValueError):
            typical_projector(space2, "AB", [0.5, 0.5], 0.1)

    def test_negative_radius(self, space2):
        with pytest.raises(ValueError):
            typical_projector(space2, "A", [0.5, 0.5], -0.1)


class TestRefinement:
    def test_parent_multiplicities_n2(self, space2):
        ref = refinement(space2)
        sym = Counter((str(r.parent[0]), str(r.parent[1])) for r in ref[F((2,))])
        anti = Counter((str(r.parent[0]), str(r.parent[1])) for r in ref[F((1, 1))])
        assert sym == {("(2)", "(2)"): 9, ("(1,1)", "(1,1)"): 1}
        assert anti == {("(2)", "(1,1)"): 3, ("(1,1)", "(2)"): 3}

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_parent_resolution_and_completeness(self, n):
        space = TensorSpace(2, 2, n)
        pa, pb = central_projectors(space, "A"), central_projectors(space, "B")
        pab = central_projectors(space, "AB")
        ref = refinement(space)
        for mu, nu in itertools.product(pa, pb):
            target = np.kron(pa[mu].matrix, pb[nu].matrix)
            got = sum(r.matrix for rs in ref.values() for r in rs if r.parent == (mu, nu))
            assert operator_norm(got - target) <= 1e-8
        for f, rs in ref.items():
            assert len(rs) == pab[f].multiplicity
            assert np.max(np.abs(sum(r.matrix for r in rs) - pab[f].matrix)) <= 1e-9

    def test_members_are_orthogonal_rank_f_and_dominated(self, space3):
        pa, pb = central_projectors(space3, "A"), central_projectors(space3, "B")
        for f, rs in refinement(space3).items():
            for r in rs:
                assert np.trace(r.matrix).real == pytest.approx(dim_irrep(f), abs=1e-8)
                parent = np.kron(pa[r.parent[0]].matrix, pb[r.parent[1]].matrix)
                assert operator_norm(parent @ r.matrix - r.matrix) <= 1e-8
            for a, b in itertools.combinations(rs, 2):
                assert operator_norm(a.matrix @ b.matrix) <= 1e-8

    def test_members_commute_with_diagonal_action(self, space3):
        for sigma in iterate_group(3):
            op = permutation_operator(space3, "AB", sigma, dense=True)
            for rs in refinement(space3).values():
                for r in rs:
                    assert operator_norm(op @ r.matrix - r.matrix @ op) <= 1e-8

    def test_grouping_by_parent(self, space2):
        groups = members_by_parent(refinement(space2)[F((1, 1))])
        assert sorted(len(v) for v in groups.values()) == [3, 3]

    def test_seed_reproducible(self):
        space = TensorSpace(2, 2, 2)
        a = refinement(space, seed=3)[F((2,))]
        b = refinement(space, seed=3)[F((2,))]
        assert all(x.matrix.tobytes() == y.matrix.tobytes() for x, y in zip(a, b))


@pytest.fixture(scope="module")
def family():
    space = TensorSpace(2, 2, 3)
    frame = F((2, 1))
    return space, frame, refinement(space)[frame], units_for(space)[frame]


class TestMatrixUnits:
    def test_relations(self, family):
        space, frame, rs, fam = family
        assert fam.m >= 2
        assert max(matrix_unit_residuals(fam, rs).values()) <= 1e-8
        for j, r in enumerate(rs):
            assert operator_norm(fam.unit(j, j) - r.matrix) <= 1e-8
        y12, y21 = fam.unit(0, 1), fam.unit(1, 0)
        assert operator_norm(y12 @ y21 - fam.unit(0, 0)) <= 1e-8
        assert abs(np.trace(y12)) <= 1e-10
        for (i, j, k, l) in [(0, 1, 1, 2), (2, 0, 0, 1), (0, 1, 2, 0)]:
            expected = fam.unit(i, l) if j == k else 0
            assert operator_norm(fam.unit(i, j) @ fam.unit(k, l) - expected) <= 1e-8
        for i, j in [(0, 1), (1, 2)]:
            y = fam.unit(i, j)
            assert operator_norm(rs[i].matrix @ y @ rs[j].matrix - y) <= 1e-8

    def test_units_intertwine_action(self, family):
        space, _, _, fam = family
        for sigma in iterate_group(3):
            op = permutation_operator(space, "AB", sigma, dense=True)
            y = fam.unit(0, 1)
            assert operator_norm(op @ y - y @ op) <= 1e-8

    def test_coefficients(self, family):
        space, frame, rs, fam = family
        rho = tensor_power(random_density(4, 11), 3, (2, 2))
        p_rho = central_projectors(space, "AB")[frame].matrix @ rho
        c = commutant_coefficients(fam, p_rho)
        f = dim_irrep(frame)
        for i, r in enumerate(rs):
            assert c[i, i].real == pytest.approx(np.trace(r.matrix @ rho).real / f, abs=1e-12)
            assert c[i, i].real >= 0
        assert np.all(np.abs(c) ** 2 <= np.outer(c.diagonal().real, c.diagonal().real) + 1e-10)
        assert operator_norm(reconstruct(fam, c) - p_rho) <= 1e-8
        for i, j in [(0, 1), (1, 2), (0, 2)]:
            lhs = np.trace(rs[i].matrix @ rho @ rs[j].matrix @ rho).real
            assert lhs == pytest.approx(abs(c[i, j]) ** 2 * f, abs=1e-10)

    def test_maximally_mixed_gives_diagonal_coefficients(self, family):
        space, frame, rs, fam = family
        p = central_projectors(space, "AB")[frame].matrix
        c = commutant_coefficients(fam, p / space.dim)
        np.testing.assert_allclose(c, np.eye(len(rs)) / space.dim, atol=1e-12)

    def test_empty_family(self, space2):
        fam = matrix_units(space2, F((2,)), [])
        assert fam.m == 0


class TestYoungSymmetrizer:
    def test_tableau(self):
        assert canonical_tableau(F((3, 1))) == [[0, 1, 2], [3]]

    @pytest.mark.parametrize("n", range(1, 6))
    def test_matches_oracle_terms(self, n):
        for f in enumerate_frames(n, n):
            got = {g.images: c for g, c in young_symmetrizer(f).items() if c}
            want = {g: c for g, c in oracles.young_symmetrizer_terms(f.parts).items() if c}
            assert got == want

    def test_full_symmetrizer_on_constant_word(self):
        n = 3
        space = TensorSpace(2, 1, n)
        op = group_algebra_operator(space, "A", young_symmetrizer(F((n,))))
        v = np.zeros(8)
        v[0] = 1
        np.testing.assert_array_equal(op @ v, factorial(n) * v)

    @pytest.mark.parametrize("n", range(1, 6))
    def test_overlap_is_row_group_order(self, n):
        for f in enumerate_frames(n, n):
            got = symmetrizer_overlap(f)
            assert isinstance(got, int)
            assert got == prod(factorial(p) for p in f.parts)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_quasi_idempotent(self, n):
        space = TensorSpace(n, 1, n) if n < 4 else TensorSpace(3, 1, n)
        for f in enumerate_frames(space.d_A, n):
            e = group_algebra_operator(space, "A", young_symmetrizer(f))
            assert np.max(np.abs(e @ e - factorial(n) / dim_irrep(f) * e)) <= 1e-7


class TestTypeclasses:
    def test_constant_type_is_rank_one(self, space2):
        p = typeclass_projector(space2, (2, 0, 0, 0))
        assert np.trace(p) == 1 and p[0, 0] == 1

    @pytest.mark.parametrize("counts", [(1, 1, 0, 0), (0, 2, 0, 0), (1, 0, 0, 1)])
    def test_trace_is_multinomial(self, space2, counts):
        assert np.trace(typeclass_projector(space2, counts)) == oracles.multinomial(counts)

    def test_words_have_right_symbols(self, space2):
        # symbol of a slot is a * d_B + b, so (0, 0, 0, 2) is the word |11>_A |11>_B
        p = typeclass_projector(space2, (0, 0, 0, 2))
        assert p[15, 15] == 1 and np.trace(p) == 1

    def test_commutes_with_diagonal_action(self, space3):
        rho = random_density(4, 3)
        _, vecs = np.linalg.eigh(rho)
        for counts in [(1, 1, 1, 0), (2, 0, 1, 0)]:
            p = typeclass_projector(space3, counts, vecs)
            for sigma in iterate_group(3):
                op = permutation_operator(space3, "AB", sigma, dense=True)
                assert operator_norm(op @ p - p @ op) <= 1e-10

    def test_typeclasses_resolve_identity(self, space2):
        rho = random_density(4, 5)
        _, vecs = np.linalg.eigh(rho)
        total = sum(typeclass_projector(space2, t, vecs) for t in enumerate_types(4, 2))
        assert operator_norm(total - np.eye(16)) <= 1e-10

    def test_invalid_type(self, space2):
        with pytest.raises(ValueError):
            typeclass_projector(space2, (1, 1, 1, 0))


class TestSerialization:
    @pytest.mark.parametrize("kind, dims", [("A", (2, 0)), ("B", (2, 0)), ("AB", (2, 2))])
    def test_round_trip_is_bit_exact(self, space3, kind, dims):
        projs = list(central_projectors(space3, kind).values())
        blob = serialize_projectors(kind, dims[0], dims[1], 3, projs)
        key, back = deserialize_projectors(blob)
        assert key == (ActionKind(kind), dims[0], dims[1], 3)
        for p, q in zip(projs, back):
            assert p.frame == q.frame and p.multiplicity == q.multiplicity
            assert p.matrix.tobytes() == q.matrix.tobytes()

    def test_complex_round_trip(self):
        m = np.array([[0.5, 0.5j], [-0.5j, 0.5]])
        blob = serialize_projectors("A", 2, 0, 1, [CentralProjector(ActionKind.A, F((1,)), m, 1)])
        _, (q,) = deserialize_projectors(blob)
        assert q.matrix.tobytes() == m.tobytes()

    def test_header_layout(self, space2):
        blob = serialize_projectors("AB", 2, 2, 2, list(central_projectors(space2, "AB").values()))
        assert blob[:4] == b"SWTP"

    def test_corruption_detected(self, space2):
        blob = bytearray(serialize_projectors("AB", 2, 2, 2, list(central_projectors(space2, "AB").values())))
        blob[50] ^= 0xFF
        with pytest.raises(SerializationError, match="checksum"):
            deserialize_projectors(bytes(blob))

    def test_truncation_detected(self, space2):
        blob = serialize_projectors("AB", 2, 2, 2, list(central_projectors(space2, "AB").values()))
        with pytest.raises(SerializationError):
            deserialize_projectors(blob[:-20])
        with pytest.raises(SerializationError):
            deserialize_projectors(blob[:6])

    def test_product_kind_not_serializable(self):
        with pytest.raises(SerializationError):
            serialize_projectors("AxB", 2, 2, 2, [])
