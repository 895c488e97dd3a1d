import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import group_shrink_reference, soft_threshold_reference, svt_reference
from robustmc.linalg import inner, make_rng, orthonormal_columns
from robustmc.operators import (ColumnSet, ObservationMask, TangentSpace, embed, project_columns, project_mask,
                                project_tangent, restrict, shrink_columns, shrink_entries, shrink_singular)

seeds = st.integers(0, 2**32 - 1)


def random_mask(rng, p, n, frac=0.5):
    return ObservationMask(rng.random((p, n)) < frac)


def random_tangent_space(rng, p, n, r):
    return TangentSpace(orthonormal_columns(rng.standard_normal((p, r))), orthonormal_columns(rng.standard_normal((n, r))))


# -- masks and column sets ----------------------------------------------------

def test_mask_canonical_order_and_equality():
    a = ObservationMask.from_entries(2, 3, [(1, 2), (0, 0)])
    b = ObservationMask.from_entries(2, 3, [(0, 0), (1, 2)])
    assert a == b
    assert a.entries.tolist() == [[0, 0], [1, 2]]
    assert len(a) == 2


def test_mask_validation():
    with pytest.raises(ValueError):
        ObservationMask.from_entries(2, 2, [(2, 0)])
    with pytest.raises(ValueError):
        ObservationMask.from_entries(2, 2, [(0, 0), (0, 0)])
    with pytest.raises(ValueError):
        ObservationMask.from_entries(2, 2, [(-1, 0)])


def test_mask_is_read_only():
    mask = ObservationMask.full(2, 2)
    with pytest.raises(ValueError):
        mask.array[0, 0] = False


def test_mask_complement_union_and_text(tmp_path):
    rng = make_rng(0)
    a = random_mask(rng, 4, 5)
    assert a.union(a.complement()) == ObservationMask.full(4, 5)
    assert ObservationMask.from_text(a.to_text()) == a
    a.save(tmp_path / "m.txt")
    assert ObservationMask.load(tmp_path / "m.txt") == a
    with pytest.raises(ValueError):
        ObservationMask.from_text("2 2 3\n0 0\n")


def test_column_set_sorted_and_validated():
    s = ColumnSet(5, (3, 1))
    assert s.members == (1, 3)
    assert s.complement().members == (0, 2, 4)
    assert 3 in s and len(s) == 2
    with pytest.raises(ValueError):
        ColumnSet(3, (3,))
    with pytest.raises(ValueError):
        ColumnSet(3, (1, 1))


# -- projections ---------------------------------------------------------------

def test_project_mask_examples():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    omega = ObservationMask.from_entries(2, 2, [(0, 0), (1, 1)])
    np.testing.assert_array_equal(project_mask(A, omega), [[1, 0], [0, 4]])
    np.testing.assert_array_equal(project_mask(A, ObservationMask.full(2, 2)), A)
    np.testing.assert_array_equal(project_mask(A, ObservationMask.empty(2, 2)), np.zeros((2, 2)))


def test_project_mask_shape_mismatch():
    with pytest.raises(ValueError):
        project_mask(np.ones((2, 3)), ObservationMask.full(3, 2))


def test_project_columns_examples():
    A = np.arange(6.0).reshape(2, 3)
    kept = project_columns(A, ColumnSet(3, (2,)))
    np.testing.assert_array_equal(kept, [[0, 0, 2], [0, 0, 5]])
    empty = ColumnSet(3)
    np.testing.assert_array_equal(project_columns(A, empty), np.zeros((2, 3)))
    np.testing.assert_array_equal(project_columns(A, empty, complement=True), A)


def test_project_columns_additive():
    rng = make_rng(1)
    for _ in range(10):
        A = rng.standard_normal((4, 6))
        cols = ColumnSet(6, tuple(np.flatnonzero(rng.random(6) < 0.4)))
        np.testing.assert_allclose(project_columns(A, cols) + project_columns(A, cols, True), A)


def test_restrict_embed_examples():
    A = np.array([[1.0, 0.0, 2.0], [3.0, 0.0, 4.0]])
    I0 = ColumnSet(3, (1,))
    np.testing.assert_array_equal(restrict(A, I0), [[1, 2], [3, 4]])
    np.testing.assert_array_equal(embed(restrict(A, I0), I0, 3), A)
    B = make_rng(2).standard_normal((2, 3))
    np.testing.assert_array_equal(restrict(B, ColumnSet(3)), B)


def test_restrict_round_trip_random():
    rng = make_rng(3)
    I0 = ColumnSet(7, (0, 4))
    A = project_columns(rng.standard_normal((5, 7)), I0, complement=True)
    np.testing.assert_array_equal(embed(restrict(A, I0), I0, 7), A)


def test_restrict_requires_zero_corrupted_columns():
    I0 = ColumnSet(3, (1,))
    A = np.zeros((2, 3))
    A[0, 1] = 1e-13
    restrict(A, I0)  # within tolerance
    A[0, 1] = 1e-6
    with pytest.raises(ValueError):
        restrict(A, I0)


def test_tangent_examples():
    rng = make_rng(4)
    T = random_tangent_space(rng, 6, 5, 2)
    A = T.U @ rng.standard_normal((5, 2)).T
    np.testing.assert_allclose(project_tangent(A, T), A, atol=1e-12)
    np.testing.assert_allclose(project_tangent(A, T, complement=True), 0, atol=1e-12)
    T0 = TangentSpace(np.zeros((6, 0)), np.zeros((5, 0)))
    B = rng.standard_normal((6, 5))
    np.testing.assert_array_equal(project_tangent(B, T0), np.zeros((6, 5)))
    np.testing.assert_array_equal(project_tangent(B, T0, complement=True), B)


def test_tangent_requires_orthonormal_bases():
    with pytest.raises(ValueError):
        TangentSpace(np.ones((3, 1)), np.ones((3, 1)))


def test_tangent_from_matrix_rank():
    rng = make_rng(9)
    L = rng.standard_normal((8, 2)) @ rng.standard_normal((2, 6))
    assert TangentSpace.from_matrix(L).rank == 2


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_projections_idempotent_and_self_adjoint(seed):
    rng = make_rng(seed)
    p, n = 5, 6
    A, B = rng.standard_normal((p, n)), rng.standard_normal((p, n))
    omega = random_mask(rng, p, n)
    cols = ColumnSet(n, tuple(np.flatnonzero(rng.random(n) < 0.5)))
    T = random_tangent_space(rng, p, n, 2)
    projections = [
        lambda X: project_mask(X, omega),
        lambda X: project_columns(X, cols),
        lambda X: project_columns(X, cols, True),
        lambda X: project_tangent(X, T),
        lambda X: project_tangent(X, T, True),
    ]
    for P in projections:
        np.testing.assert_allclose(P(P(A)), P(A), atol=1e-10)
        assert inner(P(A), B) == pytest.approx(inner(A, P(B)), abs=1e-9)
    assert abs(inner(project_tangent(A, T), project_tangent(A, T, True))) <= 1e-10


def test_tangent_identities_for_oracle_style_space():
    """With U-hat = U0 and V-hat zero on the corrupted rows, restriction and
    embedding commute with the tangent projections as expected."""
    rng = make_rng(11)
    p, n, r = 8, 10, 2
    I0 = ColumnSet(n, (3, 7))
    n1 = n - len(I0)
    clean = ~I0.indicator()
    U0 = orthonormal_columns(rng.standard_normal((p, r)))
    V_clean = orthonormal_columns(rng.standard_normal((n1, r)))
    V_hat = np.zeros((n, r))
    V_hat[clean] = V_clean
    T_hat = TangentSpace(U0, V_hat)
    T_tilde = TangentSpace(U0, V_clean)
    for _ in range(10):
        X = rng.standard_normal((p, n))
        lhs = restrict(project_columns(project_tangent(X, T_hat), I0, True), I0)
        np.testing.assert_allclose(project_tangent(lhs, T_tilde), lhs, atol=1e-8)

        Z = project_columns(rng.standard_normal((p, n)), I0, complement=True)
        RZ = restrict(Z, I0)
        back = embed(project_tangent(RZ, T_tilde), I0, n)
        np.testing.assert_allclose(project_tangent(back, T_hat), project_tangent(Z, T_hat), atol=1e-8)

        perp = embed(project_tangent(RZ, T_tilde, complement=True), I0, n)
        np.testing.assert_allclose(project_tangent(perp, T_hat, complement=True), perp, atol=1e-8)


# -- shrinkage -----------------------------------------------------------------

def test_shrink_singular_examples():
    np.testing.assert_allclose(shrink_singular(np.diag([5.0, 1.0, 0.2]), 1.0), np.diag([4.0, 0, 0]), atol=1e-12)
    A = make_rng(5).standard_normal((3, 4))
    np.testing.assert_array_equal(shrink_singular(A, 0.0), A)


def test_shrink_columns_examples():
    np.testing.assert_allclose(shrink_columns(np.array([[0.0], [2.0]]), 0.5), [[0.0], [1.5]])
    A = np.array([[0.3, 0.0], [0.4, 0.1]])
    np.testing.assert_array_equal(shrink_columns(A, 0.5), np.zeros((2, 2)))


def test_shrink_entries_examples():
    A = np.array([[2.0, -0.1], [-3.0, 0.0]])
    np.testing.assert_allclose(shrink_entries(A, 0.5), [[1.5, 0], [-2.5, 0]])
    np.testing.assert_array_equal(shrink_entries(A, 0.0), A)


def test_shrink_ties_go_to_zero():
    assert np.all(shrink_singular(np.diag([2.0, 1.0]), 2.0) == 0)
    assert np.all(shrink_columns(np.array([[3.0], [4.0]]), 5.0) == 0)
    assert np.all(shrink_entries(np.array([[0.5, -0.5]]), 0.5) == 0)


def test_shrink_negative_threshold_rejected():
    for f in (shrink_singular, shrink_columns, shrink_entries):
        with pytest.raises(ValueError):
            f(np.eye(2), -0.1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.0, 3.0))
def test_shrink_matches_reference(seed, eps):
    A = make_rng(seed).standard_normal((6, 5))
    np.testing.assert_allclose(shrink_singular(A, eps), svt_reference(A, eps), atol=1e-8)
    np.testing.assert_allclose(shrink_columns(A, eps), group_shrink_reference(A, eps), atol=1e-12)
    np.testing.assert_allclose(shrink_entries(A, eps), soft_threshold_reference(A, eps), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.01, 2.0))
def test_shrink_non_expansive(seed, eps):
    rng = make_rng(seed)
    A, B = rng.standard_normal((5, 5)), rng.standard_normal((5, 5))
    for f in (shrink_singular, shrink_columns, shrink_entries):
        assert np.linalg.norm(f(A, eps) - f(B, eps)) <= np.linalg.norm(A - B) + 1e-10
