import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import seeds
from errors import (
    DimensionMismatch,
    DomainViolation,
    FactorizationFailure,
    NonFiniteEntries,
    NotPositiveDefinite,
    NotSquare,
    NotSymmetric,
    ParamOutOfRange,
)
from spd_core import (
    SpdMatrix,
    apply_scalar_function,
    as_symmetric,
    batched_spd_solve,
    congruence,
    frobenius_residual,
    loewner_leq,
    random_ordered_pair,
    random_ordered_quadruple,
    random_spd,
    resolvent_apply,
    spectral_norm,
    sqrt_and_inv_sqrt,
    sym_eig,
    validate_spd,
)


@pytest.mark.parametrize(
    "entries, error",
    [
        (np.ones((2, 3)), NotSquare),
        (np.ones(3), NotSquare),
        (np.zeros((0, 0)), NotSquare),
        (np.array([[1.0, np.nan], [np.nan, 1.0]]), NonFiniteEntries),
        (np.array([[1.0, 2.0], [0.0, 1.0]]), NotSymmetric),
    ],
)
def test_as_symmetric_rejects(entries, error):
    with pytest.raises(error):
        as_symmetric(entries)


def test_as_symmetric_absorbs_rounding_asymmetry():
    m = np.array([[2.0, 1.0], [1.0 + 1e-15, 3.0]])
    sym = as_symmetric(m)
    np.testing.assert_array_equal(sym.entries, sym.entries.T)


def test_validate_spd_rejects_semidefinite():
    with pytest.raises(NotPositiveDefinite):
        validate_spd(np.diag([1.0, 0.0]))
    with pytest.raises(NotPositiveDefinite):
        validate_spd(np.diag([1.0, -2.0]))


def test_validate_spd_caches_eigendecomposition():
    m = validate_spd(np.diag([3.0, 1.0, 2.0]))
    assert isinstance(m, SpdMatrix)
    np.testing.assert_array_equal(sym_eig(m).eigenvalues, [1.0, 2.0, 3.0])
    assert m.min_eigenvalue == 1.0
    assert not m.entries.flags.writeable


def test_eigenbasis_sign_is_normalized():
    eig = sym_eig(validate_spd(np.array([[2.0, 1.0], [1.0, 2.0]])))
    basis = eig.basis
    for j in range(2):
        first = basis[np.argmax(np.abs(basis[:, j]) > 1e-12), j]
        assert first > 0


def test_apply_scalar_function_domain_violation():
    with pytest.raises(DomainViolation):
        apply_scalar_function(as_symmetric(np.diag([-1.0, 1.0])), np.log)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, dim=st.integers(min_value=1, max_value=6))
def test_square_root_squares_back(seed, dim):
    m = random_spd(dim, 1e3, seed)
    root, inv_root = sqrt_and_inv_sqrt(m)
    np.testing.assert_allclose(root.entries @ root.entries, m.entries, rtol=1e-10, atol=1e-10 * spectral_norm(m))
    np.testing.assert_allclose(root.entries @ inv_root.entries, np.eye(dim), atol=1e-10)


def test_congruence_is_symmetric():
    x = validate_spd(np.array([[2.0, 1.0], [1.0, 2.0]]))
    s = validate_spd(np.array([[1.0, 0.3], [0.3, 1.0]]))
    out = congruence(x, s)
    np.testing.assert_array_equal(out.entries, out.entries.T)
    np.testing.assert_allclose(out.entries, s.entries @ x.entries @ s.entries, rtol=1e-14)


def test_congruence_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        congruence(validate_spd(np.eye(2)), validate_spd(np.eye(3)))


def test_resolvent_apply(diag):
    out = resolvent_apply(diag(1.0, 3.0), 1.0, np.eye(2))
    np.testing.assert_allclose(out, np.diag([0.5, 0.25]), rtol=1e-15)


def test_resolvent_apply_rejects_negative_shift(diag):
    with pytest.raises(ParamOutOfRange):
        resolvent_apply(diag(1.0, 3.0), -0.5, np.eye(2))


def test_resolvent_apply_rhs_rows(diag):
    with pytest.raises(DimensionMismatch):
        resolvent_apply(diag(1.0, 3.0), 0.0, np.eye(3))


def test_batched_spd_solve_matches_dense_solve():
    rng = np.random.default_rng(7)
    stack = np.stack([random_spd(4, 50.0, s).entries for s in range(6)]).reshape(2, 3, 4, 4)
    rhs = rng.standard_normal((4, 4))
    out = batched_spd_solve(stack, rhs)
    assert out.shape == (2, 3, 4, 4)
    for i in range(2):
        for j in range(3):
            np.testing.assert_allclose(out[i, j], np.linalg.solve(stack[i, j], rhs), rtol=1e-10, atol=1e-12)


def test_batched_spd_solve_indefinite():
    with pytest.raises(FactorizationFailure):
        batched_spd_solve(np.diag([1.0, -1.0])[None], np.eye(2))


def test_loewner_leq(diag):
    low, high = diag(1.0, 2.0), diag(2.0, 2.5)
    up = loewner_leq(low, high)
    assert up.ordered
    assert up.margin == pytest.approx(0.5)
    assert up.scale == pytest.approx(1.0 + 2.0 + 2.5)
    down = loewner_leq(high, low)
    assert not down.ordered
    assert down.margin == pytest.approx(-1.0)


def test_loewner_leq_tolerance(diag):
    x, y = diag(1.0, 1.0), diag(1.0, 1.0 - 1e-12)
    assert not loewner_leq(x, y).ordered
    assert loewner_leq(x, y, tol=1e-9).ordered


def test_frobenius_residual():
    assert frobenius_residual(np.zeros((2, 2)), 1e-3 * np.eye(2)) == pytest.approx(np.sqrt(2) * 1e-3)
    assert frobenius_residual(10 * np.eye(2), 11 * np.eye(2)) == pytest.approx(0.1)


def test_random_spd_identity_when_condition_is_one():
    np.testing.assert_array_equal(random_spd(3, 1.0, 5).entries, np.eye(3))


@pytest.mark.parametrize("dim", [2, 3, 8])
def test_random_spd_hits_condition_target(dim):
    values = sym_eig(random_spd(dim, 1e4, 11)).eigenvalues
    assert values[-1] / values[0] == pytest.approx(1e4, rel=1e-8)


def test_random_spd_is_reproducible():
    np.testing.assert_array_equal(random_spd(4, 100.0, 3).entries, random_spd(4, 100.0, 3).entries)


@pytest.mark.parametrize("dim, condition", [(0, 10.0), (2, 0.5)])
def test_random_spd_rejects(dim, condition):
    with pytest.raises(ParamOutOfRange):
        random_spd(dim, condition, 0)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, dim=st.integers(min_value=1, max_value=6))
def test_random_ordered_pair_is_ordered(seed, dim):
    x, y = random_ordered_pair(dim, seed)
    assert loewner_leq(x, y).margin > 0


def test_random_ordered_quadruple_is_ordered():
    a, b, c, d = random_ordered_quadruple(3, 99)
    assert loewner_leq(c, a).margin > 0
    assert loewner_leq(d, b).margin > 0
    assert not np.allclose(a.entries, b.entries)
