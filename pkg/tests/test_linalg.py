import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interp_bound.exceptions import (
    AssumptionViolation,
    ConditioningError,
    DegenerateSpectrumError,
    DimensionError,
    SymmetryError,
)
from interp_bound.linalg import check_symmetric, log_pseudo_det, nullspace_basis, solve_gram, sym_eig


def test_identity_spectrum():
    rep, _ = sym_eig(np.eye(3))
    np.testing.assert_allclose(rep.eigenvalues, [1, 1, 1])
    assert rep.rank == 3 and rep.log_det == 0.0


def test_diag_spectrum_sorted_descending():
    rep, V = sym_eig(np.diag([1.0, 4.0]))
    np.testing.assert_allclose(rep.eigenvalues, [4, 1])
    assert math.isclose(rep.log_det, math.log(4))
    np.testing.assert_allclose(V @ np.diag(rep.eigenvalues) @ V.T, np.diag([1.0, 4.0]), atol=1e-14)


def test_projector_pseudo_det():
    u = np.array([0.6, 0.8])
    rep, _ = sym_eig(np.outer(u, u))
    np.testing.assert_allclose(rep.eigenvalues, [1, 0], atol=1e-15)
    assert rep.rank == 1 and rep.log_det is None
    assert abs(rep.log_pseudo_det) < 1e-14


def test_log_pseudo_det_examples():
    assert log_pseudo_det(np.eye(5)) == (0.0, 5)
    v, r = log_pseudo_det(np.diag([2.0, 3.0, 0.0]), cutoff=1e-10)
    assert math.isclose(v, math.log(6)) and r == 2
    v, r = log_pseudo_det(np.diag([1e-14, 1.0]), cutoff=1e-10)
    assert v == 0.0 and r == 1


def test_log_pseudo_det_errors():
    with pytest.raises(DegenerateSpectrumError):
        log_pseudo_det(np.zeros((3, 3)))
    with pytest.raises(DegenerateSpectrumError):
        log_pseudo_det(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        log_pseudo_det(np.eye(2), cutoff=0.0)


def test_symmetry_and_shape_checks():
    with pytest.raises(SymmetryError):
        check_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DimensionError):
        check_symmetric(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        check_symmetric(np.array([[np.nan]]))
    A = np.array([[1.0, 2.0 + 1e-12], [2.0, 1.0]])
    np.testing.assert_array_equal(check_symmetric(A), check_symmetric(A).T)


def test_nullspace_examples():
    U = nullspace_basis(np.array([[1.0, 0.0]]))
    np.testing.assert_allclose(np.abs(U[:, 0]), [0, 1], atol=1e-15)
    U = nullspace_basis(np.array([[1.0, 1.0]]) / math.sqrt(2))
    np.testing.assert_allclose(np.abs(U[:, 0]), [1 / math.sqrt(2)] * 2, atol=1e-15)
    assert U[0, 0] * U[1, 0] < 0


def test_nullspace_errors():
    with pytest.raises(AssumptionViolation) as exc:
        nullspace_basis(np.eye(2))
    assert exc.value.letter == "B"
    with pytest.raises(AssumptionViolation):
        nullspace_basis(np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 6), extra=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_nullspace_postconditions(k, extra, seed):
    DF = np.random.default_rng(seed).normal(size=(k, k + extra))
    U = nullspace_basis(DF)
    assert U.shape == (k + extra, extra)
    assert np.linalg.norm(DF @ U) <= 1e-8 * np.linalg.norm(DF)
    np.testing.assert_allclose(U.T @ U, np.eye(extra), atol=1e-10)


def test_solve_gram_examples():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(solve_gram(np.eye(3), b), b)
    np.testing.assert_allclose(solve_gram(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1, 1])
    with pytest.raises(ConditioningError) as exc:
        solve_gram(np.diag([1.0, 1e-12]), np.ones(2))
    assert exc.value.min_eigenvalue == pytest.approx(1e-12)
    with pytest.raises(DimensionError):
        solve_gram(np.eye(2), np.ones(3))


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_solve_gram_residual(k, seed):
    rng = np.random.default_rng(seed)
    J = rng.normal(size=(k, k + 3))
    G = J @ J.T
    b = rng.normal(size=k)
    x = solve_gram(G, b)
    assert np.linalg.norm(G @ x - b) <= 1e-10 * (1 + np.linalg.norm(b)) * np.linalg.cond(G)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 2**32 - 1))
def test_log_det_matches_slogdet(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n + 2))
    A = M @ M.T
    rep, _ = sym_eig(A)
    assert rep.log_det == pytest.approx(np.linalg.slogdet(A)[1], rel=1e-10, abs=1e-10)
    P = np.eye(n)[rng.permutation(n)]
    assert sym_eig(P @ A @ P.T)[0].log_det == pytest.approx(rep.log_det, abs=1e-10)
