import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ioc_forge.matstruct import (
    duplication_matrix,
    kron,
    null_space_basis,
    numerical_rank,
    pseudoinverse,
    smallest_singular_pair,
    unvech,
    vec,
    vech,
)

from conftest import random_symmetric

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_vech_scalar():
    assert np.array_equal(vech(np.array([[2.5]])), [2.5])


def test_vech_weight_matrix():
    assert np.allclose(vech(np.array([[1, 0.2], [0.2, 0.8]])), [1, 0.2, 0.8])


def test_vech_order_is_column_major_lower():
    M = np.array([[1, 2, 3], [2, 4, 5], [3, 5, 6]], dtype=float)
    assert np.array_equal(vech(M), [1, 2, 3, 4, 5, 6])


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[1.0, 2.0], [0.0, 1.0]])])
def test_vech_rejects_nonsymmetric(bad):
    with pytest.raises(ValueError):
        vech(bad)


def test_duplication_small_cases():
    assert np.array_equal(duplication_matrix(1), [[1.0]])
    expected = np.array([[1, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    assert np.array_equal(duplication_matrix(2), expected)


@pytest.mark.parametrize("m", range(1, 7))
def test_duplication_identity_exact(m, rng):
    D = duplication_matrix(m)
    assert D.shape == (m * m, m * (m + 1) // 2)
    for _ in range(50):
        S = random_symmetric(rng, m)
        assert np.array_equal(D @ vech(S), vec(S))


@given(st.integers(1, 6), st.data())
def test_vech_unvech_roundtrip(n, data):
    v = np.array(data.draw(st.lists(finite, min_size=n * (n + 1) // 2, max_size=n * (n + 1) // 2)))
    assert np.array_equal(vech(unvech(v)), v)
    S = unvech(v)
    assert np.array_equal(unvech(vech(S)), S)


def test_kron_examples():
    B = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(kron(np.array([[1.0]]), B), B)
    assert np.array_equal(kron(np.array([[1.0], [2.0]]), np.array([[3.0]])), [[3.0], [6.0]])


@given(arrays(float, (1, 4), elements=st.floats(-10, 10)), st.integers(0, 2**31 - 1))
def test_kron_row_preserves_rank(a, seed):
    if np.allclose(a, 0):
        return
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 4))
    assert numerical_rank(kron(a, M)).numerical_rank == numerical_rank(M).numerical_rank == 2


def test_numerical_rank_basic(rng):
    assert numerical_rank(np.eye(3)).numerical_rank == 3
    assert numerical_rank(np.zeros((3, 4))).numerical_rank == 0
    outer = np.outer(rng.standard_normal(5), rng.standard_normal(4))
    rep = numerical_rank(outer)
    assert rep.numerical_rank == 1
    assert np.all(np.diff(rep.singular_values) <= 0)
    assert rep.numerical_rank == int(np.sum(rep.singular_values > rep.tolerance_used))


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_numerical_rank_orthogonal_invariance(seed, r):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((6, r)) @ rng.standard_normal((r, 5))
    U, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    V, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    perm = rng.permutation(6)
    assert numerical_rank(U @ M @ V).numerical_rank == r
    assert numerical_rank(M[perm]).numerical_rank == r


def test_smallest_singular_pair_examples(rng):
    v, s = smallest_singular_pair(np.eye(2))
    assert s == pytest.approx(1.0)
    v, s = smallest_singular_pair(np.diag([2.0, 1.0, 0.0]))
    assert s == 0.0
    assert np.allclose(np.abs(v), [0, 0, 1])
    M = rng.standard_normal((8, 4))
    v, s = smallest_singular_pair(M)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.linalg.norm(M @ v) == pytest.approx(s)
    assert s ** 2 == pytest.approx(v @ M.T @ M @ v)
    U = rng.standard_normal((1000, 4))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    assert np.all(np.linalg.norm(U @ M.T, axis=1) >= s - 1e-12)


def test_smallest_singular_pair_sign_convention(rng):
    for _ in range(10):
        v, _ = smallest_singular_pair(rng.standard_normal((6, 3)))
        first = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
        assert first > 0


@settings(max_examples=40)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 6), st.integers(0, 6))
def test_pseudoinverse_moore_penrose(seed, rows, cols, r):
    rng = np.random.default_rng(seed)
    r = min(r, rows, cols)
    M = rng.standard_normal((rows, r)) @ rng.standard_normal((r, cols))
    P = pseudoinverse(M)
    scale = max(1.0, np.linalg.norm(M))
    assert np.allclose(M @ P @ M, M, atol=1e-8 * scale)
    assert np.allclose(P @ M @ P, P, atol=1e-8 * max(1.0, np.linalg.norm(P)))
    assert np.allclose((M @ P).T, M @ P, atol=1e-8)
    assert np.allclose((P @ M).T, P @ M, atol=1e-8)


def test_pseudoinverse_examples():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(pseudoinverse(A), np.linalg.inv(A))
    assert np.array_equal(pseudoinverse(np.zeros((3, 2))), np.zeros((2, 3)))


def test_null_space_basis_examples():
    assert null_space_basis(np.eye(3)) == []
    (b,) = null_space_basis(np.array([[1.0, 1.0]]))
    assert np.allclose(b, np.array([1.0, -1.0]) / np.sqrt(2))
