import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from tpir import linalg


def gl_order(n, q):
    """|GL(n,q)| by the classical product formula."""
    total = 1
    for i in range(n):
        total *= q**n - q**i
    return total


@pytest.mark.parametrize("n,q,expected", [(1, 2, 1), (2, 2, 6), (3, 2, 168), (2, 3, 48)])
def test_count_full_rank_small(n, q, expected):
    assert linalg.count_full_rank(n, q) == expected
    assert gl_order(n, q) == expected
    mats = list(linalg.enumerate_full_rank(n, q))
    assert len(mats) == expected
    for m in mats:
        assert linalg.rank(m, q) == n


@st.composite
def square_matrix(draw):
    q = draw(st.sampled_from([2, 3, 5, 11, 101]))
    n = draw(st.integers(1, 6))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return rng.integers(0, q, size=(n, n)), q


@given(square_matrix())
def test_invert_round_trip(mq):
    a, q = mq
    n = a.shape[0]
    try:
        inv = linalg.invert(a, q)
    except linalg.SingularMatrixError as e:
        assert e.rank < n
        return
    assert np.array_equal(linalg.mat_mul(a, inv, q), np.eye(n, dtype=np.int64))
    assert np.array_equal(linalg.mat_mul(inv, a, q), np.eye(n, dtype=np.int64))


@given(square_matrix(), st.integers(0, 2**32 - 1))
def test_solve_matches_multiplication(mq, seed):
    a, q = mq
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.integers(0, q, size=(n, 2))
    rhs = linalg.mat_mul(a, x, q)
    try:
        got = linalg.solve(a, rhs, q)
    except linalg.SingularMatrixError:
        assert linalg.rank(a, q) < n
        return
    assert np.array_equal(got, x)


@given(square_matrix(), st.integers(0, 2**32 - 1))
def test_rank_invariant_under_row_permutation(mq, seed):
    a, q = mq
    rng = np.random.default_rng(seed)
    perm = rng.permutation(a.shape[0])
    assert linalg.rank(a, q) == linalg.rank(a[perm], q)


def test_mat_mul_matches_python_bigint():
    # exercise the large-q object-dtype path against exact Python ints
    q = (1 << 62) - 57  # prime-ish size irrelevant; only reduction matters
    rng = np.random.default_rng(0)
    a = rng.integers(0, q, size=(4, 5)).astype(object)
    b = rng.integers(0, q, size=(5, 3)).astype(object)
    got = linalg.mat_mul(a, b, q)
    want = [[sum(int(a[i, k]) * int(b[k, j]) for k in range(5)) % q
             for j in range(3)] for i in range(4)]
    assert [[int(x) for x in row] for row in got.tolist()] == want


@pytest.mark.parametrize("n,q", [(2, 2), (2, 3), (3, 2)])
def test_sampler_output_always_invertible(n, q):
    rng = np.random.default_rng(7)
    for _ in range(200):
        m = linalg.sample_uniform_full_rank(n, q, rng)
        assert linalg.rank(m, q) == n


@pytest.mark.parametrize("n,q", [(2, 2), (2, 3)])
def test_sampler_uniform_over_group(n, q):
    """Chi-square goodness of fit against the uniform distribution on GL(n,q)."""
    group = {m.tobytes(): 0 for m in linalg.enumerate_full_rank(n, q)}
    size = len(group)
    draws = 300 * size
    rng = np.random.default_rng(123)
    for _ in range(draws):
        group[linalg.sample_uniform_full_rank(n, q, rng).tobytes()] += 1
    counts = np.array(list(group.values()))
    assert counts.sum() == draws
    _, p = stats.chisquare(counts)
    assert p > 1e-4, f"GL({n},{q}) sample counts not uniform: p={p}"


def test_sampler_huge_dimension_smoke():
    rng = np.random.default_rng(1)
    m = linalg.sample_uniform_full_rank(64, 65537, rng)
    assert linalg.rank(m, 65537) == 64


@given(square_matrix())
def test_serialize_round_trip(mq):
    a, q = mq
    buf = linalg.serialize_matrix(a, q)
    assert np.array_equal(linalg.deserialize_matrix(buf, q), a % q)


def test_singular_error_carries_rank():
    a = np.array([[1, 2], [2, 4]])
    with pytest.raises(linalg.SingularMatrixError) as exc:
        linalg.invert(a, 5)
    assert exc.value.rank == 1


def test_enumerate_guard():
    with pytest.raises(ValueError):
        list(linalg.enumerate_full_rank(4, 7))
