import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from stochdec.gf import (EnumerationTooLarge, InfeasibleSystem, SparseCheckMatrix, coset_enumerate,
                         coset_members, feasible_point, inverse_mod, random_tree_checks, rank,
                         syndrome, to_systematic)

A3 = SparseCheckMatrix.from_dense([[1, 1, 0], [1, 0, 1]])


def test_syndrome_examples():
    np.testing.assert_array_equal(syndrome(A3, [1, 0, 1]), [1, 0])
    np.testing.assert_array_equal(syndrome(A3, [0, 0, 0]), [0, 0])
    A = SparseCheckMatrix.from_dense([[2, 1]], q=3)
    np.testing.assert_array_equal(syndrome(A, [1, 2]), [1])


def test_syndrome_batch_and_mismatch():
    X = np.array([[1, 0, 1], [1, 1, 1]])
    np.testing.assert_array_equal(syndrome(A3, X), [[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        syndrome(A3, [1, 0])


def test_matrix_validation():
    with pytest.raises(ValueError):
        SparseCheckMatrix(3, [[(0, 1)]], q=4)
    with pytest.raises(ValueError):
        SparseCheckMatrix(3, [[(3, 1)]], q=2)
    with pytest.raises(ValueError):
        SparseCheckMatrix(3, [[(0, 1), (0, 1)]], q=2)
    with pytest.raises(ValueError):
        SparseCheckMatrix(3, [[(0, 2)]], q=2)


def test_text_roundtrip(tmp_path):
    A = random_tree_checks(9, 3, 5, np.random.default_rng(0))
    text = A.dumps()
    assert text.splitlines()[0].split() == ["9", "3", "5"]
    B = SparseCheckMatrix.loads("# comment\n" + text)
    np.testing.assert_array_equal(A.to_dense(), B.to_dense())
    A.save(tmp_path / "a.txt")
    np.testing.assert_array_equal(SparseCheckMatrix.load(tmp_path / "a.txt").to_dense(), A.to_dense())
    with pytest.raises(ValueError):
        SparseCheckMatrix.loads("3 1 2\n2 0 1\n")


def test_inverse_mod():
    for q in (2, 3, 5, 7, 11):
        for a in range(1, q):
            assert a * inverse_mod(a, q) % q == 1


def test_coset_enumerate_examples():
    A = SparseCheckMatrix.from_dense([[1, 1]])
    assert coset_enumerate(A, [0]).tolist() == [[0, 0], [1, 1]]
    B = SparseCheckMatrix.from_dense([[1, 1], [1, 1]])
    assert len(coset_enumerate(B, [0, 1])) == 0
    C = SparseCheckMatrix.from_dense(np.eye(3, dtype=int))
    assert coset_enumerate(C, [1, 0, 1]).tolist() == [[1, 0, 1]]


def test_enumeration_guard():
    A = SparseCheckMatrix.from_dense(np.ones((1, 30), dtype=int))
    with pytest.raises(EnumerationTooLarge):
        coset_enumerate(A, [0], max_terms=1000)


def test_systematic_reference():
    sys = to_systematic(A3)
    np.testing.assert_array_equal(sys.abar, [[1], [1]])
    np.testing.assert_array_equal(sys.perm, [0, 1, 2])
    assert sys.l_red == 2 and sys.n_free == 1


def test_systematic_drops_redundant_rows():
    A = SparseCheckMatrix.from_dense([[1, 1, 0], [1, 1, 0], [0, 1, 1]])
    sys = to_systematic(A)
    assert sys.l_red == 2
    assert rank(A) == 2


def test_feasible_point_examples():
    sys = to_systematic(A3)
    np.testing.assert_array_equal(feasible_point(sys, [0, 0]), [0, 0, 0])
    np.testing.assert_array_equal(feasible_point(sys, [1, 0]), [0, 1, 0])
    B = SparseCheckMatrix.from_dense([[1, 1], [1, 1]])
    with pytest.raises(InfeasibleSystem):
        feasible_point(to_systematic(B), [0, 1])


def _random_matrix(seed, l, n, q):
    rng = np.random.default_rng(seed)
    M = rng.integers(q, size=(l, n))
    M[:, 0] = np.where(M.any(axis=1), M[:, 0], 1)
    return SparseCheckMatrix.from_dense(M, q), rng


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 5]), st.integers(1, 4))
def test_reduced_form_preserves_coset(seed, q, l):
    n = {2: 10, 3: 6, 5: 5}[q]
    A, rng = _random_matrix(seed, l, n, q)
    x = rng.integers(q, size=n)
    c = syndrome(A, x)
    sys = to_systematic(A)
    brute = coset_enumerate(A, c)
    np.testing.assert_array_equal(coset_members(sys, c), brute)
    assert len(brute) == q ** (n - rank(A))
    # the reduced system has identity on its parity columns
    R = sys.reduced_matrix()
    np.testing.assert_array_equal(R[:, sys.n_free:], np.eye(sys.l_red, dtype=R.dtype))
    assert sys.is_consistent(c)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_consistency_matches_enumeration(seed, q):
    A, rng = _random_matrix(seed, 4, 6, q)
    c = rng.integers(q, size=4)
    sys = to_systematic(A)
    assert sys.is_consistent(c) == (len(coset_enumerate(A, c)) > 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 5]))
def test_random_tree_checks_are_forests(seed, q):
    rng = np.random.default_rng(seed)
    A = random_tree_checks(12, 4, q, rng)
    assert rank(A) == 4
    # bipartite variable/check graph is a forest iff edges = nodes - components
    H = (A.to_dense() != 0).astype(int)
    adj = np.block([[np.zeros((12, 12), int), H.T], [H, np.zeros((4, 4), int)]])
    n_comp, _ = connected_components(csr_matrix(adj), directed=False)
    assert H.sum() == 16 - n_comp


def test_vstack():
    A = SparseCheckMatrix.from_dense([[1, 0, 1]])
    B = SparseCheckMatrix.from_dense([[0, 1, 1]])
    np.testing.assert_array_equal(A.vstack(B).to_dense(), [[1, 0, 1], [0, 1, 1]])
