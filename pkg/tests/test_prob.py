import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stochdec.prob import (Alphabet, ConditionalDistribution, FiniteDistribution,
                           JointDistribution, decompose, joint_variational_distance, sample,
                           sample_rows, variational_distance)


def test_decompose_reference(ref_joint):
    p_y, cond = decompose(ref_joint)
    np.testing.assert_allclose(p_y.probs, [0.5, 0.5])
    np.testing.assert_allclose(cond.rows, [[0.8, 0.2], [0.2, 0.8]])
    assert cond.defined.all()


def test_decompose_deterministic_coupling():
    _, cond = decompose(JointDistribution(np.diag([0.5, 0.5])))
    np.testing.assert_array_equal(cond.rows, np.eye(2))


def test_decompose_zero_column_marked_undefined():
    p_y, cond = decompose(JointDistribution(np.array([[0.6, 0.0], [0.4, 0.0]])))
    assert list(cond.defined) == [True, False]
    assert p_y.probs[1] == 0
    np.testing.assert_allclose(cond.rows[1], [0.5, 0.5])


@pytest.mark.parametrize("a,b,expected", [
    ((0.8, 0.2), (0.6, 0.4), 0.2),
    ((0.3, 0.7), (0.3, 0.7), 0.0),
    ((1.0, 0.0), (0.0, 1.0), 1.0),
])
def test_variational_distance_examples(a, b, expected):
    d = variational_distance(FiniteDistribution(a), FiniteDistribution(b))
    assert d == pytest.approx(expected, abs=1e-15)


def test_variational_distance_alphabet_mismatch():
    with pytest.raises(ValueError):
        variational_distance(FiniteDistribution([0.5, 0.5]), FiniteDistribution([1, 0, 0]))


probs3 = arrays(float, 4, elements=st.floats(0.01, 1.0)).map(lambda a: a / a.sum())


@given(probs3, probs3)
def test_variational_distance_is_max_event_gap(p, q):
    best = max(abs(p[list(s)].sum() - q[list(s)].sum())
               for r in range(5) for s in itertools.combinations(range(4), r))
    assert variational_distance(p, q) == pytest.approx(best, abs=1e-12)


def test_joint_vd_posterior_vs_map(ref_joint):
    p_y, cond = decompose(ref_joint)
    map_rows = np.eye(2)
    assert joint_variational_distance(cond, map_rows, p_y) == pytest.approx(0.2)
    assert joint_variational_distance(cond, cond, p_y) == 0


def test_joint_vd_ignores_zero_mass_rows():
    q = np.array([[0.5, 0.5], [1.0, 0.0]])
    q2 = np.array([[0.5, 0.5], [0.0, 1.0]])
    assert joint_variational_distance(q, q2, [1.0, 0.0]) == 0


def test_sample_point_mass(rng):
    assert all(sample(FiniteDistribution([0, 0, 1]), rng) == 2 for _ in range(100))


def test_sample_reproducible():
    d = FiniteDistribution([0.5, 0.5])
    r1, r2 = np.random.default_rng(7), np.random.default_rng(7)
    seq = [sample(d, r1) for _ in range(50)]
    assert seq == [sample(d, r2) for _ in range(50)]
    assert set(seq) == {0, 1}


def test_sample_frequency():
    u = np.random.default_rng(3).random(10**6)
    draws = sample_rows(np.broadcast_to([0.3, 0.7], (u.size, 2)), u)
    assert abs(draws.mean() - 0.7) < 0.005


def test_sample_rows_never_picks_zero_mass_tail():
    probs = np.array([[0.5, 0.5, 0.0]])
    assert sample_rows(probs, np.array([1.0 - 1e-17]))[0] == 1


def test_validation():
    with pytest.raises(ValueError):
        Alphabet(0)
    with pytest.raises(ValueError):
        FiniteDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        FiniteDistribution([-0.1, 1.1])
    with pytest.raises(ValueError):
        JointDistribution(np.array([[0.5, 0.5], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        ConditionalDistribution(np.array([[0.5, 0.4]]))


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_decompose_reassembles_joint(nx, ny, seed):
    joint = JointDistribution.random(nx, ny, np.random.default_rng(seed))
    p_y, cond = decompose(joint)
    np.testing.assert_allclose(cond.rows.T * p_y.probs, joint.matrix, atol=1e-15)
