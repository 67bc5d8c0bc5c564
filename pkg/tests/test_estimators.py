import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from stochdec.codecs import BACKENDS
from stochdec.decision import LossFunction
from stochdec.estimators import (MALDecision, MAPDecision, PosteriorSamplingDecision,
                                 SequenceDecision, SyndromeCodec)
from stochdec.gf import random_tree_checks, syndrome
from stochdec.models import SourceModel, bsc
from stochdec.sumproduct import EmptyCosetError

REF = np.array([[0.4, 0.1], [0.1, 0.4]])


def test_params_and_clone():
    est = SequenceDecision(t_bar=3, random_state=7)
    assert est.get_params()["t_bar"] == 3
    c = clone(est)
    assert c.t_bar == 3 and c.random_state == 7
    c.set_params(t_bar=5)
    assert c.t_bar == 5 and est.t_bar == 3


@pytest.mark.parametrize("cls, expected", [(MAPDecision, 0.2), (PosteriorSamplingDecision, 0.32),
                                           (SequenceDecision, 0.224)])
def test_exact_error_rates(cls, expected):
    est = cls().fit_joint(REF)
    assert est.error_rate() == pytest.approx(expected, abs=1e-12)
    np.testing.assert_allclose(est.predict_proba([0, 1]).sum(axis=1), 1.0)


def test_sequence_law_matches_exact_error():
    est = SequenceDecision(t_bar=4).fit_joint(REF)
    law_err = 1 - np.einsum("xy,yx->", REF, est.law_)
    assert law_err == pytest.approx(est.error_rate(), abs=1e-12)


def test_fit_from_samples_recovers_joint():
    rng = np.random.default_rng(0)
    flat = rng.choice(4, size=20000, p=REF.ravel())
    states, obs = np.divmod(flat, 2)
    est = MAPDecision().fit(obs, states)
    np.testing.assert_allclose(est.joint_.matrix, REF, atol=0.02)
    np.testing.assert_array_equal(est.predict([0, 1]), [0, 1])
    assert est.score(obs, states) == pytest.approx(0.8, abs=0.02)


def test_smoothing_and_explicit_alphabet():
    est = MAPDecision(n_states=3, n_obs=2, alpha=1.0).fit([0, 0, 1], [0, 0, 1])
    assert est.joint_.matrix.shape == (3, 2)
    assert np.all(est.joint_.matrix > 0)


def test_mal_with_custom_loss():
    # calling state 1 "0" is very expensive, so the rule always says 1
    L = LossFunction(np.array([[0.0, 1.0], [10.0, 0.0]]))
    est = MALDecision(loss=L).fit_joint(REF)
    np.testing.assert_array_equal(est.predict([0, 1]), [1, 1])
    assert est.risk(L) == pytest.approx(0.5)


def test_posterior_sampling_predict_frequency():
    est = PosteriorSamplingDecision(random_state=3).fit_joint(REF)
    pred = est.predict(np.zeros(20000, dtype=int))
    assert abs(pred.mean() - 0.2) < 0.01


def test_sequence_predict_frequency():
    est = SequenceDecision(t_bar=2, random_state=1).fit_joint(REF)
    pred = est.predict(np.zeros(20000, dtype=int))
    assert abs(pred.mean() - 0.04) < 0.006


def test_decision_validation():
    with pytest.raises(NotFittedError):
        MAPDecision().predict([0])
    est = MAPDecision().fit_joint(REF)
    with pytest.raises(ValueError):
        est.predict([2])
    with pytest.raises(ValueError):
        MAPDecision().fit([0, 1], [0])
    with pytest.raises(ValueError):
        MAPDecision().fit([0.5], [0])
    with pytest.raises(ValueError):
        MAPDecision().fit([-1], [0])


@pytest.mark.parametrize("backend", BACKENDS)
def test_codec_roundtrip_with_side_information(backend):
    rng = np.random.default_rng(2)
    A = random_tree_checks(8, 4, 2, rng)
    codec = SyndromeCodec(A, prior=[0.5, 0.5], channel=bsc(0.02), backend=backend, kappa=100,
                          random_state=0).fit()
    X = rng.integers(2, size=(20, 8))
    Y = X ^ (rng.random(X.shape) < 0.02)
    C = codec.transform(X)
    np.testing.assert_array_equal(C, syndrome(A, X))
    Xh = codec.predict(C, Y)
    np.testing.assert_array_equal(syndrome(A, Xh), C)
    assert np.mean((Xh == X).all(axis=1)) >= 0.8


def test_codec_without_side_information_and_determinism():
    A = random_tree_checks(8, 4, 2, np.random.default_rng(4))
    codec = SyndromeCodec(A, prior=[0.9, 0.1], random_state=5).fit()
    assert codec.rate_ == pytest.approx(0.5 * np.log(2))
    C = codec.transform(np.zeros((3, 8), dtype=int))
    np.testing.assert_array_equal(codec.predict(C), codec.predict(C))
    np.testing.assert_array_equal(syndrome(A, codec.predict(C)), C)


def test_codec_validation():
    A = random_tree_checks(6, 3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        SyndromeCodec(A).fit()
    with pytest.raises(ValueError):
        SyndromeCodec(A, model=SourceModel.iid([0.5, 0.5], 5)).fit()
    with pytest.raises(NotFittedError):
        SyndromeCodec(A, prior=[0.5, 0.5]).transform(np.zeros((1, 6), int))
    side = SyndromeCodec(A, prior=[0.5, 0.5], channel=bsc(0.1)).fit()
    with pytest.raises(ValueError):
        side.predict(np.zeros((1, 3), int))
    with pytest.raises(ValueError):
        side.transform(np.zeros((1, 5), int))
    with pytest.raises(ValueError):
        side.predict(np.zeros((1, 2), int), np.zeros((1, 6), int))


def test_codec_reports_zero_mass_codewords():
    A = random_tree_checks(4, 2, 2, np.random.default_rng(1))
    codec = SyndromeCodec(A, prior=[1.0, 0.0]).fit()
    C = syndrome(A, np.ones((1, 4), int))
    if C.any():
        with pytest.raises(EmptyCosetError):
            codec.predict(C)
