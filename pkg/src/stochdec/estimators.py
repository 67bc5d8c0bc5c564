"""scikit-learn style estimators over the functional core.

Decision rules treat the observation as the single feature and the hidden
state as the class label. Codecs treat a block as a row of ``X``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from . import codecs
from .decision import (LossFunction, SequenceDecisionConfig, _argbest, _posterior_expected_loss,
                       error_probability, risk, sequence_error_exact)
from .gf import SparseCheckMatrix, syndrome
from .models import SourceModel
from .prob import JointDistribution, decompose, sample_rows
from .sumproduct import ScheduleConfig


def _labels(a, name) -> np.ndarray:
    a = check_array(np.asarray(a).reshape(-1, 1), dtype=None, ensure_all_finite=True)
    a = a.ravel()
    if not np.issubdtype(a.dtype, np.integer):
        if np.any(a != np.round(a)):
            raise ValueError(f"{name} must hold integer symbols")
        a = a.astype(np.int64)
    if np.any(a < 0):
        raise ValueError(f"{name} must be non-negative")
    return a


class _DecisionBase(ClassifierMixin, BaseEstimator):
    """Fits a joint law from (observation, state) pairs or takes one directly.

    ``alpha`` is additive smoothing on the count table.
    """

    def __init__(self, n_states=None, n_obs=None, alpha=0.0):
        self.n_states = n_states
        self.n_obs = n_obs
        self.alpha = alpha

    def fit(self, X, y, sample_weight=None):
        obs = _labels(X, "X")
        states = _labels(y, "y")
        if obs.size != states.size:
            raise ValueError("X and y have different lengths")
        nx = self.n_states or int(states.max()) + 1
        ny = self.n_obs or int(obs.max()) + 1
        counts = np.full((nx, ny), float(self.alpha))
        w = np.ones(obs.size) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        np.add.at(counts, (states, obs), w)
        return self.fit_joint(JointDistribution(counts / counts.sum()))

    def fit_joint(self, joint):
        if not isinstance(joint, JointDistribution):
            joint = JointDistribution(np.asarray(joint, dtype=float))
        self.joint_ = joint
        p_y, cond = decompose(joint)
        self.p_y_ = p_y.probs
        self.posterior_ = cond.rows
        self.classes_ = np.arange(joint.n_states)
        self._fit_rule()
        return self

    def _fit_rule(self):
        pass

    def _obs(self, X):
        check_is_fitted(self, "joint_")
        obs = _labels(X, "X")
        if np.any(obs >= self.joint_.n_obs):
            raise ValueError("observation outside the fitted alphabet")
        return obs

    def predict_proba(self, X):
        """Law of the decision given each observation."""
        obs = self._obs(X)
        return self.rule_rows_()[obs]

    def rule_rows_(self) -> np.ndarray:
        raise NotImplementedError

    def error_rate(self) -> float:
        """Exact error probability under the fitted joint law."""
        check_is_fitted(self, "joint_")
        return float(error_probability(self.joint_, self.rule_rows_()))

    def risk(self, loss: LossFunction) -> float:
        check_is_fitted(self, "joint_")
        return float(risk(self.joint_, self.rule_rows_(), loss))


class MALDecision(_DecisionBase):
    """Deterministic rule minimising posterior expected loss (0-1 loss by
    default, which gives the MAP rule)."""

    def __init__(self, loss=None, n_states=None, n_obs=None, alpha=0.0):
        super().__init__(n_states, n_obs, alpha)
        self.loss = loss

    def _fit_rule(self):
        loss = self.loss if self.loss is not None else LossFunction.zero_one(self.joint_.n_states)
        if not isinstance(loss, LossFunction):
            loss = LossFunction(loss)
        self.loss_ = loss
        self.decisions_ = _argbest(_posterior_expected_loss(self.joint_, loss), maximize=False)

    def rule_rows_(self):
        return np.eye(self.joint_.n_states)[self.decisions_]

    def predict(self, X):
        obs = self._obs(X)
        return self.decisions_[obs]


class MAPDecision(MALDecision):
    """Most probable state given the observation, lowest index on ties."""

    def __init__(self, n_states=None, n_obs=None, alpha=0.0):
        super().__init__(None, n_states, n_obs, alpha)

    def _fit_rule(self):
        self.loss_ = LossFunction.zero_one(self.joint_.n_states)
        self.decisions_ = _argbest(self.joint_.matrix.T, maximize=True)


class PosteriorSamplingDecision(_DecisionBase):
    """Answers with a draw from the posterior of the state."""

    def __init__(self, n_states=None, n_obs=None, alpha=0.0, random_state=None):
        super().__init__(n_states, n_obs, alpha)
        self.random_state = random_state

    def rule_rows_(self):
        return self.posterior_

    def predict(self, X):
        obs = self._obs(X)
        rng = check_random_state(self.random_state)
        return sample_rows(self.posterior_[obs], rng.random_sample(obs.size))


class SequenceDecision(_DecisionBase):
    """Draws ``t_bar`` candidates from ``proposal`` (the posterior by default)
    and answers with the one of highest posterior probability."""

    def __init__(self, t_bar=2, proposal=None, n_states=None, n_obs=None, alpha=0.0,
                 random_state=None):
        super().__init__(n_states, n_obs, alpha)
        self.t_bar = t_bar
        self.proposal = proposal
        self.random_state = random_state

    def _fit_rule(self):
        prop = self.posterior_ if self.proposal is None else np.asarray(
            getattr(self.proposal, "rows", self.proposal), dtype=float)
        self.config_ = SequenceDecisionConfig(int(self.t_bar), prop)
        # exact law of the kept candidate, built from the CDF of the best rank
        nx = self.joint_.n_states
        law = np.zeros_like(prop)
        rank = np.zeros(prop.shape, dtype=np.int64)
        for y in range(self.joint_.n_obs):
            order = np.argsort(-self.posterior_[y], kind="stable")
            rank[y, order] = np.arange(nx)
            tail = np.concatenate([np.cumsum(prop[y, order][::-1])[::-1], [0.0]])
            law[y, order] = tail[:nx] ** self.t_bar - tail[1:] ** self.t_bar
        self.law_ = law
        self.rank_ = rank

    def rule_rows_(self):
        return self.law_

    def error_rate(self) -> float:
        check_is_fitted(self, "joint_")
        return float(sequence_error_exact(self.joint_, self.config_))

    def predict(self, X):
        obs = self._obs(X)
        rng = check_random_state(self.random_state)
        prop = self.config_.proposal
        draws = np.stack([sample_rows(prop[obs], rng.random_sample(obs.size))
                          for _ in range(self.config_.t_bar)], axis=1)
        # lowest rank = highest posterior, lowest index among ties
        r = self.rank_[obs[:, None], draws]
        return draws[np.arange(obs.size), np.argmin(r, axis=1)]


class SyndromeCodec(TransformerMixin, BaseEstimator):
    """Syndrome compression with a stochastic decoder.

    ``transform`` maps blocks to codewords ``Ax``. ``predict(C, side_info)``
    reproduces blocks from codewords, using decoder side information when a
    ``channel`` is given (``channel[x, y]``) and the prior alone otherwise.
    A ready-made :class:`SourceModel` may be passed as ``model`` instead.
    """

    def __init__(self, check_matrix=None, prior=None, channel=None, model=None,
                 backend="sumproduct", kappa=200, gibbs_mode="raw", t_bar=1, schedule=None,
                 random_state=None):
        self.check_matrix = check_matrix
        self.prior = prior
        self.channel = channel
        self.model = model
        self.backend = backend
        self.kappa = kappa
        self.gibbs_mode = gibbs_mode
        self.t_bar = t_bar
        self.schedule = schedule
        self.random_state = random_state

    def fit(self, X=None, y=None):
        A = self.check_matrix
        if not isinstance(A, SparseCheckMatrix):
            A = SparseCheckMatrix.from_dense(np.asarray(A))
        if self.model is not None:
            model = self.model
        elif self.prior is None:
            raise ValueError("give either model or prior")
        elif self.channel is None:
            model = SourceModel.iid(self.prior, A.n)
        else:
            model = SourceModel.from_channel(self.prior, self.channel, A.n)
        if model.n != A.n or model.q != A.q:
            raise ValueError("model does not match the check matrix")
        self.A_ = A
        self.model_ = model
        self.options_ = codecs.DecoderOptions(
            self.backend, self.schedule or ScheduleConfig(), self.kappa, self.gibbs_mode, self.t_bar)
        self.rate_ = A.l * np.log(A.q) / A.n
        return self

    def _blocks(self, X, name):
        X = check_array(X, dtype=np.int64)
        if X.shape[1] != self.A_.n:
            raise ValueError(f"{name} must have {self.A_.n} columns")
        return X

    def transform(self, X):
        check_is_fitted(self, "A_")
        return syndrome(self.A_, self._blocks(X, "X") % self.A_.q)

    def predict(self, C, side_info=None):
        check_is_fitted(self, "A_")
        C = check_array(C, dtype=np.int64)
        if C.shape[1] != self.A_.l:
            raise ValueError(f"codewords must have {self.A_.l} columns")
        rng = np.random.default_rng(check_random_state(self.random_state).randint(2**32 - 1))
        if side_info is None:
            if self.model_.n_obs != 1:
                raise ValueError("this codec needs side information")
            Y = np.zeros((C.shape[0], self.A_.n), dtype=np.int64)
        else:
            Y = self._blocks(side_info, "side_info")
            if Y.shape[0] != C.shape[0]:
                raise ValueError("side_info and C have different lengths")
        W = self.model_.table[np.arange(self.A_.n), Y]  # (B, n, q)
        opts = self.options_
        if opts.backend == "sumproduct" and opts.t_bar == 1:
            X, feasible = codecs.decode_batch(self.A_, C, W, rng.random(Y.shape),
                                              opts.schedule)
            if not feasible.all():
                raise codecs.EmptyCosetError(
                    f"{int((~feasible).sum())} codewords have no positive-mass preimage")
            return X
        return np.stack([codecs.constrained_decode(self.A_, c, w, opts, rng)
                         for c, w in zip(C, W)])
