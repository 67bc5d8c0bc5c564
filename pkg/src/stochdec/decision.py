"""Decision rules, their risk and error probability, and the bounds relating
stochastic rules to the optimal deterministic rule.

Every function takes a :class:`~stochdec.prob.JointDistribution`. Rules may be
passed as :class:`StochasticRule`, :class:`DeterministicRule` or a raw array of
shape ``(..., n_obs, n_states)``; leading axes are treated as a batch of rules
and the result is then an array instead of a float.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .prob import ConditionalDistribution, JointDistribution, decompose

CHECK_TOL = 1e-12
TIE_TOL = 1e-12
MAX_ENUMERATION = 10**7


class BoundViolation(AssertionError):
    """A bound that must hold by construction failed numerically."""


class LossConditionError(ValueError):
    """The loss lacks a structural property a bound relies on."""


class EnumerationTooLarge(ValueError):
    pass


def _loss_flags(m: np.ndarray) -> dict:
    finite = np.where(np.isfinite(m), m, np.inf)
    nonneg = bool(np.all(m >= 0))
    diag = np.diag(m)
    off = m[~np.eye(m.shape[0], dtype=bool)]
    zero_iff_equal = bool(np.all(diag == 0) and np.all(off != 0))
    symmetric = bool(np.array_equal(m, m.T))
    # L(x, z) <= L(x, w) + L(w, z) for all w
    via = np.min(finite[:, :, None] + finite[None, :, :], axis=1)
    subadditive = bool(np.all(finite <= via + CHECK_TOL))
    return dict(nonneg=nonneg, zero_iff_equal=zero_iff_equal,
                symmetric=symmetric, subadditive=subadditive)


class LossFunction:
    """Square loss matrix ``L[x, xhat]`` with its structural properties.

    Flags that are not declared are inferred from the matrix. A flag declared
    ``True`` that the matrix does not satisfy raises ``ValueError``.
    """

    def __init__(self, matrix, *, nonneg=None, zero_iff_equal=None,
                 symmetric=None, subadditive=None):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("loss matrix must be square")
        if np.any(np.isnan(m)):
            raise ValueError("loss matrix contains NaN")
        m.setflags(write=False)
        self.matrix = m
        actual = _loss_flags(m)
        declared = dict(nonneg=nonneg, zero_iff_equal=zero_iff_equal,
                        symmetric=symmetric, subadditive=subadditive)
        for name, value in declared.items():
            if value is None:
                declared[name] = actual[name]
            elif value and not actual[name]:
                raise ValueError(f"loss declared {name} but the matrix is not")
        self.flags = declared
        self.sup_loss = float(m.max())

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def zero_one(cls, n_states: int) -> "LossFunction":
        return cls(1.0 - np.eye(n_states))

    @classmethod
    def line_metric(cls, anchors) -> "LossFunction":
        """``L(x, xhat) = |a_x - a_xhat|`` for real anchor points ``a``."""
        a = np.asarray(anchors, dtype=float)
        return cls(np.abs(a[:, None] - a[None, :]))

    def require(self, *names: str) -> None:
        for name in names:
            if not self.flags[name]:
                raise LossConditionError(f"loss is not {name}")

    def require_finite_sup(self) -> float:
        self.require("nonneg")
        if not np.isfinite(self.sup_loss):
            raise LossConditionError("supremum of the loss is infinite")
        return self.sup_loss

    def __repr__(self):
        return f"LossFunction(n_states={self.n_states}, sup_loss={self.sup_loss})"


@dataclass(frozen=True, eq=False)
class DeterministicRule:
    f: np.ndarray

    def __post_init__(self):
        f = np.array(self.f, dtype=np.int64)
        if f.ndim != 1:
            raise ValueError("rule must map each observation to one state")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    def __call__(self, y):
        return self.f[y]

    def to_stochastic(self, n_states: int) -> "StochasticRule":
        q = np.zeros((self.f.size, n_states))
        q[np.arange(self.f.size), self.f] = 1.0
        return StochasticRule(ConditionalDistribution(q))


@dataclass(frozen=True, eq=False)
class StochasticRule:
    """Conditional law ``q(xhat|y)`` from which the guess is drawn."""

    q: ConditionalDistribution

    @property
    def rows(self) -> np.ndarray:
        return self.q.rows

    @classmethod
    def from_array(cls, rows) -> "StochasticRule":
        return cls(ConditionalDistribution(rows))

    @classmethod
    def random(cls, n_obs: int, n_states: int, rng: np.random.Generator,
               concentration: float = 1.0) -> "StochasticRule":
        return cls.from_array(rng.dirichlet(np.full(n_states, concentration), size=n_obs))


@dataclass(frozen=True, eq=False)
class SequenceDecisionConfig:
    t_bar: int
    proposal: StochasticRule

    def __post_init__(self):
        if int(self.t_bar) < 1:
            raise ValueError("t_bar must be >= 1")


def _rule_array(rule, joint: JointDistribution) -> np.ndarray:
    if isinstance(rule, DeterministicRule):
        rule = rule.to_stochastic(joint.n_states)
    if isinstance(rule, StochasticRule):
        rule = rule.rows
    elif isinstance(rule, ConditionalDistribution):
        rule = rule.rows
    q = np.asarray(rule, dtype=float)
    if q.shape[-2:] != (joint.n_obs, joint.n_states):
        raise ValueError(f"rule shape {q.shape} does not match joint "
                         f"({joint.n_obs} observations, {joint.n_states} states)")
    return q


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def _expected_loss(joint: JointDistribution, loss: LossFunction) -> np.ndarray:
    """``E[y, xhat] = sum_x p_XY(x, y) L(x, xhat)`` (unnormalised in y)."""
    if loss.n_states != joint.n_states:
        raise ValueError("loss and joint disagree on the state alphabet")
    with np.errstate(invalid="ignore"):
        prod = joint.matrix[:, :, None] * loss.matrix[:, None, :]
    prod = np.where(joint.matrix[:, :, None] > 0, prod, 0.0)
    return prod.sum(axis=0)


def _posterior_expected_loss(joint: JointDistribution, loss: LossFunction) -> np.ndarray:
    p_y, cond = decompose(joint)
    e = _expected_loss(joint, loss)
    out = np.zeros_like(e)
    d = cond.defined
    out[d] = e[d] / joint.matrix.sum(axis=0)[d][:, None]
    return out


def _argbest(values: np.ndarray, maximize: bool) -> np.ndarray:
    """Row-wise arg-opt; entries within TIE_TOL of the optimum count as ties
    and the lowest index wins."""
    v = values if maximize else -values
    best = v.max(axis=-1, keepdims=True)
    return np.argmax(v >= best - TIE_TOL, axis=-1)


def risk(joint: JointDistribution, rule, loss: LossFunction):
    """Expected loss of ``rule`` under ``joint``."""
    q = _rule_array(rule, joint)
    e = _expected_loss(joint, loss)
    with np.errstate(invalid="ignore"):
        terms = np.where(q > 0, q * e, 0.0)
    return _scalar(terms.sum(axis=(-1, -2)))


def error_probability(joint: JointDistribution, rule):
    """Probability that the guess differs from the state."""
    q = _rule_array(rule, joint)
    # sum_y sum_x p(x, y) (1 - q(x|y))
    hit = np.einsum("xy,...yx->...", joint.matrix, q)
    return _scalar(1.0 - hit)


def posterior_rule(joint: JointDistribution) -> StochasticRule:
    """The stochastic rule that samples the a-posteriori distribution."""
    return StochasticRule(decompose(joint)[1])


def mal_rule(joint: JointDistribution, loss: LossFunction) -> DeterministicRule:
    """Minimum posterior-expected-loss rule (index 0 on zero-mass observations)."""
    f = _argbest(_posterior_expected_loss(joint, loss), maximize=False)
    return DeterministicRule(f)


def map_rule(joint: JointDistribution) -> DeterministicRule:
    """Posterior argmax with lowest-index tie-break."""
    _, cond = decompose(joint)
    f = _argbest(cond.rows, maximize=True)
    f[~cond.defined] = 0
    return DeterministicRule(f)


def _mass_off_rule(joint, f: DeterministicRule, q: np.ndarray, power: int = 1):
    """``sum_y p_Y(y) [1 - q(f(y)|y)]^power``."""
    p_y = joint.matrix.sum(axis=0)
    hit = np.take_along_axis(q, np.broadcast_to(f.f[:, None], q.shape[:-1] + (1,)), axis=-1)[..., 0]
    return (p_y * np.clip(1.0 - hit, 0.0, None) ** power).sum(axis=-1)


def subadditive_risk_bound(joint: JointDistribution, rule, loss: LossFunction):
    """Risk of the optimal rule plus the expected loss between its decision and
    the stochastic guess. Needs a subadditive loss."""
    loss.require("subadditive")
    q = _rule_array(rule, joint)
    f = mal_rule(joint, loss)
    p_y = joint.matrix.sum(axis=0)
    l_from_opt = loss.matrix[f.f]  # (n_obs, n_states): L(f(y), xhat)
    with np.errstate(invalid="ignore"):
        terms = np.where(q > 0, q * l_from_opt, 0.0)
    extra = np.einsum("y,...yx->...", p_y, terms)
    return _scalar(risk(joint, f, loss) + extra)


def sup_loss_risk_bound(joint: JointDistribution, rule, loss: LossFunction):
    """Risk of the optimal rule plus ``sup L`` times the mass the stochastic
    rule puts off the optimal decision."""
    sup = loss.require_finite_sup()
    q = _rule_array(rule, joint)
    f = mal_rule(joint, loss)
    return _scalar(risk(joint, f, loss) + sup * _mass_off_rule(joint, f, q))


def error_upper_bound(joint: JointDistribution, rule):
    """0-1 specialisation of :func:`sup_loss_risk_bound`."""
    q = _rule_array(rule, joint)
    f = map_rule(joint)
    return _scalar(error_probability(joint, f) + _mass_off_rule(joint, f, q))


def two_factor_check(joint: JointDistribution, loss: LossFunction | None = None):
    """Return ``(risk of posterior sampling, optimal risk)`` and raise
    :class:`BoundViolation` unless the first is at most twice the second.

    With ``loss=None`` the 0-1 loss is used, i.e. error probabilities.
    """
    if loss is None:
        loss = LossFunction.zero_one(joint.n_states)
    loss.require("symmetric", "subadditive")
    risk_p = risk(joint, posterior_rule(joint), loss)
    risk_opt = risk(joint, mal_rule(joint, loss), loss)
    if risk_p > 2.0 * risk_opt + CHECK_TOL:
        raise BoundViolation(f"posterior-sampling risk {risk_p} exceeds 2 x {risk_opt}")
    return risk_p, risk_opt


def approximation_gap_bound(joint: JointDistribution, q, q2, loss: LossFunction | None = None):
    """``sup L`` times the joint variational distance of the two rules.

    Raises :class:`BoundViolation` if the actual risk gap exceeds it.
    """
    if loss is None:
        loss = LossFunction.zero_one(joint.n_states)
    sup = loss.require_finite_sup()
    a, b = _rule_array(q, joint), _rule_array(q2, joint)
    p_y = joint.matrix.sum(axis=0)
    bound = sup * 0.5 * np.einsum("y,...yx->...", p_y, np.abs(a - b))
    gap = np.abs(np.asarray(risk(joint, a, loss)) - np.asarray(risk(joint, b, loss)))
    if np.any(gap > bound + CHECK_TOL):
        raise BoundViolation(f"risk gap {np.max(gap)} exceeds variational bound")
    return _scalar(bound)


def approximate_posterior_error_bound(joint: JointDistribution, rule):
    """Twice the MAP error plus the joint variational distance between
    ``rule`` and the posterior."""
    q = _rule_array(rule, joint)
    p = posterior_rule(joint).rows
    p_y = joint.matrix.sum(axis=0)
    d = 0.5 * np.einsum("y,...yx->...", p_y, np.abs(q - p))
    return _scalar(2.0 * error_probability(joint, map_rule(joint)) + d)


def any_rule_check(joint: JointDistribution, rule):
    """Posterior sampling errs at most twice as often as ``rule``.

    Returns ``(Error(posterior), Error(rule))``.
    """
    e_p = error_probability(joint, posterior_rule(joint))
    e_q = np.asarray(error_probability(joint, rule))
    if np.any(e_p > 2.0 * e_q + CHECK_TOL):
        raise BoundViolation(f"posterior error {e_p} exceeds twice {np.min(e_q)}")
    return e_p, _scalar(e_q)


def tightness_identity(p0, p_y):
    """Both sides of the binary tightness construction, evaluated algebraically.

    For ``p0 = p(0|y) > 1/2`` the construction sets
    ``q(0|y) = p0**2 / (2 p0 - 1)``, which exceeds 1 unless ``p0 == 1``; it is
    therefore only evaluated as an identity, never sampled.

    Returns ``(Error(posterior), 2 * Error(q))`` written out term by term.
    """
    p0 = np.asarray(p0, dtype=float)
    w = np.asarray(p_y, dtype=float)
    if np.any(p0 <= 0.5):
        raise ValueError("construction needs p(0|y) > 1/2")
    q0 = p0 ** 2 / (2 * p0 - 1)
    lhs = float((w * (p0 * (1 - p0) + (1 - p0) * p0)).sum())
    rhs = float(2 * (w * p0 * (1 - q0)).sum() + 2 * (w * (1 - p0) * q0).sum())
    return lhs, rhs


# --- decisions over a random sequence of candidates -------------------------

def sequence_decide(y: int, samples: Sequence[int], joint: JointDistribution,
                    loss: LossFunction | None = None) -> int:
    """Pick the best sampled candidate for observation ``y``.

    Under the 0-1 loss (``loss=None``) this is the posterior argmax over the
    sampled states; otherwise the candidate with least posterior-expected loss.
    Ties go to the lowest state index.
    """
    samples = np.asarray(samples, dtype=np.int64)
    if samples.size == 0:
        raise ValueError("need at least one candidate")
    p_y, cond = decompose(joint)
    if not cond.defined[y]:
        raise ValueError(f"observation {y} has zero probability")
    cand = np.unique(samples)  # sorted, so ties resolve to the lowest index
    if loss is None:
        score = cond.rows[y, cand]
        return int(cand[_argbest(score, maximize=True)])
    score = _posterior_expected_loss(joint, loss)[y, cand]
    return int(cand[_argbest(score, maximize=False)])


def _proposal_list(joint, cfg_or_proposals) -> list[np.ndarray]:
    if isinstance(cfg_or_proposals, SequenceDecisionConfig):
        q = _rule_array(cfg_or_proposals.proposal, joint)
        return [q] * int(cfg_or_proposals.t_bar)
    return [_rule_array(p, joint) for p in cfg_or_proposals]


def sequence_risk_exact(joint: JointDistribution, cfg, loss: LossFunction | None = None,
                        max_terms: int = MAX_ENUMERATION) -> float:
    """Exact risk of the best-of-sequence decision.

    ``cfg`` is a :class:`SequenceDecisionConfig` (i.i.d. candidates) or a list
    of rules, one per position, describing an independent but not identically
    distributed candidate sequence.
    """
    if loss is None:
        loss = LossFunction.zero_one(joint.n_states)
    qs = _proposal_list(joint, cfg)
    k, t = joint.n_states, len(qs)
    if joint.n_obs * k ** t > max_terms:
        raise EnumerationTooLarge(f"{joint.n_obs} x {k}^{t} terms exceed {max_terms}")
    e = _expected_loss(joint, loss)  # (n_obs, k)
    total = 0.0
    for y in range(joint.n_obs):
        best = np.full((k,) * t, np.inf)
        prob = np.ones((k,) * t)
        for pos, q in enumerate(qs):
            shape = [1] * t
            shape[pos] = k
            best = np.minimum(best, e[y].reshape(shape))
            prob = prob * q[y].reshape(shape)
        total += float(np.where(prob > 0, prob * best, 0.0).sum())
    return total


def sequence_error_exact(joint: JointDistribution, cfg,
                         max_terms: int = MAX_ENUMERATION) -> float:
    """Exact error probability of the best-of-sequence decision."""
    return sequence_risk_exact(joint, cfg, None, max_terms)


@dataclass(frozen=True)
class IIDBound:
    """Upper bounds on the best-of-``t_bar`` risk for i.i.d. candidates.

    ``main`` uses the proposal's own mass on the optimal decision. The two
    weaker forms hold when the proposal is the posterior (``posterior_form``)
    or is at least as good as uniform (``uniform_form``).
    """

    main: float
    posterior_form: float
    uniform_form: float


def iid_bound(joint: JointDistribution, cfg: SequenceDecisionConfig,
              loss: LossFunction | None = None) -> IIDBound:
    if loss is None:
        loss = LossFunction.zero_one(joint.n_states)
        f = map_rule(joint)
    else:
        f = mal_rule(joint, loss)
    sup = loss.require_finite_sup()
    t = int(cfg.t_bar)
    q = _rule_array(cfg.proposal, joint)
    opt = risk(joint, f, loss)
    main = opt + sup * float(_mass_off_rule(joint, f, q, power=t))
    p_y, cond = decompose(joint)
    worst = float(cond.rows[cond.defined].max(axis=1).min())
    return IIDBound(main=main,
                    posterior_form=opt + sup * (1.0 - worst) ** t,
                    uniform_form=opt + sup * (1.0 - 1.0 / joint.n_states) ** t)


@dataclass(frozen=True)
class MarginalBoundReport:
    sequence_risk: float
    marginal_risks: tuple
    bound: float

    @property
    def holds(self) -> bool:
        return self.sequence_risk <= self.bound + CHECK_TOL


def marginal_bound_check(joint: JointDistribution, cfg, loss: LossFunction | None = None,
                         max_terms: int = MAX_ENUMERATION) -> MarginalBoundReport:
    """Best-of-sequence risk is no worse than the best single-position marginal.

    For independent candidates the position-``t`` marginal is the ``t``-th
    proposal itself.
    """
    if loss is None:
        loss = LossFunction.zero_one(joint.n_states)
    qs = _proposal_list(joint, cfg)
    seq = sequence_risk_exact(joint, qs, loss, max_terms)
    marg = tuple(float(risk(joint, q, loss)) for q in qs)
    report = MarginalBoundReport(seq, marg, min(marg))
    if not report.holds:
        raise BoundViolation(f"sequence risk {seq} exceeds best marginal {min(marg)}")
    return report
