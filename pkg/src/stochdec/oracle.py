"""Brute-force ground truth.

Everything here enumerates. Nothing is clever on purpose: these functions are
what the fast paths get checked against, so they share no code with them
beyond field arithmetic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .gf import SparseCheckMatrix, all_vectors, syndrome
from .prob import JointDistribution
from .sumproduct import EmptyCosetError


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_terms: int = 10**7

    def __post_init__(self):
        if self.max_terms <= 0:
            raise ValueError("budget must be positive")

    def check(self, terms: int) -> None:
        if terms > self.max_terms:
            raise BudgetExceeded(f"{terms} terms exceed the oracle budget of {self.max_terms}")


DEFAULT_BUDGET = OracleBudget()


def map_error_joint(joint: JointDistribution, budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Exact MAP error of a finite decision problem, lowest-index ties."""
    m = joint.matrix
    budget.check(m.size)
    correct = 0.0
    for y in range(m.shape[1]):
        best = m[0, y]
        for x in range(1, m.shape[0]):
            if m[x, y] > best:
                best = m[x, y]
        correct += best
    return 1.0 - correct


def map_error_side_info(A: SparseCheckMatrix, prior, channel,
                        budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Exact block error of MAP decoding ``x`` from ``(y, Ax)``.

    ``x`` is memoryless with law ``prior``; ``y`` is ``x`` through the memoryless
    channel ``channel[x, y]``. Enumerates every ``(x, y)`` pair.
    """
    prior = np.asarray(prior, dtype=float)
    W = np.asarray(channel, dtype=float)
    q, n_out = W.shape
    budget.check(q ** A.n * n_out ** A.n)
    xs = np.concatenate(list(all_vectors(A.n, q, budget.max_terms)))
    px = np.prod(prior[xs], axis=1)
    cs = syndrome(A, xs)
    c_code = cs @ (q ** np.arange(A.l))
    correct = 0.0
    for y in itertools.product(range(n_out), repeat=A.n):
        pxy = px * np.prod(W[xs, np.array(y)], axis=1)
        best = np.zeros(c_code.max() + 1)
        np.maximum.at(best, c_code, pxy)
        correct += best.sum()
    return 1.0 - correct


def map_error_additive(A: SparseCheckMatrix, noise, budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Exact block error of MAP noise recovery from the syndrome ``Ae``.

    ``noise`` is the per-symbol law of ``e``. For a uniform ``x`` and
    ``y = x + e`` this equals the side-information MAP error, because the
    decoder's problem reduces to picking the likeliest ``e`` in the coset of
    ``A(x - y)``.
    """
    noise = np.asarray(noise, dtype=float)
    q = noise.size
    budget.check(q ** A.n)
    es = np.concatenate(list(all_vectors(A.n, q, budget.max_terms)))
    pe = np.prod(noise[es], axis=1)
    code = syndrome(A, es) @ (q ** np.arange(A.l))
    best = np.zeros(code.max() + 1)
    np.maximum.at(best, code, pe)
    return 1.0 - best.sum()


def posterior_sampling_error_additive(A: SparseCheckMatrix, noise,
                                      budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Exact block error when the decoder samples the constrained posterior."""
    noise = np.asarray(noise, dtype=float)
    q = noise.size
    budget.check(q ** A.n)
    es = np.concatenate(list(all_vectors(A.n, q, budget.max_terms)))
    pe = np.prod(noise[es], axis=1)
    code = syndrome(A, es) @ (q ** np.arange(A.l))
    mass = np.bincount(code, weights=pe)
    sq = np.bincount(code, weights=pe ** 2)
    nz = mass > 0
    # sum_c P(c) * (1 - sum_e p(e|c)^2)
    return float(1.0 - (sq[nz] / mass[nz]).sum())


def exact_map_block_error(instance, budget: OracleBudget = DEFAULT_BUDGET, **kw) -> float:
    """Dispatch: a :class:`JointDistribution`, or a check matrix together with
    ``noise=`` (additive) or ``prior=``/``channel=`` (side information)."""
    if isinstance(instance, JointDistribution):
        return map_error_joint(instance, budget)
    if "noise" in kw:
        return map_error_additive(instance, kw["noise"], budget)
    return map_error_side_info(instance, kw["prior"], kw["channel"], budget)


def exact_constrained_posterior(A: SparseCheckMatrix, c, y, model,
                                budget: OracleBudget = DEFAULT_BUDGET):
    """``(members, probs)`` of ``mu(x|y) chi(Ax = c)`` normalised over the coset,
    members in lexicographic order."""
    budget.check(A.q ** A.n)
    w = model.weights(y) if hasattr(model, "weights") else np.asarray(model, dtype=float)
    c = tuple(int(v) % A.q for v in c)
    members, probs = [], []
    for x in itertools.product(range(A.q), repeat=A.n):
        if tuple(syndrome(A, x).tolist()) != c:
            continue
        p = 1.0
        for j, v in enumerate(x):
            p *= w[j, v]
        members.append(x)
        probs.append(p)
    total = sum(probs)
    if not members or total <= 0:
        raise EmptyCosetError("coset is empty or carries no mass")
    return np.array(members, dtype=np.int64), np.array(probs) / total


def exact_sequence_error(joint: JointDistribution, proposal, t_bar: int,
                         budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Error of keeping the highest-posterior candidate among ``t_bar`` i.i.d.
    draws from ``proposal``, summed tuple by tuple."""
    q = np.asarray(getattr(proposal, "rows", proposal), dtype=float)
    m = joint.matrix
    nx, ny = m.shape
    budget.check(ny * nx ** t_bar)
    err = 0.0
    for y in range(ny):
        p_y = m[:, y].sum()
        if p_y == 0:
            continue
        post = m[:, y] / p_y
        for tup in itertools.product(range(nx), repeat=t_bar):
            w = 1.0
            for x in tup:
                w *= q[y, x]
            if w == 0:
                continue
            err += p_y * w * (1.0 - max(post[x] for x in tup))
    return err


def exact_encoder_mass(A: SparseCheckMatrix, B: SparseCheckMatrix, c, m, prior,
                       budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """``mu_X`` mass of ``{x : Ax = c, Bx = m}``; ``prior`` is a per-symbol law
    or a side-information-free :class:`~stochdec.models.SourceModel`."""
    budget.check(A.q ** A.n)
    w = (prior.weights() if hasattr(prior, "weights")
         else np.broadcast_to(np.asarray(prior, dtype=float), (A.n, A.q)))
    c = tuple(int(v) for v in c)
    m = tuple(int(v) for v in m)
    total = 0.0
    for x in itertools.product(range(A.q), repeat=A.n):
        if tuple(syndrome(A, x).tolist()) == c and tuple(syndrome(B, x).tolist()) == m:
            total += float(np.prod(w[np.arange(A.n), list(x)]))
    return total
