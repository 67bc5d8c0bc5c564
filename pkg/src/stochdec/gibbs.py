"""Constrained random-number generation by single-site Gibbs sampling.

The check matrix is brought to systematic form ``[Abar | I]``. A move picks a
free coordinate ``j``, redraws it from its full conditional and rewrites the
parity coordinates it feeds, so every visited vector stays in the coset.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gf import SystematicForm, coset_members, feasible_point
from .prob import sample as draw
from .sumproduct import EmptyCosetError


def _log(w):
    with np.errstate(divide="ignore"):
        return np.log(w)


@dataclass
class GibbsState:
    """Chain state in original coordinates.

    The log-posterior is kept as a finite part plus a count of zero-mass
    factors, so that ``log_posterior`` is ``-inf`` exactly when some factor is
    zero and the bookkeeping never produces ``nan``.
    """

    x: np.ndarray
    log_finite: float
    n_zero: int
    best_log: float
    x_max: np.ndarray
    k: int = 0
    kappa: int | None = None
    rejected: int = 0
    visited_best: float = field(default=-np.inf)
    zero_start: bool = False

    @property
    def log_posterior(self) -> float:
        return -np.inf if self.n_zero else self.log_finite


class _Moves:
    """Per-free-coordinate update tables for one systematic form."""

    def __init__(self, sys: SystematicForm):
        self.sys = sys
        self.free = sys.free_cols
        self.touch = []  # for free slot s: (parity columns, coefficients)
        for s in range(sys.n_free):
            rows = np.flatnonzero(sys.abar[:, s])
            self.touch.append((sys.parity_cols[rows], sys.abar[rows, s].astype(np.int64)))


def _log_terms(logw, cols, vals):
    v = logw[cols, vals]
    finite = v[np.isfinite(v)]
    return float(finite.sum()), int(v.size - finite.size)


def gibbs_init(sys: SystematicForm, c, y, model, kappa: int | None = None) -> GibbsState:
    """Start at the coset member with all free coordinates zero.

    A zero-mass starting point is allowed (the chain can move off it) and is
    reported through ``zero_start``.
    """
    x = feasible_point(sys, c)
    w = model.weights(y) if hasattr(model, "weights") else np.asarray(model, dtype=float)
    lf, nz = _log_terms(_log(w), np.arange(sys.n), x)
    lam = -np.inf if nz else lf
    return GibbsState(x=x, log_finite=lf, n_zero=nz, best_log=lam, x_max=x.copy(),
                      kappa=kappa, visited_best=lam, zero_start=bool(nz))


def _conditional(moves: _Moves, logw, x, s):
    """Log-weights of every candidate value for free slot ``s`` and the parity
    values each candidate implies."""
    q = moves.sys.q
    j = moves.free[s]
    pcols, coefs = moves.touch[s]
    cand = np.arange(q)
    # v_{i,j}(a) = x_i + coef * (x_j - a)
    implied = (x[pcols][None, :] + coefs[None, :] * (x[j] - cand[:, None])) % q
    lg = logw[j, cand] + logw[pcols[None, :], implied].sum(axis=1)
    return lg, implied


def gibbs_step(state: GibbsState, sys: SystematicForm, y, model, rng: np.random.Generator,
               *, incumbent: str = "max", site: int | None = None, _cache=None) -> GibbsState:
    """One move of the chain (in place; the state is also returned).

    ``incumbent="max"`` keeps the highest-posterior vector seen;
    ``incumbent="min"`` reproduces the literal ``Lambda < Lambda_max`` test.
    """
    if sys.n_free == 0:
        state.k += 1
        return state
    moves, logw = _cache if _cache is not None else (_Moves(sys), _log(
        model.weights(y) if hasattr(model, "weights") else np.asarray(model, dtype=float)))
    s = int(rng.integers(sys.n_free)) if site is None else int(site)
    j = moves.free[s]
    pcols, _ = moves.touch[s]
    cols = np.concatenate([[j], pcols])
    old_f, old_z = _log_terms(logw, cols, state.x[cols])
    lg, implied = _conditional(moves, logw, state.x, s)
    state.k += 1
    if not np.any(np.isfinite(lg)):
        state.rejected += 1
        return state
    nu = np.exp(lg - lg.max())
    a = draw(nu / nu.sum(), rng)
    state.x[j] = a
    state.x[pcols] = implied[a]
    new_f, new_z = _log_terms(logw, cols, state.x[cols])
    state.log_finite += new_f - old_f
    state.n_zero += new_z - old_z
    lam = state.log_posterior
    state.visited_best = max(state.visited_best, lam)
    better = lam > state.best_log if incumbent == "max" else lam < state.best_log
    if better:
        state.best_log = lam
        state.x_max = state.x.copy()
    return state


def gibbs_run(sys: SystematicForm, c, y, model, kappa: int, rng: np.random.Generator,
              mode: str = "max", *, incumbent: str = "max", sweep: bool = False,
              return_state: bool = False):
    """Run ``kappa`` moves.

    ``mode="max"`` returns the best vector visited (best-of-sequence decision);
    ``mode="raw"`` returns the final state, an approximate draw from the
    constrained law. ``sweep=True`` visits free slots cyclically instead of at
    random, for diagnostics.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if mode not in ("max", "raw"):
        raise ValueError(f"unknown mode {mode!r}")
    state = gibbs_init(sys, c, y, model, kappa)
    w = model.weights(y) if hasattr(model, "weights") else np.asarray(model, dtype=float)
    cache = (_Moves(sys), _log(w))
    for t in range(kappa):
        site = (t % sys.n_free) if (sweep and sys.n_free) else None
        gibbs_step(state, sys, y, model, rng, incumbent=incumbent, site=site, _cache=cache)
    out = state.x_max if mode == "max" else state.x
    return (out.copy(), state) if return_state else out.copy()


def transition_matrix(sys: SystematicForm, c, y, model, max_states: int = 4096):
    """Explicit one-move transition matrix over the coset.

    Returns ``(members, P)`` with members sorted lexicographically and
    ``P[a, b]`` the probability of moving from member ``a`` to member ``b``.
    """
    members = coset_members(sys, c, max_terms=max_states)
    if members.shape[0] == 0:
        raise EmptyCosetError("empty coset")
    if members.shape[0] > max_states:
        raise ValueError(f"coset of size {members.shape[0]} exceeds {max_states}")
    index = {m.tobytes(): i for i, m in enumerate(members)}
    w = model.weights(y) if hasattr(model, "weights") else np.asarray(model, dtype=float)
    moves, logw = _Moves(sys), _log(w)
    size = members.shape[0]
    P = np.zeros((size, size))
    if sys.n_free == 0:
        return members, np.eye(size)
    for a, x in enumerate(members):
        for s in range(sys.n_free):
            lg, implied = _conditional(moves, logw, x, s)
            if not np.any(np.isfinite(lg)):
                P[a, a] += 1.0 / sys.n_free
                continue
            nu = np.exp(lg - lg.max())
            nu /= nu.sum()
            j, pcols = moves.free[s], moves.touch[s][0]
            for val in range(sys.q):
                if nu[val] == 0:
                    continue
                x2 = x.copy()
                x2[j] = val
                x2[pcols] = implied[val]
                P[a, index[x2.tobytes()]] += nu[val] / sys.n_free
    return members, P


def chain_distribution_oracle(sys: SystematicForm, c, y, model, k: int, max_states: int = 4096):
    """Exact law of the chain after ``k`` moves from :func:`gibbs_init`'s start."""
    members, P = transition_matrix(sys, c, y, model, max_states)
    start = feasible_point(sys, c)
    dist = np.zeros(members.shape[0])
    dist[np.flatnonzero(np.all(members == start, axis=1))[0]] = 1.0
    for _ in range(k):
        dist = dist @ P
    return members, dist
