"""Constrained random-number generation by sequential sum-product sampling.

Symbols are drawn one at a time in column order. Before drawing ``x_k`` the
already drawn prefix is absorbed into the check targets, and the marginal of
``x_k`` on the remaining factor graph (channel factors times parity checks) is
computed by message passing. On a loop-free remaining graph that marginal is
exact and so is the law of the whole output vector.

All message arrays carry a leading batch axis ``B``: every batch member has its
own targets and channel factors, which is how many trials are decoded at once.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .gf import MAX_ENUMERATION, SparseCheckMatrix, _eliminate, all_vectors, syndrome
from .prob import FiniteDistribution, sample_rows


class EmptyCosetError(ValueError):
    """The constrained law has no mass: no positive-weight ``x`` with ``Ax = c``."""


@dataclass(frozen=True)
class ScheduleConfig:
    """Message schedule.

    ``mode`` is ``"tree"`` (single collect pass, loops are an error),
    ``"flooding"`` (parallel updates until the largest change is below
    ``epsilon``), or ``"auto"`` (tree on loop-free components, flooding
    otherwise).
    """

    mode: str = "auto"
    max_iterations: int = 50
    epsilon: float = 1e-8
    damping: float = 0.0

    def __post_init__(self):
        if self.mode not in ("auto", "tree", "flooding"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 <= self.damping < 1:
            raise ValueError("damping must lie in [0, 1)")


class MarginalResult(NamedTuple):
    probs: np.ndarray     # (B, q); all-zero rows where ``feasible`` is False
    feasible: np.ndarray  # (B,)
    exact: bool           # component of the variable was loop-free
    converged: bool
    iterations: int


def _normalize_log(lg: np.ndarray) -> np.ndarray:
    m = lg.max(axis=-1, keepdims=True)
    ok = np.isfinite(m)
    p = np.exp(lg - np.where(ok, m, 0.0))
    p = np.where(ok, p, 0.0)
    s = p.sum(axis=-1, keepdims=True)
    return p / np.where(s > 0, s, 1.0)


def _normalize(p: np.ndarray) -> np.ndarray:
    s = p.sum(axis=-1, keepdims=True)
    return p / np.where(s > 0, s, 1.0)


def _log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def _scaled(p: np.ndarray, a: int, q: int) -> np.ndarray:
    """Law of ``a * x`` given the law of ``x``."""
    out = np.empty_like(p)
    out[:, (a * np.arange(q)) % q] = p
    return out


def _cyclic_conv(p: np.ndarray, r: np.ndarray, q: int) -> np.ndarray:
    """Law of ``u + v (mod q)`` for independent ``u ~ p``, ``v ~ r``."""
    out = np.zeros_like(p)
    for t in range(q):
        out += p[:, t:t + 1] * np.roll(r, t, axis=1)
    return out


class FactorGraph:
    """Channel factors and parity checks, with a growing frozen prefix.

    Freezing ``x_j = v`` moves ``a_ij * v`` to the right-hand side of every
    check touching ``j``; a check left without free variables is retired and,
    if its residual target is nonzero, marks that batch member infeasible.
    """

    def __init__(self, A: SparseCheckMatrix, targets, unary):
        self.A, self.q, self.n = A, A.q, A.n
        unary = np.asarray(unary, dtype=float)
        if unary.ndim == 2:
            unary = unary[None]
        targets = np.asarray(targets, dtype=np.int64) % self.q
        if targets.ndim == 1:
            targets = np.broadcast_to(targets, (unary.shape[0], A.l))
        if unary.shape[1:] != (self.n, self.q) or targets.shape[1] != A.l:
            raise ValueError("unary factors / targets do not match the matrix")
        if targets.shape[0] != unary.shape[0]:
            if unary.shape[0] == 1:
                unary = np.broadcast_to(unary, (targets.shape[0],) + unary.shape[1:])
            else:
                raise ValueError("batch sizes of targets and unary factors differ")
        self.B = unary.shape[0]
        self.log_unary = _log(unary)
        self.residual = np.array(targets)
        self.frozen = np.zeros(self.n, dtype=bool)
        self.values = np.zeros((self.B, self.n), dtype=np.int64)
        self.violated = np.zeros(self.B, dtype=bool)
        self._col_rows = A.column_rows()
        self._free_count = np.array([c.size for c, _ in A.rows])
        self._check_vars = [list(zip(c.tolist(), a.tolist())) for c, a in A.rows]

    def freeze(self, j: int, values) -> None:
        if self.frozen[j]:
            raise ValueError(f"variable {j} already frozen")
        values = np.asarray(values, dtype=np.int64)
        for i, a in self._col_rows[j]:
            self.residual[:, i] = (self.residual[:, i] - a * values) % self.q
            self._free_count[i] -= 1
            if self._free_count[i] == 0:
                self.violated |= self.residual[:, i] != 0
        self.frozen[j] = True
        self.values[:, j] = values

    def _active_checks(self, v: int):
        return [(i, a) for i, a in self._col_rows[v] if self._free_count[i] > 0]

    def _active_vars(self, i: int):
        return [(u, a) for u, a in self._check_vars[i] if not self.frozen[u]]

    def component(self, j: int):
        """BFS over the active graph from ``j``; returns visit order, parents
        and whether the component is a tree."""
        order = [("v", j)]
        parent = {("v", j): None}
        edges = 0
        queue = deque([("v", j)])
        while queue:
            kind, node = queue.popleft()
            nbrs = ([("f", i) for i, _ in self._active_checks(node)] if kind == "v"
                    else [("v", u) for u, _ in self._active_vars(node)])
            for nb in nbrs:
                edges += 1
                if nb not in parent:
                    parent[nb] = (kind, node)
                    order.append(nb)
                    queue.append(nb)
        # each undirected edge was seen from both ends
        is_tree = edges // 2 == len(order) - 1
        return order, parent, is_tree

    def _check_message(self, i: int, target_var: int, incoming: dict) -> np.ndarray:
        """``sigma_{f_i -> x_target}`` from the other neighbours' messages."""
        q = self.q
        acc = np.zeros((self.B, q))
        acc[:, 0] = 1.0
        a_target = None
        for u, a in self._active_vars(i):
            if u == target_var:
                a_target = a
                continue
            acc = _cyclic_conv(acc, _scaled(incoming[u], a, q), q)
        idx = (self.residual[:, i:i + 1] - a_target * np.arange(q)[None, :]) % q
        return _normalize(np.take_along_axis(acc, idx, axis=1))

    def _tree_marginal(self, j, order, parent) -> np.ndarray:
        up_var = {}    # var -> log message to its parent check
        up_check = {}  # check -> message to its parent var
        children = {node: [] for node in order}
        for node in order[1:]:
            children[parent[node]].append(node)
        for kind, node in reversed(order):
            if kind == "v":
                lg = self.log_unary[:, node, :].copy()
                for _, f in children[(kind, node)]:
                    lg = lg + _log(up_check[f])
                up_var[node] = lg
            else:
                _, pv = parent[(kind, node)]
                incoming = {u: _normalize_log(up_var[u]) for _, u in children[(kind, node)]}
                up_check[node] = self._check_message(node, pv, incoming)
        return _normalize_log(up_var[j])

    def _flooding_marginal(self, j, order, sched: ScheduleConfig):
        var_nodes = [n for k, n in order if k == "v"]
        chk_nodes = [n for k, n in order if k == "f"]
        q = self.q
        sigma = {(i, v): np.full((self.B, q), 1.0 / q)
                 for i in chk_nodes for v, _ in self._active_vars(i)}
        converged, it = False, 0
        for it in range(1, sched.max_iterations + 1):
            pi = {(i, v): self._pi_excluding(v, i, sigma)
                  for v in var_nodes for i, _ in self._active_checks(v)}
            delta = 0.0
            new_sigma = {}
            for i in chk_nodes:
                incoming = {u: pi[(i, u)] for u, _ in self._active_vars(i)}
                for v, _ in self._active_vars(i):
                    msg = self._check_message(i, v, incoming)
                    if sched.damping:
                        msg = _normalize((1 - sched.damping) * msg + sched.damping * sigma[(i, v)])
                    delta = max(delta, float(np.abs(msg - sigma[(i, v)]).max()))
                    new_sigma[(i, v)] = msg
            sigma = new_sigma
            if delta < sched.epsilon:
                converged = True
                break
        lg = self.log_unary[:, j, :].copy()
        for i, _ in self._active_checks(j):
            lg = lg + _log(sigma[(i, j)])
        return _normalize_log(lg), converged, it

    def _pi_excluding(self, v, skip, sigma):
        lg = self.log_unary[:, v, :].copy()
        for i, _ in self._active_checks(v):
            if i != skip:
                lg = lg + _log(sigma[(i, v)])
        return _normalize_log(lg)

    def marginal(self, j: int, sched: ScheduleConfig | None = None) -> MarginalResult:
        sched = sched or ScheduleConfig()
        if self.frozen[j]:
            raise ValueError(f"variable {j} is frozen")
        order, parent, is_tree = self.component(j)
        if sched.mode == "tree" and not is_tree:
            raise ValueError(f"active graph around variable {j} has a loop")
        if is_tree and sched.mode != "flooding":
            probs, converged, iters = self._tree_marginal(j, order, parent), True, 1
        else:
            probs, converged, iters = self._flooding_marginal(j, order, sched)
        feasible = (probs.sum(axis=1) > 0) & ~self.violated
        probs = np.where(feasible[:, None], probs, 0.0)
        return MarginalResult(probs, feasible, bool(is_tree), converged, iters)


def sp_marginal(graph: FactorGraph, j: int, sched: ScheduleConfig | None = None) -> MarginalResult:
    """Marginal of variable ``j`` on the graph's active part."""
    return graph.marginal(j, sched)


class _Forcing:
    """Which coordinates the constraints pin down given the earlier ones.

    Eliminating columns from last to first leaves every reduced row with a
    distinct last nonzero column ``p`` (coefficient 1), so ``x_p`` is fixed by
    ``x_0..x_{p-1}``; every other coordinate can take any value without
    making the remaining system inconsistent.
    """

    def __init__(self, A: SparseCheckMatrix):
        M, T, pivots = _eliminate(A.to_dense(), A.q, np.arange(A.n - 1, -1, -1))
        r = pivots.size
        self.q, self.M, self.T, self.null = A.q, M[:r], T[:r], T[r:]
        self.row_of = np.full(A.n, -1)
        self.row_of[pivots] = np.arange(r)

    def consistent(self, targets) -> np.ndarray:
        return np.all((targets @ self.null.T) % self.q == 0, axis=1)

    def forced_value(self, k, targets, values) -> np.ndarray | None:
        r = self.row_of[k]
        if r < 0:
            return None
        rhs = targets @ self.T[r] - values[:, :k] @ self.M[r, :k]
        return rhs % self.q


@dataclass
class SampleInfo:
    feasible: np.ndarray  # (B,)
    exact: bool           # every step ran on a loop-free component
    converged: bool       # every loopy step met the epsilon test


def sample_constrained(A: SparseCheckMatrix, targets, weights, uniforms,
                       sched: ScheduleConfig | None = None):
    """Batched sequential sampler.

    ``weights`` is ``(n, q)`` or ``(B, n, q)``, ``targets`` ``(l,)`` or
    ``(B, l)`` and ``uniforms`` ``(B, n)``: column ``k`` drives the draw of
    ``x_k``. Returns ``(X, info)``; rows whose coset turned out empty are
    zero-filled and flagged in ``info.feasible``.
    """
    uniforms = np.atleast_2d(np.asarray(uniforms, dtype=float))
    B = uniforms.shape[0]
    weights = np.asarray(weights, dtype=float)
    targets = np.asarray(targets, dtype=np.int64)
    g = FactorGraph(A, np.broadcast_to(targets, (B, A.l)),
                    np.broadcast_to(weights, (B, A.n, A.q)))
    if uniforms.shape != (B, A.n):
        raise ValueError(f"uniforms must have shape (B, {A.n})")
    targets0 = g.residual.copy()
    forcing = _Forcing(A)
    feasible = forcing.consistent(targets0)
    exact, converged = True, True
    for k in range(A.n):
        res = g.marginal(k, sched)
        exact &= res.exact
        converged &= res.converged
        probs = res.probs
        if not res.exact:
            # approximate marginals may favour values the constraints exclude
            v = forcing.forced_value(k, targets0, g.values)
            if v is not None:
                probs = np.eye(A.q)[v] * (g.log_unary[np.arange(g.B), k, v] > -np.inf)[:, None]
            feasible &= probs.sum(axis=1) > 0
        else:
            feasible &= res.feasible
        probs = np.where(feasible[:, None], probs, 1.0 / A.q)
        g.freeze(k, sample_rows(probs, uniforms[:, k]))
    feasible &= ~g.violated
    X = np.where(feasible[:, None], g.values, 0)
    ok = np.all(syndrome(A, X[feasible]) == targets0[feasible], axis=1)
    assert np.all(ok), "sampler emitted a vector outside the commanded coset"
    return X, SampleInfo(feasible, bool(exact), bool(converged))


def crng_sample(A: SparseCheckMatrix, c, y, model, sched: ScheduleConfig | None = None,
                rng: np.random.Generator | None = None, return_info: bool = False):
    """One draw from ``mu(x|y) restricted to {x : Ax = c}``."""
    rng = rng if rng is not None else np.random.default_rng()
    X, info = sample_constrained(A, c, model.weights(y), rng.random((1, A.n)), sched)
    if not info.feasible[0]:
        raise EmptyCosetError("no positive-mass member in the coset")
    return (X[0], info) if return_info else X[0]


def crng_exact_stepwise(A: SparseCheckMatrix, c, y, model, k: int, prefix,
                        max_terms: int = MAX_ENUMERATION) -> FiniteDistribution:
    """Brute-force law of ``x_k`` given the drawn prefix ``x_0..x_{k-1}``.

    Sums ``prod_{j >= k} mu_j(x_j)`` over every completion satisfying ``Ax = c``.
    """
    prefix = np.asarray(prefix, dtype=np.int64)
    if prefix.size != k:
        raise ValueError("prefix length must equal k")
    w = model.weights(y) if hasattr(model, "weights") else np.asarray(model, dtype=float)
    c = np.asarray(c, dtype=np.int64) % A.q
    out = np.zeros(A.q)
    for suffix in all_vectors(A.n - k, A.q, max_terms):
        x = np.hstack([np.broadcast_to(prefix, (suffix.shape[0], k)), suffix])
        ok = np.all(syndrome(A, x) == c, axis=1)
        if not ok.any():
            continue
        s = suffix[ok]
        mass = np.prod(w[np.arange(k, A.n), s], axis=1)
        np.add.at(out, s[:, 0], mass)
    if out.sum() <= 0:
        raise EmptyCosetError("no positive-mass completion of the prefix")
    return FiniteDistribution(out / out.sum())
