"""Seeded Monte Carlo experiments that check bounds and write CSV.

Each experiment has three parts: ``setup`` builds the instance from the master
seed, ``trials`` runs a slice of trial indices (each index gets its own
generator derived from ``(master, index)``), and ``summarize`` turns the
gathered trial records into result rows. Slices may run in worker processes;
records are reassembled in index order, so output does not depend on
scheduling.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import binomtest, chisquare

from . import codecs
from .decision import (BoundViolation, LossFunction, SequenceDecisionConfig,
                       approximate_posterior_error_bound, approximation_gap_bound,
                       error_probability, error_upper_bound, iid_bound, mal_rule, map_rule,
                       marginal_bound_check, posterior_rule, risk, sequence_error_exact,
                       subadditive_risk_bound, sup_loss_risk_bound)
from .gf import (SparseCheckMatrix, feasible_point, random_tree_checks, rank,
                 syndrome, to_systematic)
from .gibbs import chain_distribution_oracle, gibbs_init, gibbs_step, transition_matrix, _Moves, _log
from .models import SourceModel, qary_symmetric
from .oracle import (OracleBudget, exact_constrained_posterior, exact_encoder_mass,
                     map_error_additive, map_error_joint, map_error_side_info,
                     posterior_sampling_error_additive)
from .prob import JointDistribution, joint_variational_distance, sample_rows
from .sumproduct import FactorGraph, ScheduleConfig, sample_constrained

SCHEMA_VERSION = 1
COLUMNS = ("experiment", "instance", "metric", "value", "bound", "oracle", "ci", "pass")
Z95 = 0.95
Z999 = 0.999


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    instance: str
    metric: str
    value: float
    bound: float = math.nan
    oracle: float = math.nan
    ci: float = math.nan
    passed: bool = True


def trial_rng(master: int, index: int) -> np.random.Generator:
    """Generator for one trial; depends only on the master seed and the index."""
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=(0, index)))


def instance_rng(master: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=(1,)))


def wilson(successes: int, trials: int, level: float = Z95):
    """``(low, high)`` Wilson score interval for a Bernoulli rate."""
    ci = binomtest(int(successes), int(trials)).proportion_ci(level, method="wilson")
    return float(ci.low), float(ci.high)


def instance_hash(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p).tobytes())
        elif isinstance(p, SparseCheckMatrix):
            h.update(p.dumps().encode())
        else:
            h.update(json.dumps(p, sort_keys=True, default=str).encode())
    return h.hexdigest()[:12]


def _upper(exp, inst, metric, value, bound, oracle=math.nan, tol=0.0, ci=math.nan):
    return ResultRow(exp, inst, metric, float(value), float(bound), float(oracle), float(ci),
                     bool(value <= bound + tol))


def _band(exp, inst, metric, errors, trials, lo_ref, hi_ref, level=Z95):
    """Measured rate whose confidence interval must meet ``[lo_ref, hi_ref]``."""
    lo, hi = wilson(errors, trials, level)
    rate = errors / trials
    return ResultRow(exp, inst, metric, rate, hi_ref, lo_ref, (hi - lo) / 2,
                     bool(lo <= hi_ref and hi >= lo_ref))


# --- bounds-sweep -----------------------------------------------------------

BOUNDS_DEFAULTS = dict(min_states=2, max_states=8, min_obs=2, max_obs=8, n_rules=100,
                       concentration=1.0, tol=1e-12, sequence_t_max=3, joints=None)


def _bounds_setup(cfg, master):
    return cfg


def _worst(value, bound):
    value, bound = np.atleast_1d(value), np.atleast_1d(bound)
    i = int(np.argmax(value - bound))
    return value[i], bound[i]


def _bounds_instance(cfg, rng, joint=None):
    if joint is None:
        nx = int(rng.integers(cfg["min_states"], cfg["max_states"] + 1))
        ny = int(rng.integers(cfg["min_obs"], cfg["max_obs"] + 1))
        joint = JointDistribution.random(nx, ny, rng, cfg["concentration"])
    nx, ny = joint.n_states, joint.n_obs
    Q = rng.dirichlet(np.ones(nx), size=(cfg["n_rules"], ny))
    P = posterior_rule(joint).rows
    rules = np.concatenate([Q, P[None]], axis=0)
    tol = cfg["tol"]
    exp = "bounds-sweep"
    inst = instance_hash(joint.matrix)
    out = []
    e_map = error_probability(joint, map_rule(joint))
    oracle = map_error_joint(joint)
    e_p, e_q = error_probability(joint, P), error_probability(joint, Q)
    out.append(_upper(exp, inst, "map_error_vs_oracle", abs(e_map - oracle), 0.0, oracle, tol))
    out.append(_upper(exp, inst, "posterior_error_two_factor", e_p, 2 * e_map, oracle, tol))
    out.append(_upper(exp, inst, "map_error_optimal", e_map, np.min(e_q), oracle, tol))
    out.append(_upper(exp, inst, "posterior_error_vs_any_rule", e_p, 2 * np.min(e_q), oracle, tol))
    out.append(_upper(exp, inst, "error_upper_bound",
                      *_worst(error_probability(joint, rules), error_upper_bound(joint, rules)),
                      oracle, tol))
    out.append(_upper(exp, inst, "approximate_posterior_bound",
                      *_worst(error_probability(joint, Q), approximate_posterior_error_bound(joint, Q)),
                      oracle, tol))
    losses = {"zero_one": LossFunction.zero_one(nx),
              "line": LossFunction.line_metric(np.sort(rng.random(nx)))}
    for name, loss in losses.items():
        r = risk(joint, rules, loss)
        r_opt = risk(joint, mal_rule(joint, loss), loss)
        out.append(_upper(exp, inst, f"subadditive_bound[{name}]",
                          *_worst(r, subadditive_risk_bound(joint, rules, loss)), r_opt, tol))
        out.append(_upper(exp, inst, f"sup_loss_bound[{name}]",
                          *_worst(r, sup_loss_risk_bound(joint, rules, loss)), r_opt, tol))
        out.append(_upper(exp, inst, f"risk_two_factor[{name}]", r[-1], 2 * r_opt, r_opt, tol))
        a, b = rules, np.roll(rules, 1, axis=0)
        gap = np.abs(r - np.roll(r, 1))
        try:
            bound = approximation_gap_bound(joint, a, b, loss)
        except BoundViolation:
            bound = loss.sup_loss * joint_variational_distance(a, b, joint.matrix.sum(axis=0))
        out.append(_upper(exp, inst, f"gap_bound[{name}]", *_worst(gap, bound), r_opt, tol))
    t_max = int(cfg["sequence_t_max"])
    for t in range(1, t_max + 1):
        if ny * nx ** t > 10**6:
            break
        for pname, prop in (("posterior", P), ("random", Q[0])):
            c = SequenceDecisionConfig(t, prop)
            seq = sequence_error_exact(joint, c)
            ib = iid_bound(joint, c)
            out.append(_upper(exp, inst, f"sequence_iid_bound[{pname},t={t}]", seq, ib.main,
                              oracle, tol))
            try:
                rep = marginal_bound_check(joint, [prop] * t)
                out.append(_upper(exp, inst, f"sequence_marginal_bound[{pname},t={t}]",
                                  rep.sequence_risk, rep.bound, oracle, tol))
            except BoundViolation:
                out.append(_upper(exp, inst, f"sequence_marginal_bound[{pname},t={t}]",
                                  seq, error_probability(joint, prop), oracle, tol))
            if pname == "posterior":
                out.append(_upper(exp, inst, f"sequence_posterior_form[t={t}]", seq,
                                  ib.posterior_form, oracle, tol))
                out.append(_upper(exp, inst, f"sequence_uniform_form[t={t}]", seq,
                                  ib.uniform_form, oracle, tol))
    return out


def _bounds_trials(cfg, master, indices):
    joints = cfg.get("joints")
    recs = []
    for i in indices:
        rng = trial_rng(master, int(i))
        joint = None
        if joints:
            joint = JointDistribution(np.asarray(joints[int(i) % len(joints)], dtype=float))
        recs.append(_bounds_instance(cfg, rng, joint))
    return recs


def _bounds_summarize(cfg, records, trials):
    return [row for rec in records for row in rec]


# --- crng-validate ----------------------------------------------------------

CRNG_DEFAULTS = dict(n=10, l=4, q=2, mu=[0.8, 0.2], flip=None, max_weight=3, tv_bound=0.02,
                     step_tol=1e-10, step_checks=20, schedule="auto", chunk=4096)


def _crng_setup(cfg, master):
    rng = instance_rng(master)
    n, l, q = cfg["n"], cfg["l"], cfg["q"]
    A = random_tree_checks(n, l, q, rng, cfg["max_weight"])
    mu = np.asarray(cfg["mu"], dtype=float)
    if cfg["flip"] is None:
        model, y = SourceModel.iid(mu, n), None
        x0 = sample_rows(model.weights(), rng.random(n))
    else:
        W = qary_symmetric(q, cfg["flip"])
        model = SourceModel.from_channel(mu, W, n)
        x0 = sample_rows(np.broadcast_to(mu, (n, q)), rng.random(n))
        y = sample_rows(W[x0], rng.random(n))
    c = syndrome(A, x0)
    members, probs = exact_constrained_posterior(A, c, y, model)
    w = model.weights(y)
    sched = ScheduleConfig(mode=cfg["schedule"])
    # per-step conditionals along random prefixes drawn from the target
    worst = 0.0
    for _ in range(cfg["step_checks"]):
        x = members[int(rng.choice(len(members), p=probs))]
        k = int(rng.integers(n))
        g = FactorGraph(A, c[None], w[None])
        for j in range(k):
            g.freeze(j, np.array([x[j]]))
        sp = g.marginal(k, sched).probs[0]
        mask = np.all(members[:, :k] == x[:k], axis=1)
        ref = np.bincount(members[mask, k], weights=probs[mask], minlength=q)
        worst = max(worst, float(np.abs(sp - ref / ref.sum()).max()))
    return dict(cfg=cfg, A=A, c=c, w=w, members=members, probs=probs, step_error=worst,
                inst=instance_hash(cfg["n"], cfg["l"], cfg["q"], A, c, w))


def _crng_trials(ctx, master, indices):
    A, n = ctx["A"], ctx["A"].n
    U = np.stack([trial_rng(master, int(i)).random(n) for i in indices])
    sched = ScheduleConfig(mode=ctx["cfg"]["schedule"])
    out = []
    for s in range(0, len(indices), ctx["cfg"]["chunk"]):
        X, info = sample_constrained(A, ctx["c"], ctx["w"], U[s:s + ctx["cfg"]["chunk"]], sched)
        out.append(np.where(info.feasible[:, None], X, -1))
    return [np.concatenate(out)]


def _member_index(members, X, q):
    code = members @ (q ** np.arange(members.shape[1]))
    lookup = dict(zip(code.tolist(), range(len(code))))
    xc = X @ (q ** np.arange(X.shape[1]))
    return np.array([lookup.get(v, -1) for v in xc.tolist()])


def _crng_summarize(ctx, records, trials):
    X = np.concatenate(records)
    A, cfg = ctx["A"], ctx["cfg"]
    exp, inst = "crng-validate", ctx["inst"]
    bad = int(np.sum(np.any(syndrome(A, np.maximum(X, 0)) != ctx["c"], axis=1) | np.any(X < 0, axis=1)))
    idx = _member_index(ctx["members"], np.maximum(X, 0), A.q)
    hist = np.bincount(idx[idx >= 0], minlength=len(ctx["members"])) / len(X)
    tv = 0.5 * float(np.abs(hist - ctx["probs"]).sum())
    return [
        _upper(exp, inst, "stepwise_max_abs_error", ctx["step_error"], cfg["step_tol"]),
        _upper(exp, inst, "empirical_tv", tv, cfg["tv_bound"], len(ctx["members"])),
        _upper(exp, inst, "coset_violations", bad, 0),
    ]


# --- sw-sim -----------------------------------------------------------------

SW_DEFAULTS = dict(n=12, l=6, q=2, flip=0.05, prior=None, backend="sumproduct", kappa=200,
                   gibbs_mode="raw", t_bar=1, max_weight=3, chunk=2048, budget=10**7)


def _sw_setup(cfg, master):
    rng = instance_rng(master)
    n, l, q = cfg["n"], cfg["l"], cfg["q"]
    A = random_tree_checks(n, l, q, rng, cfg["max_weight"])
    W = qary_symmetric(q, cfg["flip"])
    prior = np.full(q, 1.0 / q) if cfg["prior"] is None else np.asarray(cfg["prior"], dtype=float)
    budget = OracleBudget(cfg["budget"])
    if np.allclose(prior, 1.0 / q):
        # uniform input: MAP recovery of x from (y, Ax) is MAP recovery of the noise
        noise = W[0]
        e_map = map_error_additive(A, noise, budget)
        e_ps = posterior_sampling_error_additive(A, noise, budget)
    else:
        e_map = map_error_side_info(A, prior, W, budget)
        e_ps = math.nan
    return dict(cfg=cfg, A=A, W=W, prior=prior, model=SourceModel.from_channel(prior, W, n),
                e_map=e_map, e_ps=e_ps, inst=instance_hash(n, l, q, cfg["flip"], A, prior))


def _sw_trials(ctx, master, indices):
    A, W, prior, cfg = ctx["A"], ctx["W"], ctx["prior"], ctx["cfg"]
    n, q = A.n, A.q
    rngs = [trial_rng(master, int(i)) for i in indices]
    Xs = np.stack([sample_rows(np.broadcast_to(prior, (n, q)), r.random(n)) for r in rngs])
    Ys = np.stack([sample_rows(W[x], r.random(n)) for x, r in zip(Xs, rngs)])
    C = syndrome(A, Xs)
    tab = ctx["model"].table
    if cfg["backend"] == "sumproduct" and cfg["t_bar"] == 1:
        U = np.stack([r.random(n) for r in rngs])
        parts = []
        for s in range(0, len(indices), cfg["chunk"]):
            sl = slice(s, s + cfg["chunk"])
            Wt = tab[np.arange(n), Ys[sl]]
            X, feas = codecs.decode_batch(A, C[sl], Wt, U[sl])
            parts.append(np.where(feas[:, None], X, -1))
        Xh = np.concatenate(parts)
    else:
        opts = codecs.DecoderOptions(cfg["backend"], kappa=cfg["kappa"],
                                     gibbs_mode=cfg["gibbs_mode"], t_bar=cfg["t_bar"])
        Xh = np.stack([codecs.constrained_decode(A, c, tab[np.arange(n), y], opts, r)
                       for c, y, r in zip(C, Ys, rngs)])
    in_coset = np.all(syndrome(A, np.maximum(Xh, 0)) == C, axis=1) & np.all(Xh >= 0, axis=1)
    return [(np.any(Xh != Xs, axis=1), in_coset)]


def _sw_summarize(ctx, records, trials):
    err = np.concatenate([r[0] for r in records])
    ok = np.concatenate([r[1] for r in records])
    exp, inst, cfg = "sw-sim", ctx["inst"], ctx["cfg"]
    e_map = ctx["e_map"]
    rows = [_band(exp, inst, "block_error", int(err.sum()), len(err), e_map, 2 * e_map),
            _upper(exp, inst, "coset_violations", int((~ok).sum()), 0)]
    if cfg["backend"] in ("sumproduct", "exact") and cfg["t_bar"] == 1 and np.isfinite(ctx["e_ps"]):
        # the decoder samples the exact constrained posterior, whose error is known
        rows.append(_band(exp, inst, "block_error_vs_exact_sampling", int(err.sum()), len(err),
                          ctx["e_ps"], ctx["e_ps"], Z999))
    rows.append(ResultRow(exp, inst, "rate", rank(ctx["A"]) * math.log(ctx["A"].q) / ctx["A"].n))
    return rows


# --- channel-sim ------------------------------------------------------------

CHANNEL_DEFAULTS = dict(n=8, l_a=3, l_b=2, q=2, prior=None, flip=0.05, encoder_backend="exact",
                        decoder_backend="sumproduct", max_weight=3, roundtrip=True)


def _channel_setup(cfg, master):
    rng = instance_rng(master)
    n, q = cfg["n"], cfg["q"]
    A = random_tree_checks(n, cfg["l_a"], q, rng, cfg["max_weight"])
    B = random_tree_checks(n, cfg["l_b"], q, rng, cfg["max_weight"])
    prior = np.full(q, 1.0 / q) if cfg["prior"] is None else np.asarray(cfg["prior"], dtype=float)
    W = qary_symmetric(q, cfg["flip"])
    x0 = sample_rows(np.broadcast_to(prior, (n, q)), rng.random(n))
    spec = codecs.CodeSpec(A, prior, W, B, syndrome(A, x0))
    messages = np.array(list(np.ndindex(*(q,) * B.l)), dtype=np.int64).reshape(-1, B.l)
    mass = np.array([exact_encoder_mass(A, B, spec.c, m, prior) for m in messages])
    noise = W[0]
    return dict(cfg=cfg, spec=spec, messages=messages, mass=mass, noise=noise,
                sys=to_systematic(A), e_map=map_error_additive(A, noise),
                inst=instance_hash(n, q, cfg["flip"], A, B, spec.c, prior))


def _channel_trials(ctx, master, indices):
    spec, cfg = ctx["spec"], ctx["cfg"]
    sysA, noise_model = ctx["sys"], SourceModel.iid(ctx["noise"], spec.n)
    recs = []
    for i in indices:
        rng = trial_rng(master, int(i))
        mi = int(rng.integers(len(ctx["messages"])))
        m = ctx["messages"][mi]
        t = codecs.channel_trial(m, spec, rng, cfg["encoder_backend"], cfg["decoder_backend"])
        enc_err = t.diagnostics["encoding_error"]
        ok = enc_err or (np.array_equal(syndrome(spec.A, t.x), spec.c)
                         and np.array_equal(syndrome(spec.B, t.x), m))
        x_err = (not enc_err) and t.diagnostics["x_error"]
        m_err = (not enc_err) and not t.success
        rt = (False, False)
        if cfg["roundtrip"]:
            z = feasible_point(sysA, np.zeros(spec.A.l, dtype=np.int64),
                               rng.integers(spec.q, size=sysA.n_free))
            r = codecs.additive_noise_roundtrip(z, noise_model, spec.A, cfg["decoder_backend"], rng)
            rt = (not r.success, not np.array_equal(r.z_hat, z))
        recs.append((enc_err, ctx["mass"][mi] <= 0, ok, x_err, m_err) + rt)
    return [np.array(recs, dtype=bool).reshape(-1, 7)]


def _channel_summarize(ctx, records, trials):
    R = np.concatenate(records)
    enc, zero, ok, xe, me, noise_err, z_err = R.T
    exp, inst, spec = "channel-sim", ctx["inst"], ctx["spec"]
    n_enc = int((~enc).sum())
    rows = [
        _upper(exp, inst, "encoder_constraint_violations", int((~ok).sum()), 0),
        _upper(exp, inst, "encoding_error_mismatch", int((enc != zero).sum()), 0,
               float(zero.mean())),
        _upper(exp, inst, "message_error_without_x_error", int((me & ~xe).sum()), 0),
        _upper(exp, inst, "message_error_rate", me.sum() / max(n_enc, 1),
               xe.sum() / max(n_enc, 1), tol=1e-12),
        ResultRow(exp, inst, "rate_A", spec.rate_A),
        ResultRow(exp, inst, "rate_B", spec.rate_B),
    ]
    if ctx["cfg"]["roundtrip"]:
        rows.append(_upper(exp, inst, "roundtrip_event_mismatch", int((noise_err != z_err).sum()), 0))
        rows.append(_band(exp, inst, "roundtrip_error", int(z_err.sum()), len(z_err),
                          ctx["e_map"], 2 * ctx["e_map"]))
    return rows


# --- gibbs-convergence ------------------------------------------------------

GIBBS_DEFAULTS = dict(n=8, l=4, q=2, mu=[0.7, 0.3], k_max=200, tv_bound=1e-3,
                      stationarity_tol=1e-12, monotone_tol=1e-12, drift_steps=100000,
                      drift_tol=1e-6, kappa=200, pvalue_floor=1e-3)


def _dense_full_rank(n, l, q, rng):
    while True:
        M = rng.integers(q, size=(l, n))
        A = SparseCheckMatrix.from_dense(M, q)
        if all(A.rows) and rank(A) == l:
            return A


def _gibbs_setup(cfg, master):
    rng = instance_rng(master)
    n, l, q = cfg["n"], cfg["l"], cfg["q"]
    A = _dense_full_rank(n, l, q, rng)
    model = SourceModel.iid(cfg["mu"], n)
    x0 = sample_rows(model.weights(), rng.random(n))
    c = syndrome(A, x0)
    sys = to_systematic(A)
    members, target = exact_constrained_posterior(A, c, None, model)
    m2, P = transition_matrix(sys, c, None, model)
    assert np.array_equal(members, m2)
    shift = 0.5 * float(np.abs(target @ P - target).sum())
    _, dist = chain_distribution_oracle(sys, c, None, model, 0)
    tvs = [0.5 * float(np.abs(dist - target).sum())]
    for _ in range(cfg["k_max"]):
        dist = dist @ P
        tvs.append(0.5 * float(np.abs(dist - target).sum()))
    _, law_kappa = chain_distribution_oracle(sys, c, None, model, cfg["kappa"])
    # long run: bookkeeping drift and coset membership on every visit
    state = gibbs_init(sys, c, None, model)
    cache = (_Moves(sys), _log(model.weights()))
    bad = 0
    for _ in range(cfg["drift_steps"]):
        gibbs_step(state, sys, None, model, rng, _cache=cache)
        bad += int(np.any(syndrome(A, state.x) != c))
    drift = abs(state.log_posterior - model.log_prob(state.x))
    return dict(cfg=cfg, A=A, c=c, sys=sys, model=model, members=members, target=target,
                shift=shift, tvs=np.array(tvs), law_kappa=law_kappa, drift=drift, bad=bad,
                inst=instance_hash(n, l, q, A, c, cfg["mu"]))


def _gibbs_trials(ctx, master, indices):
    sys, c, model, kappa = ctx["sys"], ctx["c"], ctx["model"], ctx["cfg"]["kappa"]
    cache = (_Moves(sys), _log(model.weights()))
    finals = []
    for i in indices:
        rng = trial_rng(master, int(i))
        state = gibbs_init(sys, c, None, model, kappa)
        for _ in range(kappa):
            gibbs_step(state, sys, None, model, rng, _cache=cache)
        finals.append(state.x.copy())
    return [np.array(finals).reshape(-1, sys.n)]


def _gibbs_summarize(ctx, records, trials):
    X = np.concatenate(records)
    cfg, exp, inst = ctx["cfg"], "gibbs-convergence", ctx["inst"]
    tvs = ctx["tvs"]
    rows = [
        _upper(exp, inst, "stationarity_shift", ctx["shift"], cfg["stationarity_tol"]),
        _upper(exp, inst, "tv_max_increase", max(0.0, float(np.max(np.diff(tvs)))),
               cfg["monotone_tol"]),
        _upper(exp, inst, f"tv_at_k={cfg['k_max']}", tvs[-1], cfg["tv_bound"]),
        _upper(exp, inst, "coset_violations", ctx["bad"], 0),
        _upper(exp, inst, "log_posterior_drift", ctx["drift"], cfg["drift_tol"]),
    ]
    idx = _member_index(ctx["members"], X, ctx["A"].q)
    observed = np.bincount(idx, minlength=len(ctx["members"]))
    expected = ctx["law_kappa"] * len(X)
    keep = expected > 0
    p = float(chisquare(observed[keep], expected[keep] * observed.sum() / expected[keep].sum()).pvalue)
    rows.append(ResultRow(exp, inst, "chain_law_pvalue", p, cfg["pvalue_floor"], math.nan,
                          math.nan, bool(p >= cfg["pvalue_floor"])))
    return rows


# --- registry and runner ----------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    defaults: dict
    trials: int
    setup: Callable
    run: Callable
    summarize: Callable


EXPERIMENTS = {
    "bounds-sweep": Experiment(BOUNDS_DEFAULTS, 1000, _bounds_setup, _bounds_trials, _bounds_summarize),
    "crng-validate": Experiment(CRNG_DEFAULTS, 100000, _crng_setup, _crng_trials, _crng_summarize),
    "sw-sim": Experiment(SW_DEFAULTS, 10000, _sw_setup, _sw_trials, _sw_summarize),
    "channel-sim": Experiment(CHANNEL_DEFAULTS, 2000, _channel_setup, _channel_trials,
                              _channel_summarize),
    "gibbs-convergence": Experiment(GIBBS_DEFAULTS, 500, _gibbs_setup, _gibbs_trials,
                                    _gibbs_summarize),
}


def make_config(kind: str, overrides: dict | None = None) -> dict:
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {kind!r}")
    cfg = dict(EXPERIMENTS[kind].defaults)
    for key, val in (overrides or {}).items():
        if key not in cfg:
            raise ConfigError(f"{kind}: unknown config key {key!r}")
        cfg[key] = val
    return cfg


def _run_slice(kind, ctx, master, indices):
    return EXPERIMENTS[kind].run(ctx, master, indices)


def run_experiment(kind: str, config: dict | None = None, seed: int = 0,
                   trials: int | None = None, parallelism: int = 1) -> list[ResultRow]:
    """Run one experiment and return its rows. Output depends only on
    ``(kind, config, seed, trials)``."""
    exp = EXPERIMENTS.get(kind)
    if exp is None:
        raise ConfigError(f"unknown experiment {kind!r}")
    cfg = make_config(kind, config)
    trials = exp.trials if trials is None else int(trials)
    if trials < 1:
        raise ConfigError("trial count must be >= 1")
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")
    ctx = exp.setup(cfg, seed)
    slices = [s for s in np.array_split(np.arange(trials), max(1, parallelism * 4)) if s.size]
    if parallelism == 1:
        parts = [_run_slice(kind, ctx, seed, s) for s in slices]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(_run_slice, kind, ctx, seed, s) for s in slices]
            parts = [f.result() for f in futures]  # slice order, not completion order
    records = [rec for part in parts for rec in part]
    return exp.summarize(ctx, records, trials)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating, int, np.integer)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    buf.write(f"#schema={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r.experiment, r.instance, r.metric, _fmt(r.value), _fmt(r.bound),
                    _fmt(r.oracle), _fmt(r.ci), _fmt(r.passed)])
    return buf.getvalue()


def read_csv(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"#schema={SCHEMA_VERSION}":
            raise ValueError(f"{path}: missing or unsupported schema line {first!r}")
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=3):
            if len(rec) != len(COLUMNS) or rec[7] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: malformed row")
            try:
                vals = [float(v) for v in rec[3:7]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            rows.append(ResultRow(rec[0], rec[1], rec[2], *vals, rec[7] == "1"))
    return rows


def write_results(rows, path, meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def timed_run(kind, config=None, seed=0, trials=None, parallelism=1):
    t0 = time.perf_counter()
    rows = run_experiment(kind, config, seed, trials, parallelism)
    return rows, time.perf_counter() - t0


def summarize_files(paths) -> tuple[str, bool]:
    """Text summary of result files and whether every row passed."""
    if not paths:
        raise ValueError("no result files given")
    lines = [f"{'file':<28} {'experiment':<18} {'rows':>6} {'pass':>7} {'runtime_s':>10}  worst margin"]
    all_ok = True
    total = passed = 0
    for path in paths:
        rows = read_csv(path)
        runtime = math.nan
        try:
            with open(f"{path}.meta.json") as fh:
                runtime = float(json.load(fh).get("runtime_s", math.nan))
        except (OSError, ValueError):
            pass
        by_exp: dict[str, list[ResultRow]] = {}
        for r in rows:
            by_exp.setdefault(r.experiment, []).append(r)
        for name, rs in sorted(by_exp.items()):
            ok = sum(r.passed for r in rs)
            total += len(rs)
            passed += ok
            all_ok &= ok == len(rs)
            # failures first, then the smallest bound - value
            cand = [r for r in rs if not math.isnan(r.bound)]
            worst = min(cand, key=lambda r: (r.passed, r.bound - r.value), default=None)
            wtxt = ("-" if worst is None else
                    f"{worst.metric} value={worst.value:.6g} bound={worst.bound:.6g}"
                    f"{'' if worst.passed else ' FAIL'}")
            lines.append(f"{str(path)[-28:]:<28} {name:<18} {len(rs):>6} "
                         f"{100.0 * ok / len(rs):>6.1f}% {runtime:>10.2f}  {wtxt}")
    rate = 100.0 * passed / total if total else 100.0
    lines.append(f"{'PASS' if all_ok else 'FAIL'} {rate:.0f}%")
    return "\n".join(lines), all_ok
