"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines are printed even under
output capture) or directly with ``python3 tests/test_acceptance.py``.
"""
import sys
import time

import numpy as np
import pytest

from stochdec import cli
from stochdec.codecs import CodeSpec, EncodingError, additive_noise_roundtrip, channel_encode
from stochdec.decision import SequenceDecisionConfig, iid_bound, posterior_rule, sequence_error_exact
from stochdec.gf import feasible_point, random_tree_checks, syndrome, to_systematic
from stochdec.harness import run_experiment, timed_run
from stochdec.models import SourceModel, qary_symmetric
from stochdec.oracle import exact_constrained_posterior, exact_encoder_mass, exact_sequence_error
from stochdec.prob import JointDistribution
from stochdec.sumproduct import FactorGraph, ScheduleConfig

REF = np.array([[0.4, 0.1], [0.1, 0.4]])


def _report(capsys, number, title, ok, detail, seconds):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail}; {seconds:.1f}s)"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def _failed(rows, keep=lambda r: True):
    return [r for r in rows if keep(r) and not r.passed]


@pytest.fixture(scope="module")
def bounds_run():
    return timed_run("bounds-sweep", {"max_states": 8, "max_obs": 8, "n_rules": 100}, seed=1,
                     trials=1000)


def test_two_factor_error_bound(bounds_run, capsys):
    rows, secs = bounds_run
    metrics = ("map_error_vs_oracle", "posterior_error_two_factor", "map_error_optimal")
    bad = _failed(rows, lambda r: r.metric in metrics)
    n_inst = len({r.instance for r in rows})
    ok = not bad and secs <= 10.0
    assert _report(capsys, 1, "posterior sampling within twice MAP, MAP optimal over 100 rules",
                   ok, f"{n_inst} joints, {len(bad)} violations, limit 10s", secs), bad[:3]


def test_risk_bounds(bounds_run, capsys):
    rows, secs = bounds_run
    prefixes = ("subadditive_bound", "sup_loss_bound", "risk_two_factor", "gap_bound",
                "error_upper_bound", "approximate_posterior_bound")
    sel = [r for r in rows if r.metric.startswith(prefixes)]
    losses = {r.metric.split("[")[1].rstrip("]") for r in sel if "[" in r.metric}
    bad = _failed(sel)
    ok = not bad and losses == {"zero_one", "line"}
    assert _report(capsys, 2, "risk bounds under 0-1 and line-metric losses", ok,
                   f"{len(sel)} checks, losses {sorted(losses)}, {len(bad)} violations", secs), bad[:3]


def test_sequence_decision(capsys):
    t0 = time.perf_counter()
    joint = JointDistribution(REF)
    post = posterior_rule(joint).rows
    problems = []
    for t in range(1, 6):
        cfg = SequenceDecisionConfig(t, post)
        oracle = exact_sequence_error(joint, post, t)
        fast = sequence_error_exact(joint, cfg)
        b = iid_bound(joint, cfg)
        if abs(oracle - fast) > 1e-12:
            problems.append(f"t={t}: oracle {oracle} vs {fast}")
        if oracle > b.main + 1e-12 or oracle > b.uniform_form + 1e-12:
            problems.append(f"t={t}: bound exceeded")
        if t == 2 and (abs(oracle - 0.224) > 1e-12 or abs(b.main - 0.24) > 1e-12):
            problems.append(f"t=2: error {oracle}, bound {b.main}")
    secs = time.perf_counter() - t0
    e2 = exact_sequence_error(joint, post, 2)
    assert _report(capsys, 3, "best-of-t sequence decision on the 2x2 reference", not problems,
                   f"error at t=2 {e2:.12f}, bound 0.24; {len(problems)} problems", secs), problems


def _stepwise_worst(seed, n, l, q, side_info):
    rng = np.random.default_rng(seed)
    A = random_tree_checks(n, l, q, rng)
    if side_info:
        model = SourceModel.from_channel(rng.dirichlet(np.ones(q)), qary_symmetric(q, 0.1), n)
        y = rng.integers(q, size=n)
    else:
        model, y = SourceModel(rng.dirichlet(np.ones(q), size=(n, 1))), None
    c = syndrome(A, rng.integers(q, size=n))
    members, probs = exact_constrained_posterior(A, c, y, model)
    x = members[rng.choice(len(members), p=probs)]
    g = FactorGraph(A, c[None], model.weights(y)[None])
    worst = 0.0
    for k in range(n):
        sp = g.marginal(k, ScheduleConfig(mode="tree")).probs[0]
        mask = np.all(members[:, :k] == x[:k], axis=1)
        ref = np.bincount(members[mask, k], weights=probs[mask], minlength=q)
        worst = max(worst, float(np.abs(sp - ref / ref.sum()).max()))
        g.freeze(k, np.array([x[k]]))
    return worst


def test_sumproduct_exactness(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        worst = max(worst, _stepwise_worst(seed, 12, 4, 2, seed % 2 == 1))
    for seed in range(6):
        worst = max(worst, _stepwise_worst(100 + seed, 7, 3, 3, seed % 2 == 1))
    rows = run_experiment("crng-validate", {"n": 12, "l": 4}, seed=2, trials=100000)
    by = {r.metric: r for r in rows}
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and all(r.passed for r in rows) and secs <= 60.0
    assert _report(capsys, 4, "sequential sum-product sampler is exact on trees", ok,
                   f"stepwise max error {worst:.2e}, TV {by['empirical_tv'].value:.4f} at 1e5 draws,"
                   f" coset violations {by['coset_violations'].value:.0f}, limit 60s", secs), rows


def test_gibbs_correctness(capsys):
    rows, secs = timed_run("gibbs-convergence", {"n": 8, "l": 4, "q": 2, "drift_steps": 100000},
                           seed=4, trials=500)
    by = {r.metric: r for r in rows}
    required = ("stationarity_shift", "tv_max_increase", "tv_at_k=200", "coset_violations",
                "log_posterior_drift")
    ok = all(by[m].passed for m in required)
    assert _report(capsys, 5, "Gibbs chain leaves the target invariant and converges", ok,
                   f"shift {by['stationarity_shift'].value:.1e}, TV at 200 "
                   f"{by['tv_at_k=200'].value:.1e}, drift {by['log_posterior_drift'].value:.1e}, "
                   f"coset violations {by['coset_violations'].value:.0f}", secs), rows


def test_slepian_wolf_band(capsys):
    rows, secs = timed_run("sw-sim", {"n": 12, "l": 6, "q": 2, "flip": 0.05}, seed=6,
                           trials=10000)
    by = {r.metric: r for r in rows}
    band = by["block_error"]
    ok = band.passed and by["coset_violations"].passed and secs <= 120.0
    assert _report(capsys, 6, "stochastic side-information decoder within [E_MAP, 2 E_MAP]", ok,
                   f"measured {band.value:.4f} +/- {band.ci:.4f}, band [{band.oracle:.4f}, "
                   f"{band.bound:.4f}], limit 120s", secs), rows


def _encoder_exactness():
    """Every message of a few small codes: the encoder errors iff the oracle
    mass of the intersection is zero, and otherwise meets both constraints."""
    problems = checked = 0
    for seed in range(6):
        rng = np.random.default_rng(seed)
        A = random_tree_checks(6, 3, 2, rng)
        B = random_tree_checks(6, 2 + seed % 2, 2, rng)
        prior = [0.5, 0.5] if seed % 3 else [1.0, 0.0]
        c = syndrome(A, rng.integers(2, size=6))
        spec = CodeSpec(A, prior, B=B, c=c)
        for m in np.ndindex(*(2,) * B.l):
            mass = exact_encoder_mass(A, B, c, m, prior)
            for backend in ("exact", "sumproduct"):
                checked += 1
                try:
                    x = channel_encode(np.array(m), spec, backend, rng)
                except EncodingError:
                    problems += mass > 0
                    continue
                problems += mass <= 0
                problems += not (np.array_equal(syndrome(A, x), c)
                                 and np.array_equal(syndrome(B, x), m))
    return problems, checked


def test_channel_code_consistency(capsys):
    t0 = time.perf_counter()
    rows = run_experiment("channel-sim", {}, seed=7, trials=2000)
    by = {r.metric: r for r in rows}
    enc_problems, checked = _encoder_exactness()
    # trial-by-trial event identity on a larger code
    rng = np.random.default_rng(8)
    A = random_tree_checks(12, 4, 2, rng)
    sysA, noise = to_systematic(A), SourceModel.iid([0.9, 0.1], 12)
    mismatches = 0
    for _ in range(1000):
        z = feasible_point(sysA, np.zeros(4, dtype=np.int64), rng.integers(2, size=sysA.n_free))
        r = additive_noise_roundtrip(z, noise, A, "sumproduct", rng)
        mismatches += (not r.success) != (not np.array_equal(r.z_hat, z))
    secs = time.perf_counter() - t0
    required = ("encoder_constraint_violations", "encoding_error_mismatch",
                "roundtrip_event_mismatch")
    ok = not enc_problems and not mismatches and all(by[m].passed for m in required)
    assert _report(capsys, 7, "roundtrip event identity and encoder exactness", ok,
                   f"{mismatches} event mismatches, {enc_problems} encoder problems over "
                   f"{checked} encodings", secs), rows


SCALED = {
    "bounds-sweep": 200,
    "crng-validate": 20000,
    "sw-sim": 2000,
    "channel-sim": 300,
    "gibbs-convergence": 100,
}


def test_reproducibility(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv(cli.OUT_DIR_ENV, raising=False)
    t0 = time.perf_counter()
    base = tmp_path
    differing = []
    for kind, trials in SCALED.items():
        outs = []
        for run, par in enumerate((1, 1, 2)):
            path = base / f"{kind}-{run}.csv"
            rc = cli.main([kind, "--seed", "12345", "--trials", str(trials),
                           "--parallelism", str(par), "--out", str(path)])
            if rc != 0:
                differing.append(f"{kind} exit {rc}")
            outs.append(path.read_bytes())
        if len(set(outs)) != 1:
            differing.append(kind)
    secs = time.perf_counter() - t0
    assert _report(capsys, 8, "same seed gives byte-identical CSV", not differing,
                   f"{len(SCALED)} experiments, reruns and 2 workers compared; differing: "
                   f"{differing or 'none'}", secs), differing


if __name__ == "__main__":
    import os
    import tempfile
    from pathlib import Path

    class _Env:
        def delenv(self, name, raising=True):
            os.environ.pop(name, None)

    run = timed_run("bounds-sweep", {"max_states": 8, "max_obs": 8, "n_rules": 100}, seed=1,
                    trials=1000)
    results = []
    for fn, args in [(test_two_factor_error_bound, (run,)), (test_risk_bounds, (run,)),
                     (test_sequence_decision, ()), (test_sumproduct_exactness, ()),
                     (test_gibbs_correctness, ()), (test_slepian_wolf_band, ()),
                     (test_channel_code_consistency, ()),
                     (test_reproducibility, (Path(tempfile.mkdtemp()), _Env()))]:
        try:
            fn(*args, None)
            results.append(True)
        except AssertionError:
            results.append(False)
    sys.exit(0 if all(results) else 1)
