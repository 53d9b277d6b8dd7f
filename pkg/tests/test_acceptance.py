"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
Criteria 8 and 9 run full-size threshold sweeps and need ``--full``.
"""
import math
import subprocess
import sys
import time

import mpmath
import numpy as np
import pytest
import yaml

from conftest import ACCEPTANCE_LINES
from coevo import _kernels as K
from coevo.analysis import RegimeLabel, best_response_threshold, compute_d_star, lambda_star
from coevo.dynamics import INF, AgentParams, PopulationState, action_prob, run
from coevo.harness import (ScenarioConfig, build_scenario, default_lambda_grid, default_workers,
                           derive_seed, lambda_sweep, replicate_seed, run_replicates, sweep)
from coevo.netgen import InfluenceLayer, TopologySpec, TwoLayerNetwork, build_random_walk_weights, generate

FAMILY_P = {"rr": 0.0, "er": 0.0, "ws": 0.2, "ba": 0.0}
REPORTED_LAMBDA_HAT = {"rr": 0.16, "er": 0.18, "ws": 0.08, "ba": 0.10}
REPORTED_DENSITY_GAIN = {"rr": 0.1875, "er": 0.10, "ws": 1.125, "ba": 0.50}


def report(k, ok, detail):
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def reference_config(family="rr", d=8, **kw):
    base = dict(influence=TopologySpec(family, 200, d, FAMILY_P[family]),
                communication=TopologySpec(family, 200, 4, FAMILY_P[family]),
                alpha=0.5, beta=20.0)
    base.update(kw)
    return ScenarioConfig(**base)


def test_c01_lambda_star_closed_form():
    a, b = lambda_star(8, 0.5), lambda_star(4, 0.5)
    ok = abs(a - 0.4074) <= 1e-4 and abs(b - 0.2727) <= 1e-4
    report(1, ok, f"lambda*(8)={a:.6f} (0.4074), lambda*(4)={b:.6f} (0.2727), tol 1e-4")


def mean_lambda_star(family, samples=1000):
    vals = []
    spec = TopologySpec(family, 200, 8, FAMILY_P[family])
    for k in range(samples):
        layer = generate(spec, np.random.default_rng(derive_seed(2024, k)))
        if layer.degrees[0] == 0:
            # isolated innovator: no d*, draw the next realisation instead
            continue
        ls = lambda_star(compute_d_star(layer, 0), 0.5)
        vals.append(0.0 if ls is None else ls)
    return float(np.mean(vals)), len(vals)


def test_c02_expected_lambda_star():
    t0 = time.perf_counter()
    er, n_er = mean_lambda_star("er")
    ws, n_ws = mean_lambda_star("ws")
    dt = time.perf_counter() - t0
    ok = abs(er - 0.3234) <= 0.02 and abs(ws - 0.3967) <= 0.02 and dt < 60
    report(2, ok, f"E[lambda*] ER={er:.4f} (0.3234, {n_er} nets), WS={ws:.4f} (0.3967, {n_ws} nets), "
                  f"tol 0.02, {dt:.1f}s")


def test_c03_theorem_one():
    t0 = time.perf_counter()
    n = 30
    c = ScenarioConfig(TopologySpec("rr", n, 8), TopologySpec("rr", n, 4), alpha=0.5, beta="inf",
                       lam=0.2, mu=0.0, horizon=100_000, master_seed=31)
    violations = 0
    checked = 0
    for r in range(20):
        net, params, state = build_scenario(c, replicate_seed(31, r, 0.2, 0.0))
        assert compute_d_star(net, 0) == 8
        traj = run(state, net, params, c.steps, np.random.default_rng(derive_seed(31, r, 3)), every=1)
        counts = np.rint(traj.avg_x * n).astype(int)
        violations += int(np.sum(counts != 2 - n))
        violations += int(np.sum(np.abs(traj.avg_x - (-1 + 2 / n)) > 1e-12))
        checked += len(traj.t)
    dt = time.perf_counter() - t0
    ok = violations == 0 and dt < 60 and 0.2 < lambda_star(8, 0.5)
    report(3, ok, f"<x(t)> = -1+2/n at {checked} recorded steps over 20 seeds, {violations} violations, {dt:.1f}s")


def test_c04_opinion_bounds_fuzz():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    total = 0
    for _ in range(10):
        m = 100_000
        lengths = rng.integers(1, 9, m)
        ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        k = int(ptr[-1])
        idx = np.arange(k, dtype=np.int64)
        w = rng.uniform(-1, 1, k) * (rng.random(k) < 0.8)
        w[ptr[:-1]] += (w[ptr[:-1]] == 0)  # at least one nonzero entry per row
        sums = np.add.reduceat(np.abs(w), ptr[:-1])
        w /= np.repeat(sums, lengths)
        y = rng.uniform(-1, 1, k)
        y[rng.random(k) < 0.1] = rng.choice([-1.0, 1.0])
        x = rng.choice(np.array([-1, 1], dtype=np.int64), k)
        mu = rng.random(m)
        mu[rng.random(m) < 0.05] = 0.0
        mu[rng.random(m) < 0.05] = 1.0
        for i in range(m):
            v = K.opinion_update(i, x, y, ptr, idx, ptr, idx, w, mu[i])
            excess = abs(v) - 1.0
            if excess > worst:
                worst = excess
        total += m
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 60
    report(4, ok, f"{total} updates, max(|y|-1) = {worst:.3g} (tol 1e-12), {dt:.1f}s")


def test_c05_stubborn_consensus():
    t0 = time.perf_counter()
    n = 20
    c = ScenarioConfig(TopologySpec("rr", n, 4), TopologySpec("rr", n, 4), alpha=0.5, beta=20.0,
                       lam=0.2, mu=0.0, horizon=200_000, master_seed=55)
    good = 0
    for r in range(20):
        net, params, state = build_scenario(c, replicate_seed(55, r, 0.2, 0.0))
        traj = run(state, net, params, c.steps, np.random.default_rng(derive_seed(55, r, 3)), record=False)
        if np.max(np.abs(traj.final.y - 1.0)) < 0.05:
            good += 1
    dt = time.perf_counter() - t0
    ok = good >= 19 and dt < 60
    report(5, ok, f"max|y-1| < 0.05 in {good}/20 seeds (need 19), {dt:.1f}s")


def test_c06_threshold_equivalence_fuzz():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    m = 1_000_000
    lam = rng.uniform(0, 1, m) * 0.999
    lam[rng.random(m) < 0.05] = 0.0
    alpha = rng.uniform(0, 3, m)
    d = rng.integers(1, 31, m)
    k = rng.integers(0, d + 1)
    xsum = 2 * k - d
    y = rng.uniform(-1, 1, m)
    # a quarter of the cases sit exactly on the threshold when that is feasible
    tie = rng.random(m) < 0.25
    with np.errstate(divide="ignore", invalid="ignore"):
        y_tie = -((xsum / d) * (2 + alpha) + alpha) * (1 - lam) / (2 * lam)
    use = tie & np.isfinite(y_tie) & (np.abs(y_tie) <= 1)
    y[use] = y_tie[use]
    band = 1e-10
    mismatches = 0
    ties = 0
    for i in range(m):
        plus, minus = K.payoffs(y[i], int(d[i]), int(xsum[i]), lam[i], alpha[i])
        gap = plus - minus
        margin = xsum[i] / d[i] - best_response_threshold(lam[i], y[i], alpha[i])
        s_gap = 0 if abs(gap) <= band else (1 if gap > 0 else -1)
        s_margin = 0 if abs(margin) <= band else (1 if margin > 0 else -1)
        ties += s_gap == 0
        mismatches += s_gap != s_margin
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 60
    report(6, ok, f"{m} instances ({ties} ties), {mismatches} sign mismatches, {dt:.1f}s")


FIG3_CELLS = [
    (0.1, 0.001, RegimeLabel.UNPOPULAR_NORM),
    (0.1, 0.01, RegimeLabel.POPULAR_DISADVANTAGEOUS_NORM),
    (0.5, 0.001, RegimeLabel.PARADIGM_SHIFT),
]


def test_c07_regime_sample_paths():
    t0 = time.perf_counter()
    details = []
    ok = True
    for lam, mu, label in FIG3_CELLS:
        c = reference_config(lam=lam, mu=mu, master_seed=7, replicates=20)
        res = run_replicates(c, workers=default_workers())
        share = np.mean([r.regime is label for r in res])
        ok &= share >= 0.6
        details.append(f"({lam}, {mu}) {label.value} {share:.0%}")
    dt = time.perf_counter() - t0
    report(7, ok, "; ".join(details) + f" (need 60%), {dt:.0f}s")


def test_c07b_rr_breakpoint_bands():
    # coarse direction-of-effect check on the RR (lambda, mu) map
    t0 = time.perf_counter()
    c = reference_config(master_seed=77, replicates=20)
    res = sweep(c, [0.1, 0.5], [0.001, 0.01], workers=default_workers())
    P, U, D = (RegimeLabel.PARADIGM_SHIFT, RegimeLabel.UNPOPULAR_NORM,
               RegimeLabel.POPULAR_DISADVANTAGEOUS_NORM)
    low_mu = res.modal_regime(0, 0) is U and res.modal_regime(1, 0) is P
    high_mu = res.modal_regime(0, 1) is D and res.modal_regime(1, 1) is D
    grows = all(res.regime_share(li, 1, D) > res.regime_share(li, 0, D) for li in range(2))
    dt = time.perf_counter() - t0
    report("7b", low_mu and high_mu and grows,
           f"mu=0.001 below 0.0032: {res.modal_grid()[0][0]} -> {res.modal_grid()[1][0]}; "
           f"mu=0.01 above 0.007: {res.modal_grid()[0][1]} / {res.modal_grid()[1][1]}, {dt:.0f}s")


_LAMBDA_HAT_CACHE = {}


def full_lambda_hat(family, d):
    key = (family, d)
    if key not in _LAMBDA_HAT_CACHE:
        c = reference_config(family, d, mu=0.0, master_seed=8, replicates=100)
        est = lambda_sweep(c, default_lambda_grid(0.02, 0.6), workers=default_workers())
        _LAMBDA_HAT_CACHE[key] = est.lambda_hat
    return _LAMBDA_HAT_CACHE[key]


@pytest.mark.full
def test_c08_threshold_estimation():
    t0 = time.perf_counter()
    got = {f: full_lambda_hat(f, 8) for f in REPORTED_LAMBDA_HAT}
    ok = all(abs(got[f] - REPORTED_LAMBDA_HAT[f]) <= 0.04 + 1e-9 for f in got)
    dt = time.perf_counter() - t0
    report(8, ok, ", ".join(f"{f.upper()} {got[f]:.2f} ({REPORTED_LAMBDA_HAT[f]:.2f})" for f in got)
           + f" tol 0.04, {dt / 60:.1f} min")


@pytest.mark.full
def test_c09_density_effect():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for f in REPORTED_LAMBDA_HAT:
        lo, hi = full_lambda_hat(f, 8), full_lambda_hat(f, 16)
        ok &= hi > lo
        gain = (hi - lo) / lo if lo > 0 else math.inf
        parts.append(f"{f.upper()} {lo:.2f}->{hi:.2f} ({gain:+.0%}, reported {REPORTED_DENSITY_GAIN[f]:+.1%})")
    dt = time.perf_counter() - t0
    report(9, ok, "; ".join(parts) + f", {dt / 60:.1f} min")


def test_c10_norm_deviation_probability():
    n = 9
    infl = InfluenceLayer(n, np.array([[0, j] for j in range(1, n)]))
    net = TwoLayerNetwork(infl, build_random_walk_weights(infl))
    state = PopulationState(np.ones(n, dtype=np.int64), np.ones(n))
    params = AgentParams.homogeneous(n, 0.0, 0.0, 20.0, 0.5)
    p = action_prob(0, -1, state, net, params)
    mpmath.mp.dps = 60
    oracle = 1 / (1 + mpmath.exp(30))
    err = abs(mpmath.mpf(p) - oracle)
    ok = err <= 1e-16 and p < 1e-13
    report(10, ok, f"P(-1)={p:.6e}, oracle {mpmath.nstr(oracle, 10)}, |err|={float(err):.2e} (tol 1e-16)")


def run_cli(args, cwd):
    subprocess.run([sys.executable, "-m", "coevo.cli", *args], cwd=cwd, check=True,
                   capture_output=True, text=True)


def output_bytes(d):
    return {p.relative_to(d).as_posix(): p.read_bytes()
            for p in sorted(d.rglob("*")) if p.suffix in (".csv", ".json")}


def test_c11_determinism(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({
        "n": 40, "influence": {"family": "ws", "d": 4, "p": 0.2}, "communication": {"family": "er", "d": 4},
        "horizon": 4000, "replicates": 4, "lambda_grid": [0.0, 0.2, 0.4], "mu_grid": [0.0, 0.01],
        "master_seed": 11, "theory_samples": 20,
    }))
    commands = ["simulate", "estimate-threshold", "sweep2d", "theory-check"]
    runs = {}
    for threads in (1, 8):
        for rep in ("a", "b"):
            out = tmp_path / f"{threads}{rep}"
            for cmd in commands:
                run_cli([cmd, str(cfg), "--out-dir", str(out / cmd), "--threads", str(threads)], tmp_path)
            runs[(threads, rep)] = output_bytes(out)
    base = runs[(1, "a")]
    same = all(r == base for r in runs.values())
    report(11, same and len(base) >= 9,
           f"{len(base)} CSV/JSON files from {len(commands)} commands identical across reruns at 1 and 8 workers")
