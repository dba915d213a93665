"""End-to-end acceptance criteria AC1..AC10.

Each test records a one-line verdict (see conftest) and then asserts it.
Scenario settings follow configs/*.ini.
"""
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from apwl1 import filter as apf
from apwl1 import harness, verify
from apwl1.datagen import ScenarioSpec, make_stream
from apwl1.projections import (
    Hyperslab,
    WeightedL1Ball,
    project_hyperslab,
    project_weighted_l1_ball,
)

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
N_CHECKS = 10_000


def _load(name, **kw):
    return replace(harness.ExperimentConfig.load(CONFIGS / name), **kw)


def _min_M(traces):
    vals = [t.meta["min_M"] for t in traces if t.meta.get("min_M") is not None]
    return min(vals) if vals else np.inf


def test_ac1_oracle_agreement(criterion):
    t0 = time.perf_counter()
    rep = verify.run_oracle_suite(n_cases=1000, max_dim=10, seed=0, tol=1e-9)
    dt = time.perf_counter() - t0
    ok = rep.passed and rep.cases == 1000 and dt < 5.0
    criterion("AC1", ok, f"{rep.cases} cases, max deviation {rep.max_deviation:.2e} "
                         f"(tol 1e-9), {dt:.2f} s (limit 5 s)")
    assert ok


def test_ac2_projection_properties(criterion):
    rng = np.random.default_rng(2)
    fails = dict(feasible=0, idempotent=0, hyperoctant=0, firm_ball=0, firm_slab=0)
    for _ in range(N_CHECKS):
        L = int(rng.integers(1, 20))
        ball = WeightedL1Ball(10 ** rng.uniform(-1, 1, L), 10 ** rng.uniform(-1, 1))
        h = rng.standard_normal(L) * rng.choice([0.3, 3.0, 30.0])
        p = project_weighted_l1_ball(h, ball)
        fails["feasible"] += ball.norm(p) > ball.delta * (1 + 1e-12)
        fails["idempotent"] += np.linalg.norm(project_weighted_l1_ball(p, ball) - p) > 1e-12
        fails["hyperoctant"] += not np.all((p == 0) | (np.sign(p) == np.sign(h)))
        f = project_weighted_l1_ball(rng.standard_normal(L) * 5, ball)
        gap = np.sum((h - f) ** 2) - np.sum((p - f) ** 2) - np.sum((h - p) ** 2)
        fails["firm_ball"] += gap < -1e-9

        slab = Hyperslab(rng.standard_normal(L), rng.standard_normal() * 3, rng.uniform(0, 1))
        if slab.xnorm2 == 0:
            continue
        ps = project_hyperslab(h, slab)
        fs = project_hyperslab(rng.standard_normal(L) * 5, slab)
        gap = np.sum((h - fs) ** 2) - np.sum((ps - fs) ** 2) - np.sum((h - ps) ** 2)
        fails["firm_slab"] += gap < -1e-9
        fails["idempotent"] += np.linalg.norm(project_hyperslab(ps, slab) - ps) > 1e-12
    fails = {k: int(v) for k, v in fails.items()}
    ok = not any(fails.values())
    criterion("AC2", ok, f"{N_CHECKS} randomized checks per property, failures {fails}")
    assert ok


def test_ac3_noiseless_recovery(criterion):
    t0 = time.perf_counter()
    hits, min_M = 0, np.inf
    for seed in range(100):
        spec = ScenarioSpec(L=100, S=5, kind="reconstruction", noise_var=0.0,
                            amplitude_dist="gaussian", seed=seed)
        X, y, T, _ = make_stream(spec).take(1000)
        cfg = apf.FilterConfig(L=100, q=25, eps=0.0, delta=5.0)
        r = apf.run(cfg, X, y, truth=T)
        nmse = r.errors / np.sum(T[0] ** 2)
        hits += bool(np.any(nmse < 1e-6))
        min_M = min(min_M, np.nanmin(r.M))
    dt = time.perf_counter() - t0
    ok = hits >= 95 and dt < 30 and min_M >= 1 - 1e-9
    criterion("AC3", ok, f"{hits}/100 seeds below -60 dB within 1000 iterations (need 95), "
                         f"{dt:.1f} s (limit 30 s), min M_n {min_M:.6f}")
    assert ok


def test_ac4_method_ordering(criterion):
    t0 = time.perf_counter()
    cfg = _load("sysid_compare.ini", n_trials=100)
    traces = {t.tag: t for t in harness.run_ensemble(cfg)}
    dt = time.perf_counter() - t0
    k = cfg.eval_iter - 1
    m = {tag: float(t.db[k]) for tag, t in traces.items()}
    checks = {
        "q25 < q5 - 1dB": m["APWL1-q25"] < m["APWL1-q5"] - 1.0,
        "q5 <= RZA": m["APWL1-q5"] <= m["RZA-LMS"],
        "RZA <= ZA": m["RZA-LMS"] <= m["ZA-LMS"],
        "APL1 > RZA + 1dB": m["APL1-q25"] > m["RZA-LMS"] + 1.0,
        "time < 180 s": dt < 180,
        "M_n >= 1": _min_M(traces.values()) >= 1 - 1e-9,
    }
    ok = all(checks.values())
    mse = ", ".join(f"{t} {v:.2f}" for t, v in m.items())
    failed = [c for c, v in checks.items() if not v]
    criterion("AC4", ok, f"MSE@450 dB: {mse}; {dt:.0f} s; failed: {failed or 'none'}")
    assert ok


def test_ac5_window_monotonicity(criterion):
    out, ok, min_M = [], True, np.inf
    for name in ("window_sigma2_0.1.ini", "window_sigma2_0.001.ini"):
        cfg = _load(name, n_trials=100)
        traces = harness.run_ensemble(cfg)
        min_M = min(min_M, _min_M(traces))
        vals = [float(t.db[cfg.eval_iter - 1]) for t in traces]
        mono = all(b <= a + 0.5 for a, b in zip(vals, vals[1:]))
        ok &= mono
        out.append(f"sigma^2={cfg.scenario.noise_var}: " +
                   " ".join(f"{t.tag} {v:.2f}" for t, v in zip(traces, vals)) +
                   (" ok" if mono else " NOT non-increasing"))
    ok &= min_M >= 1 - 1e-9
    criterion("AC5", ok, "; ".join(out))
    assert ok


def test_ac6_tracking(criterion):
    cfg = _load("tracking.ini", n_trials=100, algorithms=(
        harness.AlgorithmSpec("APWL1-q15", "apwl1",
                              dict(q=15, delta=9, schedule="decaying-with-reset")),))
    tr = harness.run_ensemble(cfg)[0]
    # trace index k is the estimate after sample k+1, so n = k + 1
    floor = float(np.mean(tr.db[400:500]))
    post = tr.db[500:1000]
    back = np.flatnonzero(post <= floor + 3.0)
    n_back = int(back[0]) + 501 if back.size else None
    ok = n_back is not None and n_back - 500 <= 500 and tr.meta["min_M"] >= 1 - 1e-9
    criterion("AC6", ok, f"pre-change floor {floor:.2f} dB (mean over n=401..500); "
                         f"within 3 dB again at n={n_back}; MSE at n=1000 {tr.db[-1]:.2f} dB")
    assert ok


def test_ac7_delta_sensitivity(criterion):
    cfg = _load("delta_sensitivity.ini", n_trials=100)
    rows = harness.sensitivity_sweep(cfg, "delta", [-0.1, 0.0, 1.0])
    m = {r["deviation"]: r["mse_db"] for r in rows}
    under = m[-0.1] - m[0.0]
    over = abs(m[1.0] - m[0.0])
    ok = all(r["valid"] for r in rows) and under >= 10 and over <= 5
    criterion("AC7", ok, f"MSE@450: 0.9S {m[-0.1]:.2f}, S {m[0.0]:.2f}, 2S {m[1.0]:.2f} dB; "
                         f"underestimate costs {under:.1f} dB (need >= 10), "
                         f"overestimate {over:.1f} dB (limit 5)")
    assert ok


def _per_iteration_time(L, n_steps=300, repeats=5):
    spec = ScenarioSpec(L=L, S=20, kind="reconstruction", noise_var=0.001,
                        amplitude_dist="gaussian", seed=0)
    X, y, _, _ = make_stream(spec).take(n_steps)
    cfg = apf.FilterConfig(L=L, q=25, eps=1.3 * spec.noise_std, delta=20.0)
    apf.run(cfg, X[:30], y[:30])
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        apf.run(cfg, X, y)
        best = min(best, (time.perf_counter() - t0) / n_steps)
    return best


def test_ac8_complexity_scaling(criterion):
    sizes = (500, 1000, 2000, 4000)
    times = [_per_iteration_time(L) for L in sizes]
    ratios = [b / a for a, b in zip(times, times[1:])]
    ok = all(r <= 2.5 for r in ratios)
    detail = ", ".join(f"L={L} {t * 1e6:.0f} us" for L, t in zip(sizes, times))
    criterion("AC8", ok, f"{detail}; doubling ratios {[round(r, 2) for r in ratios]} "
                         f"(limit 2.5)")
    assert ok


def test_ac9_convergence_invariants(criterion):
    reps = verify.run_convergence_suite(range(50))
    ok = all(r.passed for r in reps.values())
    detail = ", ".join(f"{k} {'ok' if r.passed else 'FAIL'} ({r.cases})" for k, r in reps.items())
    criterion("AC9", ok, f"50 noiseless feasible seeds: {detail}")
    assert ok


def test_ac10_cli_determinism(criterion, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "apwl1", "run", "--config", str(CONFIGS / "sysid_compare.ini"),
             "--trials", "10", "--seed", "3", "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append((out / "mse.csv").read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    criterion("AC10", ok, f"two runs of sysid_compare.ini (seed 3, 10 trials): CSV "
                          f"{'byte-identical' if ok else 'differs'} ({len(outs[0])} bytes)")
    assert ok
