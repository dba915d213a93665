import numpy as np
import pytest

from apwl1 import verify
from apwl1.projections import WeightedL1Ball


def test_oracle_inside_and_feasible():
    ball = WeightedL1Ball([1.0, 2.0, 0.5], 2.0)
    h = np.array([0.5, -0.25, 0.5])
    np.testing.assert_array_equal(verify.oracle_project_weighted_l1(h, ball), h)
    rng = np.random.default_rng(0)
    for _ in range(100):
        p = verify.oracle_project_weighted_l1(rng.standard_normal(3) * 10, ball)
        assert ball.norm(p) <= ball.delta + 1e-9


def test_oracle_dimension_limit():
    with pytest.raises(ValueError):
        verify.oracle_project_weighted_l1(np.ones(13), WeightedL1Ball(np.ones(13), 1.0))


def test_oracle_suite_report():
    rep = verify.run_oracle_suite(n_cases=100, seed=1)
    assert rep.passed and rep.cases == 100 and rep.max_deviation < 1e-9
    d = rep.to_dict()
    assert d["passed"] and d["failures"] == []


def test_fejer_check():
    h_star = np.zeros(3)
    const = np.ones((10, 3))
    assert verify.check_fejer_run(const, h_star).passed
    trace = np.outer(np.linspace(2, 1, 10), np.ones(3))
    trace[6] = trace[5] * 1.5
    res = verify.check_fejer_run(trace, h_star)
    assert not res.passed and res.first_violation == 6


def test_slab_check_trivial_and_adversarial():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((20, 3))
    y = rng.standard_normal(20)
    trace = rng.standard_normal((20, 3))
    assert verify.check_slab_distances(trace, X, y, eps=1e6, q=5).passed
    # slabs |h| <= 0.1 around 0 and around 10 never intersect
    X = np.ones((20, 1))
    y = np.tile([0.0, 10.0], 10)
    res = verify.check_slab_distances(np.zeros((20, 1)), X, y, eps=0.1, q=2)
    assert not res.passed and res.first_violation == 1
    assert res.worst == pytest.approx(9.9)


def test_slab_check_matches_direct_loop():
    from apwl1.projections import Hyperslab, distance_to_hyperslab
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 4))
    y = rng.standard_normal(30)
    trace = rng.standard_normal((30, 4)) * 0.2
    res = verify.check_slab_distances(trace, X, y, eps=0.3, q=4, burn_in=5, tol=np.inf)
    worst = max(distance_to_hyperslab(trace[n], Hyperslab(X[j], y[j], 0.3))
                for n in range(5, 30) for j in range(max(0, n - 3), n + 1))
    assert res.worst == pytest.approx(worst)


def test_ball_membership_and_limit_step():
    trace = np.array([[0.0, 0.0], [0.5, 0.5], [2.0, 0.0]])
    res = verify.check_ball_membership(trace, np.ones(2), 1.0)
    assert not res.passed and res.first_violation == 2
    assert verify.check_limit_step(np.ones((5, 2))).passed
    assert not verify.check_limit_step(trace).passed


def test_feasible_run_passes_every_check():
    run, X, y, h_star, cfg = verify.feasible_noiseless_run(0)
    assert verify.check_fejer_run(run.h, h_star).passed
    assert verify.check_slab_distances(run.h[:-1], X, y, cfg.eps, cfg.q, burn_in=5 * cfg.L).passed
    assert np.nanmin(run.M) >= 1 - 1e-9


def test_convergence_suite_small():
    reps = verify.run_convergence_suite(range(3))
    assert set(reps) == {"fejer", "slab_distance", "extrapolation_bound", "ball_membership",
                         "limit_step"}
    assert all(r.passed and r.cases == 3 for r in reps.values())
