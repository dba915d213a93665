"""Numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--sizes 100,500,2000,4000]

Times the ball projection, the slab combination and whole filter steps
for both backends and prints one row per (kernel, L). Outputs are checked
for agreement before timing.
"""
import argparse
import time

import numpy as np

from apwl1 import _kernels
from apwl1 import filter as apf
from apwl1.datagen import ScenarioSpec, make_stream

BACKENDS = {
    "numba": (_kernels._wl1_outside_nb, _kernels._slab_combine_nb),
    "numpy": (_kernels._wl1_outside_np, _kernels._slab_combine_np),
}


def best_of(fn, repeat):
    fn()  # warm-up, also triggers compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def bench_projection(L, repeat, rng):
    h = rng.standard_normal(L) * 3
    w = 1.0 / (np.abs(rng.standard_normal(L)) + 0.1)
    delta = 0.1 * float(w @ np.abs(h))
    ref = _kernels._wl1_outside_np(h, w, delta)[0]
    out = {}
    for name, (proj, _) in BACKENDS.items():
        assert np.allclose(proj(h, w, delta)[0], ref, atol=1e-12)
        out[name] = best_of(lambda: proj(h, w, delta), repeat)
    return out


def bench_combine(L, q, repeat, rng):
    h = rng.standard_normal(L)
    X = rng.standard_normal((q, L))
    y = rng.standard_normal(q)
    xx = np.einsum("ij,ij->i", X, X)
    om = np.full(q, 1.0 / q)
    ref = _kernels._slab_combine_np(h, X, y, xx, 0.1, om)
    out = {}
    for name, (_, comb) in BACKENDS.items():
        d, M = comb(h, X, y, xx, 0.1, om)
        assert np.allclose(d, ref[0], atol=1e-12) and abs(M - ref[1]) < 1e-9
        out[name] = best_of(lambda: comb(h, X, y, xx, 0.1, om), repeat)
    return out


def bench_filter(L, q, n_steps, rng):
    spec = ScenarioSpec(L=L, S=max(1, L // 100), kind="reconstruction", noise_var=1e-3,
                        amplitude_dist="gaussian", seed=int(rng.integers(1 << 30)))
    X, y, T, _ = make_stream(spec).take(n_steps)
    cfg = apf.FilterConfig(L=L, q=q, eps=1.3 * spec.noise_std, delta=float(spec.S))
    saved = (_kernels.wl1_outside, _kernels.slab_combine)
    out = {}
    try:
        for name, (proj, comb) in BACKENDS.items():
            _kernels.wl1_outside, _kernels.slab_combine = proj, comb
            apf.run(cfg, X[:5], y[:5])
            t0 = time.perf_counter()
            apf.run(cfg, X, y)
            per = (time.perf_counter() - t0) / n_steps
            out[name] = (per, per)
    finally:
        _kernels.wl1_outside, _kernels.slab_combine = saved
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--sizes", default="100,500,2000,4000")
    ap.add_argument("--q", type=int, default=25)
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"{'kernel':<14}{'L':>6}{'numba us':>12}{'numpy us':>12}{'speedup':>9}")
    for L in sizes:
        for name, res in (
            ("wl1_project", bench_projection(L, args.repeat, rng)),
            ("slab_combine", bench_combine(L, args.q, args.repeat, rng)),
            ("filter_step", bench_filter(L, args.q, args.steps, rng)),
        ):
            nb, npy = res["numba"][0] * 1e6, res["numpy"][0] * 1e6
            print(f"{name:<14}{L:>6}{nb:>12.1f}{npy:>12.1f}{npy / nb:>9.2f}")


if __name__ == "__main__":
    main()
