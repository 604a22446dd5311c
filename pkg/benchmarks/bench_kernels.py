#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy twins.

Run from the repo root:

    python benchmarks/bench_kernels.py [--p 898] [--iters 2000]

The same comparison drives backend selection advice: on this workload the
jitted kernels usually win by 5-15x per estimating-function evaluation, which
is what the simulation studies are made of.
"""

import argparse
import time

import numpy as np

from rapsmr import _kernels_numpy

try:
    from rapsmr import _kernels_numba
    HAS_NUMBA = True
except ImportError:
    _kernels_numba = None
    HAS_NUMBA = False


def make_data(p, seed=0):
    rng = np.random.default_rng(seed)
    sx = np.exp(rng.normal(np.log(0.0065), 0.25, p))
    sy = sx * np.exp(rng.normal(np.log(1.65), 0.2, p))
    z = np.where(rng.random(p) < 0.92, rng.normal(0, 1.1, p), rng.normal(0, 3.6, p))
    gamma = z * sx
    gh = gamma + sx * rng.standard_normal(p)
    Gh = 0.2 * gamma + sy * rng.standard_normal(p)
    return gh, sx, Gh, sy


def bench(label, fn, iters):
    fn()  # warm-up (and JIT compile for the numba path)
    t0 = time.perf_counter()
    for _ in range(iters):
        fn()
    dt = (time.perf_counter() - t0) / iters
    print(f"{label:<42s} {dt * 1e6:10.1f} us/call")
    return dt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=898)
    ap.add_argument("--iters", type=int, default=2000)
    args = ap.parse_args()

    gh, sx, Gh, sy = make_data(args.p)
    prior = (0.92, 0.47 ** 2, 3.48 ** 2)
    psi = (1, 1.345, 0.824803300095424)
    z = np.ascontiguousarray(gh / sx)
    obs = np.ones(args.p)

    backends = [("numpy", _kernels_numpy)]
    if HAS_NUMBA:
        backends.append(("numba", _kernels_numba))
    else:
        print("numba unavailable; timing the numpy backend only")

    results = {}
    for name, K in backends:
        print(f"\n-- backend: {name} (p = {args.p}) --")
        results[name, "estimating_functions"] = bench(
            "estimating_functions (shrinkage, huber)",
            lambda K=K: K.estimating_functions(0.2, 3.8e-5, gh, sx, Gh, sy,
                                               *prior, *psi), args.iters)
        results[name, "snp_weights"] = bench(
            "snp_weights (shrinkage)",
            lambda K=K: K.snp_weights(0.2, 3.8e-5, gh, sx, Gh, sy, *prior),
            args.iters)
        results[name, "posterior_stats_z"] = bench(
            "posterior_stats_z",
            lambda K=K: K.posterior_stats_z(z, obs, *prior), args.iters)
        results[name, "profile_neg_loglik"] = bench(
            "profile_neg_loglik",
            lambda K=K: K.profile_neg_loglik(0.2, gh, sx, Gh, sy), args.iters)
        hist = np.empty(200)
        results[name, "em_fit_mixture"] = bench(
            "em_fit_mixture (200 iters cap)",
            lambda K=K: K.em_fit_mixture(z, 0.9, 1.2, 9.0, 200, 1e-8, hist),
            max(args.iters // 20, 10))

    if HAS_NUMBA:
        print("\n-- speedup (numpy / numba) --")
        for key in ("estimating_functions", "snp_weights", "posterior_stats_z",
                    "profile_neg_loglik", "em_fit_mixture"):
            ratio = results["numpy", key] / results["numba", key]
            print(f"{key:<42s} {ratio:10.1f}x")


if __name__ == "__main__":
    main()
