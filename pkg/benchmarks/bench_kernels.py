"""Time the numba kernels against their numpy twins on the same inputs.

    python3 benchmarks/bench_kernels.py [--n 200000] [--m 20] [--repeat 5]

Also times one full environment episode under whichever backend the
process selected (run once more with YIELDALLOC_DISABLE_NUMBA=1 to compare).
"""

import argparse
import time

import numpy as np

from yieldalloc import kernels
from yieldalloc._accel import backend_name
from yieldalloc.marlenv import AllocationEnv
from yieldalloc.scenario import GeneratorSpec, generate_scenario


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n, m = args.n, args.m
    q = rng.uniform(0, 1, (n, m))
    b2 = rng.lognormal(0, 0.5, n)
    lam = rng.uniform(0.5, 2, m)
    alpha = rng.uniform(0, 1, m)
    out = np.empty(n, dtype=np.int64)
    winners = rng.integers(-1, m, n)
    remaining = np.full(m, n // (2 * m))
    gain = rng.normal(0, 1, (9, 3))
    d, p = np.array([2, 3, 1]), np.array([1.0, 2.0, 1.5])

    cases = {
        "assign": lambda k: k["assign"](q, b2, lam, alpha, out),
        "tally": lambda k: k["tally"](winners, q, b2, np.zeros(m, np.int64), np.zeros(m)),
        "fallback": lambda k: k["fallback"](q, b2, lam, alpha, remaining.copy(), out),
        "brute (n=9, m=3)": lambda k: k["brute"](gain, d, p),
    }
    print(f"n={n} m={m}, best of {args.repeat}")
    print(f"{'kernel':<18} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for name, call in cases.items():
        call(kernels.BACKENDS["numba"])  # compile outside the timing
        t_nb = best_of(lambda: call(kernels.BACKENDS["numba"]), args.repeat)
        t_np = best_of(lambda: call(kernels.BACKENDS["numpy"]), args.repeat)
        print(f"{name:<18} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>8.1f}")

    s = generate_scenario(GeneratorSpec(m=m, n=n, T=48, demand_fraction_range=(0.25 / m, 0.75 / m)), 0)
    env = AllocationEnv(s)
    zero = np.zeros(m)
    env.rollout(lambda o: zero)
    t = best_of(lambda: env.rollout(lambda o: zero), args.repeat)
    print(f"one episode, T=48, backend={backend_name()}: {t:.4f} s")


if __name__ == "__main__":
    main()
