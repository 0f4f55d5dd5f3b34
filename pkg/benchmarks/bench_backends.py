"""Compare the numba and numpy kernel backends on realistic workloads.

Builds both kernel sets in one process, so the env flag is irrelevant
here.  Reports wall time for the full fixed-order solve and for the
directional derivative scan, which dominate fit time.
"""

import argparse
import time

import numpy as np

from convexpmf._backend import HAVE_NUMBA
from convexpmf._kernels import FEAS_TOL, build_kernels
from convexpmf.distributions import parse_distribution, sample
from convexpmf.pmf import empirical_from_samples


def make_target(n, seed):
    xs = sample(parse_distribution("geom:0.2"), n, seed=seed)
    probs = empirical_from_samples(xs.tolist()).pmf.probs
    L = 3 * len(probs)
    pt = np.zeros(L)
    pt[: len(probs)] = probs
    return pt


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(kernels, targets, repeats):
    empty_js = np.zeros(0, dtype=np.int64)
    empty_w = np.zeros(0)
    rows = []
    for pt in targets:
        L = len(pt)

        def solve():
            kernels.solve_fixed(pt, 1e-10, FEAS_TOL, 10000, empty_js, empty_w)

        resid = kernels.eval_mixture(np.full(L, 1.0 / L), L) - pt

        def scan():
            kernels.dj_all(resid)

        solve()  # warm up (jit compilation on the numba path)
        scan()
        rows.append((L, time_call(solve, repeats), time_call(scan, repeats * 10)))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="100,1000,10000", help="sample sizes")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    sizes = [int(tok) for tok in args.sizes.split(",")]
    targets = [make_target(n, args.seed) for n in sizes]

    results = {"numpy": bench_backend(build_kernels("numpy"), targets, args.repeats)}
    if HAVE_NUMBA:
        results["numba"] = bench_backend(build_kernels("numba"), targets, args.repeats)
    else:
        print("numba is not installed; timing the numpy backend only")

    print(f"{'L':>8} {'kernel':>10} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for i, pt in enumerate(targets):
        for label, col in (("solve", 1), ("dj scan", 2)):
            np_t = results["numpy"][i][col]
            if "numba" in results:
                nb_t = results["numba"][i][col]
                ratio = f"{np_t / nb_t:9.2f}"
                nb_s = f"{nb_t * 1e3:10.3f}ms"
            else:
                ratio, nb_s = "        -", "         -"
            print(f"{len(pt):>8} {label:>10} {np_t * 1e3:10.3f}ms {nb_s} {ratio}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
