"""End-to-end statistical acceptance checks.

Nine numbered criteria covering projection dominance, certificate
validity, agreement with the reference solver, moment relations,
mixture round trips, the poisson convexity threshold, qualitative risk
trends, non-convexity frequency and byte-level determinism.  Each test
prints one PASS/FAIL line; the Monte Carlo grid fixture is shared, so
the whole file stays within a few minutes of runtime.
"""

import math
import time

import numpy as np
import pytest

from convexpmf.distributions import (
    POISSON_CONVEXITY_THRESHOLD,
    TrueDistribution,
    materialize,
)
from convexpmf.harness import (
    ExperimentSpec,
    result_rows,
    rows_to_csv,
    rows_to_json,
    run_experiment,
    standard_grid,
)
from convexpmf.oracle import oracle_fit
from convexpmf.pmf import (
    TriangularMixture,
    empirical_from_counts,
    is_convex,
    mixture_to_pmf,
    pmf_to_mixture,
)
from convexpmf.solver import fit

REPLICATES = 200
GRID_SECONDS_BUDGET = 300.0


@pytest.fixture
def report(capfd):
    # the one-line verdicts should reach the real terminal even under
    # pytest's fd-level capture
    def _report(num, label, ok):
        line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {label}"
        with capfd.disabled():
            print(line, flush=True)

    return _report


@pytest.fixture(scope="module")
def grid():
    t0 = time.perf_counter()
    results = [
        run_experiment(spec, keep_replicates=True)
        for spec in standard_grid(replicates=REPLICATES, seed=0)
    ]
    return results, time.perf_counter() - t0


def _cell(results, label, n, est, functional):
    for r in results:
        if r.spec.distribution.label == label:
            return r.cells[(n, est, functional)].value
    raise KeyError(label)


CONVEX_TRUTHS = ("geom:0.9", "geom:0.5", "geom:0.1", "tri:20", "tri:5", "tri:2")


class TestAcceptance:
    def test_criterion_1_projection_dominance(self, grid, report):
        results, elapsed = grid
        failures = []
        if elapsed >= GRID_SECONDS_BUDGET:
            failures.append(f"grid took {elapsed:.0f}s")
        for res in results:
            if res.dominance_violations:
                failures.append(
                    f"{res.spec.distribution.label}: "
                    f"{res.dominance_violations} violations"
                )
            for rec in res.replicates:
                if rec.l2_ref_constrained > rec.l2_ref_empirical + 1e-10:
                    failures.append(
                        f"{res.spec.distribution.label} n={rec.n} r={rec.index}"
                    )
                if rec.nonconvex and (
                    rec.l2_ref_constrained > rec.l2_ref_empirical - 1e-12
                ):
                    failures.append(
                        f"strictness {res.spec.distribution.label} "
                        f"n={rec.n} r={rec.index}"
                    )
        ok = not failures
        report(1, "constrained estimate dominates the empirical one", ok)
        assert ok, failures[:10]

    def test_criterion_2_certificates(self, grid, report):
        results, _ = grid
        bad = {
            res.spec.distribution.label: res.certificate_failures
            for res in results
            if res.certificate_failures
        }
        ok = not bad
        report(2, "every fitted replicate passes its optimality certificate", ok)
        assert ok, bad

    def test_criterion_3_reference_solver_agreement(self, report):
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        worst = 0.0
        for trial in range(200):
            n = int(rng.integers(1, 101))
            if trial % 2:
                values = rng.integers(0, 31, size=n)
            else:
                values = np.minimum(rng.poisson(rng.uniform(0.5, 6.0), size=n), 30)
            uniq, counts = np.unique(values, return_counts=True)
            emp = empirical_from_counts(uniq.tolist(), counts.tolist())
            ours = fit(emp).pmf
            ref = oracle_fit(emp)
            width = max(len(ours.probs), len(ref.probs))
            worst = max(
                worst, float(np.max(np.abs(ours.padded(width) - ref.padded(width))))
            )
        elapsed = time.perf_counter() - t0
        ok = worst <= 1e-6 and elapsed < 60.0
        report(
            3,
            f"two independent solvers agree (sup gap {worst:.2e}, {elapsed:.0f}s)",
            ok,
        )
        assert worst <= 1e-6
        assert elapsed < 60.0

    def test_criterion_4_moment_relations(self, grid, report):
        results, _ = grid
        failures = []
        for res in results:
            label = res.spec.distribution.label
            for rec in res.replicates:
                pe, pf = rec.empirical_probs, rec.fitted_probs
                width = max(len(pe), len(pf))
                ep = np.zeros(width)
                ep[: len(pe)] = pe
                fp = np.zeros(width)
                fp[: len(pf)] = pf
                i = np.arange(width, dtype=np.float64)
                mean_e = float(i @ ep)
                mean_f = float(i @ fp)
                if abs(mean_e - mean_f) > 1e-8:
                    failures.append(f"mean {label} n={rec.n} r={rec.index}")
                if fp[0] < ep[0] - 1e-10:
                    failures.append(f"p(0) {label} n={rec.n} r={rec.index}")
                for a in (0.0, math.floor(mean_e)):
                    for u in (1, 2, 3):
                        lhs = float(np.abs(i - a) ** u @ ep)
                        rhs = float(np.abs(i - a) ** u @ fp)
                        if lhs > rhs + 1e-8:
                            failures.append(
                                f"moment u={u} a={a} {label} n={rec.n} r={rec.index}"
                            )
        ok = not failures
        report(4, "mean, p(0) and centered moment relations hold on every fit", ok)
        assert ok, failures[:10]

    def test_criterion_5_mixture_round_trip(self, report):
        rng = np.random.default_rng(77)
        failures = []
        for trial in range(1000):
            k = int(rng.integers(1, 7))
            orders = (rng.choice(50, size=k, replace=False) + 1).tolist()
            raw = rng.random(k) + 0.05
            weights = {int(j): float(v / raw.sum()) for j, v in zip(orders, raw)}
            mix = TriangularMixture(weights)
            f = mixture_to_pmf(mix)
            back = pmf_to_mixture(f)
            if set(back.weights) != set(weights):
                failures.append(f"trial {trial}: support changed")
                continue
            gap = max(abs(back.weights[j] - weights[j]) for j in weights)
            if gap > 1e-10:
                failures.append(f"trial {trial}: weight gap {gap:.2e}")
            if abs(back.mass - float(f.sum())) > 1e-10:
                failures.append(f"trial {trial}: mass mismatch")
        ok = not failures
        report(5, "1000 random mixtures survive the pmf round trip", ok)
        assert ok, failures[:10]

    def test_criterion_6_poisson_convexity_threshold(self, report):
        lam = POISSON_CONVEXITY_THRESHOLD
        below = is_convex(materialize(TrueDistribution("poisson", lam - 1e-6)).probs)
        above = is_convex(materialize(TrueDistribution("poisson", lam + 1e-6)).probs)
        ok = below and not above
        report(6, "poisson convexity flips exactly at 2 - sqrt(2)", ok)
        assert ok

    def test_criterion_7_risk_trend_directions(self, grid, report):
        results, _ = grid
        failures = []

        # (a) on convex truths the constrained mean l2 risk is lower at
        # every sample size
        for label in CONVEX_TRUTHS:
            for n in (10, 100, 1000):
                emp = _cell(results, label, n, "empirical", "l2")
                con = _cell(results, label, n, "constrained", "l2")
                if not con < emp:
                    failures.append(f"(a) {label} n={n}")

        # (b) the improvement is largest for the widest triangular truth
        # at n = 100
        gaps = {
            label: _cell(results, label, 100, "empirical", "l2")
            - _cell(results, label, 100, "constrained", "l2")
            for label in ("tri:20", "tri:5", "tri:2")
        }
        if not (gaps["tri:20"] > gaps["tri:5"] and gaps["tri:20"] > gaps["tri:2"]):
            failures.append(f"(b) gaps {gaps}")

        # (c) parameter functionals: the fitted variance dominates the
        # empirical variance replicate by replicate; the p(0) error is
        # never worse and strictly better where non-convex data are
        # common; the entropy error improves on the flattest geometric
        # truths and degrades on the narrowest triangular truth
        for res in results:
            for rec in res.replicates:
                ve = rec.values[("empirical", "variance")]
                vc = rec.values[("constrained", "variance")]
                if vc < ve - 1e-12:
                    failures.append(
                        f"(c) variance drop {res.spec.distribution.label} "
                        f"n={rec.n} r={rec.index}"
                    )
        for label in CONVEX_TRUTHS:
            for n in (100, 1000):
                emp = _cell(results, label, n, "empirical", "p0")
                con = _cell(results, label, n, "constrained", "p0")
                # ties are exact when every replicate is already convex,
                # so leave headroom at the roundoff scale
                if con > emp + 1e-12:
                    failures.append(f"(c) p0 {label} n={n}")
        for label in ("geom:0.1", "tri:20"):
            for n in (100, 1000):
                emp = _cell(results, label, n, "empirical", "p0")
                con = _cell(results, label, n, "constrained", "p0")
                if not con < emp:
                    failures.append(f"(c) p0 strict {label} n={n}")
        for label in ("geom:0.1", "geom:0.5"):
            for n in (100, 1000):
                emp = _cell(results, label, n, "empirical", "entropy")
                con = _cell(results, label, n, "constrained", "entropy")
                if not con < emp:
                    failures.append(f"(c) entropy {label} n={n}")
        for n in (100, 1000):
            emp = _cell(results, "tri:2", n, "empirical", "entropy")
            con = _cell(results, "tri:2", n, "constrained", "entropy")
            if not con > emp:
                failures.append(f"(c) entropy reversal tri:2 n={n}")

        # (d) under the misspecified poisson truth the ranking flips
        # with the sample size
        emp10 = _cell(results, "pois:1", 10, "empirical", "l2")
        con10 = _cell(results, "pois:1", 10, "constrained", "l2")
        emp1000 = _cell(results, "pois:1", 1000, "empirical", "l2")
        con1000 = _cell(results, "pois:1", 1000, "constrained", "l2")
        if not con10 <= emp10:
            failures.append("(d) n=10")
        if not con1000 > emp1000:
            failures.append("(d) n=1000")

        ok = not failures
        report(7, "risk trends point the documented directions", ok)
        assert ok, failures[:10]

    def test_criterion_8_nonconvex_frequency(self, grid, report):
        results, _ = grid
        failures = []
        for label in ("tri:5", "tri:20"):
            for res in results:
                if res.spec.distribution.label == label:
                    frac = res.nonconvex_fraction[1000]
                    if frac < 0.4:
                        failures.append(f"{label}: {frac}")
        ok = not failures
        report(8, "wide triangular truths yield mostly non-convex data", ok)
        assert ok, failures

    def test_criterion_9_byte_identical_reruns(self, report):
        spec = ExperimentSpec(
            distribution=TrueDistribution("geometric", 0.5),
            sample_sizes=(10, 50),
            replicates=25,
            seed=9,
        )
        rows_a = result_rows(run_experiment(spec))
        rows_b = result_rows(run_experiment(spec))
        ok = (
            rows_to_csv(rows_a) == rows_to_csv(rows_b)
            and rows_to_json(rows_a) == rows_to_json(rows_b)
        )
        report(9, "identical seeds reproduce byte-identical outputs", ok)
        assert ok
