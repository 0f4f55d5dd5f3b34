"""Monte Carlo harness comparing the empirical and constrained estimates.

For every replicate the harness draws a sample, fits the constrained
estimate, and evaluates the requested functionals for both estimators
against the known truth.  Loss functionals (l2, kolmogorov, hellinger,
tv) aggregate to mean risks; parameter functionals (variance, entropy,
p0) aggregate to relative standard errors
sqrt(E (theta(est) - theta(truth))^2) / theta(truth).

Replicate r of an experiment uses seed ``base_seed XOR r``, so runs are
reproducible bit for bit regardless of thread count: every replicate is
computed independently and aggregation order is fixed.  The environment
variable ``CONVEXPMF_THREADS`` caps worker threads (default 1).

The projection dominance counter compares squared l2 distances to a
convex reference: the truth itself when convex, otherwise the
projection of the truth onto the convex cone.  The constrained estimate
can never be farther from any convex vector than the empirical pmf is,
so the counter must stay at zero.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import losses, moments
from .distributions import TrueDistribution, materialize, sample
from .pmf import Pmf, empirical_from_samples, empirical_is_convex, is_convex
from .solver import SolverConfig, fit, project_vector
from ._kernels import ACTIVE as _K

LOSS_FUNCTIONALS = ("l2", "kolmogorov", "hellinger", "tv")
THETA_FUNCTIONALS = ("variance", "entropy", "p0")
ALL_FUNCTIONALS = LOSS_FUNCTIONALS + THETA_FUNCTIONALS
ESTIMATORS = ("empirical", "constrained")

DOMINANCE_SLACK = 1e-10

ENV_THREADS = "CONVEXPMF_THREADS"


class HarnessError(RuntimeError):
    """One or more experiment specs failed; details in ``failures``."""

    def __init__(self, failures):
        lines = "; ".join(f"spec {i}: {msg}" for i, msg in failures)
        super().__init__(f"{len(failures)} experiment(s) failed: {lines}")
        self.failures = failures


@dataclass(frozen=True)
class ExperimentSpec:
    distribution: TrueDistribution
    sample_sizes: tuple = (10, 100, 1000)
    replicates: int = 1000
    seed: int = 0
    functionals: tuple = ALL_FUNCTIONALS

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if any(n < 1 for n in self.sample_sizes):
            raise ValueError("sample sizes must be positive")
        bad = [f for f in self.functionals if f not in ALL_FUNCTIONALS]
        if bad:
            raise ValueError(f"unknown functionals {bad}; choose from {ALL_FUNCTIONALS}")


@dataclass
class ReplicateRecord:
    n: int
    index: int
    nonconvex: bool
    cert_passed: bool
    l2_ref_empirical: float
    l2_ref_constrained: float
    values: dict
    empirical_probs: np.ndarray | None = None
    fitted_probs: np.ndarray | None = None


@dataclass
class CellStat:
    value: float
    mc_stderr: float


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    truth: Pmf
    cells: dict
    dominance_violations: int
    nonconvex_fraction: dict
    certificate_failures: int
    replicates: list | None = None


@dataclass(frozen=True)
class CampaignRow:
    distribution: str
    param: float
    n: int
    estimator: str
    functional: str
    value: float
    mc_stderr: float


def thread_count(override: int | None = None) -> int:
    if override is not None:
        return max(1, int(override))
    raw = os.environ.get(ENV_THREADS, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _theta(probs: np.ndarray, functional: str) -> float:
    if functional == "p0":
        return float(probs[0])
    rep = moments(probs, u_max=1)
    return rep.variance if functional == "variance" else rep.entropy


def _run_replicate(spec, n, r, truth_probs, ref_probs, cfg) -> ReplicateRecord:
    xs = sample(spec.distribution, n, spec.seed ^ r)
    emp = empirical_from_samples(xs)
    res = fit(emp, cfg)
    emp_probs = emp.pmf.probs
    fit_probs = res.pmf.probs

    values = {}
    wanted_losses = [f for f in spec.functionals if f in LOSS_FUNCTIONALS]
    if wanted_losses:
        for est, probs in (("empirical", emp_probs), ("constrained", fit_probs)):
            rep = losses(probs, truth_probs)
            for f in wanted_losses:
                values[(est, f)] = getattr(rep, f)
    for f in spec.functionals:
        if f in THETA_FUNCTIONALS:
            values[("empirical", f)] = _theta(emp_probs, f)
            values[("constrained", f)] = _theta(fit_probs, f)

    return ReplicateRecord(
        n=n,
        index=r,
        nonconvex=not empirical_is_convex(emp),
        cert_passed=res.certificate.passed,
        l2_ref_empirical=losses(emp_probs, ref_probs).l2,
        l2_ref_constrained=losses(fit_probs, ref_probs).l2,
        values=values,
        empirical_probs=emp_probs,
        fitted_probs=fit_probs,
    )


def run_experiment(
    spec: ExperimentSpec,
    solver_cfg: SolverConfig | None = None,
    keep_replicates: bool = False,
    threads: int | None = None,
) -> ExperimentResult:
    """Run all replicates of one experiment and aggregate."""
    cfg = solver_cfg or SolverConfig()
    truth = materialize(spec.distribution)
    truth_probs = truth.probs
    if is_convex(truth_probs):
        ref_probs = truth_probs
    else:
        w, _, _ = project_vector(truth_probs, cfg)
        ref_probs = _K.eval_mixture(w, len(w))

    jobs = [(n, r) for n in spec.sample_sizes for r in range(spec.replicates)]
    workers = thread_count(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(
                pool.map(
                    lambda job: _run_replicate(
                        spec, job[0], job[1], truth_probs, ref_probs, cfg
                    ),
                    jobs,
                )
            )
    else:
        records = [
            _run_replicate(spec, n, r, truth_probs, ref_probs, cfg) for n, r in jobs
        ]

    theta0 = {f: _theta(truth_probs, f) for f in THETA_FUNCTIONALS}
    cells = {}
    nonconvex_fraction = {}
    dominance_violations = 0
    certificate_failures = 0
    for n in spec.sample_sizes:
        recs = [rec for rec in records if rec.n == n]
        R = len(recs)
        nonconvex_fraction[n] = sum(rec.nonconvex for rec in recs) / R
        dominance_violations += sum(
            rec.l2_ref_constrained > rec.l2_ref_empirical + DOMINANCE_SLACK
            for rec in recs
        )
        certificate_failures += sum(not rec.cert_passed for rec in recs)
        for est in ESTIMATORS:
            for f in spec.functionals:
                vals = np.array([rec.values[(est, f)] for rec in recs])
                if f in LOSS_FUNCTIONALS:
                    value = float(vals.mean())
                    se = float(vals.std(ddof=1) / np.sqrt(R)) if R > 1 else 0.0
                else:
                    sq = (vals - theta0[f]) ** 2
                    ms = float(sq.mean())
                    if theta0[f] == 0.0:
                        value, se = float("nan"), float("nan")
                    elif ms == 0.0:
                        value, se = 0.0, 0.0
                    else:
                        se_ms = float(sq.std(ddof=1) / np.sqrt(R)) if R > 1 else 0.0
                        value = float(np.sqrt(ms)) / theta0[f]
                        se = se_ms / (2.0 * float(np.sqrt(ms))) / theta0[f]
                cells[(n, est, f)] = CellStat(value=value, mc_stderr=se)

    return ExperimentResult(
        spec=spec,
        truth=truth,
        cells=cells,
        dominance_violations=dominance_violations,
        nonconvex_fraction=nonconvex_fraction,
        certificate_failures=certificate_failures,
        replicates=records if keep_replicates else None,
    )


def standard_grid(
    replicates: int = 1000,
    seed: int = 0,
    sample_sizes: tuple = (10, 100, 1000),
    functionals: tuple = ALL_FUNCTIONALS,
) -> list:
    """The nine-distribution benchmark grid used throughout the tests."""
    dists = [
        TrueDistribution("geometric", 0.9),
        TrueDistribution("geometric", 0.5),
        TrueDistribution("geometric", 0.1),
        TrueDistribution("triangular", 20),
        TrueDistribution("triangular", 5),
        TrueDistribution("triangular", 2),
        TrueDistribution("poisson", 0.59),
        TrueDistribution("poisson", 0.8),
        TrueDistribution("poisson", 1.0),
    ]
    return [
        ExperimentSpec(
            distribution=d,
            sample_sizes=sample_sizes,
            replicates=replicates,
            seed=seed,
            functionals=functionals,
        )
        for d in dists
    ]


def _short_kind(dist: TrueDistribution) -> str:
    return dist.label.split(":")[0]


def result_rows(result: ExperimentResult) -> list:
    spec = result.spec
    rows = []
    for n in spec.sample_sizes:
        for est in ESTIMATORS:
            for f in spec.functionals:
                cell = result.cells[(n, est, f)]
                rows.append(
                    CampaignRow(
                        distribution=_short_kind(spec.distribution),
                        param=spec.distribution.param,
                        n=n,
                        estimator=est,
                        functional=f,
                        value=cell.value,
                        mc_stderr=cell.mc_stderr,
                    )
                )
    return rows


def run_campaign(
    specs,
    solver_cfg: SolverConfig | None = None,
    threads: int | None = None,
) -> list:
    """Run several experiments, returning tidy rows.

    Failures do not abort the remaining specs; they are collected and
    raised together at the end.
    """
    rows = []
    failures = []
    for i, spec in enumerate(specs):
        try:
            rows.extend(result_rows(run_experiment(spec, solver_cfg, threads=threads)))
        except Exception as exc:
            failures.append((i, str(exc)))
    if failures:
        err = HarnessError(failures)
        err.rows = rows
        raise err
    return rows


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rows_to_csv(rows) -> str:
    lines = ["distribution,param,n,estimator,functional,value,mc_stderr"]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.distribution,
                    _fmt(r.param),
                    str(r.n),
                    r.estimator,
                    r.functional,
                    _fmt(r.value),
                    _fmt(r.mc_stderr),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def rows_to_json(rows) -> str:
    payload = {
        "schema_version": 1,
        "rows": [
            {
                "distribution": r.distribution,
                "param": _jsonable(r.param),
                "n": r.n,
                "estimator": r.estimator,
                "functional": r.functional,
                "value": _jsonable(r.value),
                "mc_stderr": _jsonable(r.mc_stderr),
            }
            for r in rows
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=None, separators=(",", ":")) + "\n"
