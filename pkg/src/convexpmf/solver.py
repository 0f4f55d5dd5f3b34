"""Least squares projection of an empirical pmf onto the convex cone.

The estimator minimizes

    Q(f) = 0.5 * sum_i f(i)^2 - sum_i f(i) ptilde(i)

over convex pmf vectors f, or equivalently the same criterion Psi over
nonnegative triangular mixtures.  The solver works in mixture space:
starting from the single highest available basis order, it repeatedly
adds the basis direction with the most negative directional derivative
and re-solves the restricted normal equations, shrinking back to the
boundary whenever a coefficient would go negative.  The largest allowed
basis order L grows geometrically until the fitted mixture carries the
same mass as the target, which identifies the unconstrained-over-L
optimum with the projection itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from ._kernels import ACTIVE as _K
from ._kernels import FEAS_TOL
from .pmf import EmpiricalPmf, Pmf, TriangularMixture, _as_vector, _clean_nonnegative

# Hard ceiling on the largest basis order; reaching it means the mass
# identity never triggered, which signals a numerical defect.
_L_CEILING = 2_000_000
_WEIGHT_DUST = 1e-10
_SHARP_D_TOL = 1e-12
# Weights this small (relative to the target mass) are below every
# reported tolerance; near-degenerate boundary supports produce them at
# the forward-error level of the restricted solves, and keeping them
# extends the fitted support by spurious points.
_POLISH_DUST = 1e-8


class SolverError(RuntimeError):
    """Raised when the solver cannot certify its own convergence."""

    def __init__(self, message, mixture=None, trace=None):
        super().__init__(message)
        self.mixture = mixture
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    """Solver tuning knobs.

    ``d_tol`` bounds how negative a directional derivative may stay at
    convergence, ``mass_tol`` is the stopping slack for the mass
    identity, and ``growth_factor`` controls the geometric growth of the
    largest basis order between outer rounds.
    """

    d_tol: float = 1e-10
    mass_tol: float = 1e-8
    max_inner: int = 10000
    max_outer: int = 60
    growth_factor: float = 0.5

    def next_order(self, L: int) -> int:
        return L + max(1, math.ceil(L * self.growth_factor))


@dataclass(frozen=True)
class TraceRecord:
    """One derivative scan: iteration counter within its round, the
    active set size entering the scan, and the criterion value."""

    L: int
    iteration: int
    active_size: int
    objective: float


@dataclass
class FitResult:
    pmf: Pmf
    mixture: TriangularMixture
    objective: float
    final_L: int
    n_iterations: int
    trace: list
    certificate: object = None


def _target_vector(target) -> np.ndarray:
    if isinstance(target, EmpiricalPmf):
        return target.pmf.probs
    if isinstance(target, Pmf):
        return target.probs
    return _as_vector(target)


def _padded_target(target: np.ndarray, L: int) -> np.ndarray:
    # Basis orders <= L never see entries beyond L - 1, so truncating a
    # longer target is harmless for the restricted problems.
    out = np.zeros(L)
    m = min(L, len(target))
    out[:m] = target[:m]
    return out


def _mixture_dense(pi, length: int | None = None) -> np.ndarray:
    """Dense (possibly signed) weight vector from a mixture-like object."""
    if isinstance(pi, TriangularMixture):
        return pi.dense(length)
    if isinstance(pi, Mapping):
        if not pi:
            return np.zeros(0 if length is None else length)
        orders = []
        for j in pi:
            jj = int(j)
            if jj != j or jj < 1:
                raise ValueError(f"basis order must be an integer >= 1, got {j!r}")
            orders.append(jj)
        L = max(orders) if length is None else length
        out = np.zeros(L)
        for j, wj in pi.items():
            if int(j) <= L:
                out[int(j) - 1] = float(wj)
        return out
    raise TypeError("expected a TriangularMixture or a mapping of order -> weight")


def criterion_Q(f, target) -> float:
    """Quadratic criterion of a pmf-like vector against a target."""
    fv = _as_vector(f)
    tv = _target_vector(target)
    L = max(len(fv), len(tv))
    fp = np.zeros(L)
    fp[: len(fv)] = fv
    return float(_K.objective(fp, _padded_target(tv, L)))


def criterion_Psi(pi, target) -> float:
    """Quadratic criterion of a (possibly signed) mixture against a target."""
    w = _mixture_dense(pi)
    return criterion_Q(_K.eval_mixture(w, len(w)), target)


def directional_derivative_d(j: int, pi, target) -> float:
    """Directional derivative of the criterion along basis order ``j``."""
    if j < 1:
        raise ValueError(f"basis order must be >= 1, got {j}")
    w = _mixture_dense(pi)
    tv = _target_vector(target)
    L = max(j, len(w), len(tv))
    resid = _K.eval_mixture(w, L) - _padded_target(tv, L)
    return float(_K.dj_all(resid)[j - 1])


def restricted_minimizer(S, target) -> dict:
    """Unconstrained minimizer of the criterion restricted to support S.

    Solves the normal equations of the quadratic criterion over signed
    coefficients supported on the given basis orders.  Components may be
    negative; the directional derivative vanishes on S at the solution.
    """
    orders = sorted({int(j) for j in S})
    if not orders:
        raise ValueError("support set is empty")
    if orders[0] < 1:
        raise ValueError(f"basis orders must be >= 1, got {orders[0]}")
    js = np.asarray(orders, dtype=np.int64)
    tv = _target_vector(target)
    L = max(orders[-1], len(tv))
    pt = _padded_target(tv, L)
    cp0 = np.cumsum(pt)
    cp1 = np.cumsum(np.arange(L) * pt)
    G = _K.gram(js)
    b = _K.rhs(js, cp0, cp1)
    try:
        x = np.linalg.solve(G, b)
        x = x + np.linalg.solve(G, b - G @ x)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular restricted system for support {orders}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError(f"ill-conditioned restricted system for support {orders}")
    return {int(j): float(v) for j, v in zip(orders, x)}


def _records_from(trace: np.ndarray, nt: int, L: int) -> list:
    return [
        TraceRecord(
            L=L,
            iteration=int(trace[r, 0]),
            active_size=int(trace[r, 1]),
            objective=float(trace[r, 2]),
        )
        for r in range(nt)
    ]


def _solve_fixed(target: np.ndarray, L: int, cfg: SolverConfig, warm_js, warm_w):
    pt = _padded_target(target, L)
    try:
        w, status, trace, nt = _K.solve_fixed(
            pt, cfg.d_tol, FEAS_TOL, int(cfg.max_inner), warm_js, warm_w
        )
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular restricted system at order {L}") from exc
    records = _records_from(trace, nt, L)
    if status == 1:
        raise SolverError(
            f"inner iteration cap {cfg.max_inner} exceeded at order {L}",
            mixture=TriangularMixture.from_dense(w),
            trace=records,
        )
    if status == 2:
        raise SolverError(
            f"numerical failure in the restricted solve at order {L}",
            mixture=TriangularMixture.from_dense(w),
            trace=records,
        )
    # weights at roundoff scale are noise left over from degenerate
    # boundary steps; dropping them perturbs the estimate far below
    # every tolerance and keeps the reported support honest
    w[w <= _WEIGHT_DUST * max(1.0, float(w.sum()))] = 0.0
    return w, records


def fit_fixed_L(target, L: int, cfg: SolverConfig | None = None):
    """Minimize the criterion over mixtures with orders up to ``L``.

    Returns the optimal mixture and the iteration trace.  The result is
    the projection itself only when its mass matches the target mass;
    :func:`fit` automates that check.
    """
    if L < 1:
        raise ValueError(f"largest basis order must be >= 1, got {L}")
    cfg = cfg or SolverConfig()
    tv = _target_vector(target)
    empty_js = np.zeros(0, dtype=np.int64)
    w, records = _solve_fixed(tv, L, cfg, empty_js, np.zeros(0))
    return TriangularMixture.from_dense(w), records


def _polish_mass(tv: np.ndarray, w: np.ndarray, m0: float) -> np.ndarray:
    """Re-solve on the converged support with the mass identity imposed.

    The unconstrained restricted solve leaves a mass defect at the
    forward error level of its linear system, and the cumulative
    dominance margin amplifies that defect linearly in the support
    length.  The exact minimizer satisfies the identity, so imposing it
    here removes pure noise.  Falls back to the input weights whenever
    the constrained solve misbehaves.
    """
    live = np.nonzero(w)[0]
    pt = np.zeros(int(live[-1]) + 1) if live.size else np.zeros(0)
    pt[: min(len(pt), len(tv))] = tv[: min(len(pt), len(tv))]
    cp0 = np.cumsum(pt)
    cp1 = np.cumsum(np.arange(len(pt), dtype=np.float64) * pt)
    dust = _POLISH_DUST * max(1.0, m0)
    for _pass in range(len(live) + 1):
        if live.size == 0:
            return w
        js = (live + 1).astype(np.int64)
        k = live.size
        G = _K.gram(js)
        b = _K.rhs(js, cp0, cp1)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = G
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs_full = np.append(b, m0)
        try:
            sol = np.linalg.solve(kkt, rhs_full)
            sol = sol + np.linalg.solve(kkt, rhs_full - kkt @ sol)
            sol = sol + np.linalg.solve(kkt, rhs_full - kkt @ sol)
        except np.linalg.LinAlgError:
            return w
        if not np.all(np.isfinite(sol)):
            return w
        x, lam = sol[:k], sol[k]
        if x.min() > dust:
            if abs(lam) > 1e-9:
                # enforcing the identity required a real gradient push,
                # so the support disagrees with the constraint; keep the
                # unconstrained answer
                return w
            out = np.zeros_like(w)
            out[live] = x
            return out
        live = live[x > dust]
    return w


def project_vector(target, cfg: SolverConfig | None = None):
    """Project a nonnegative vector onto the cone of convex sequences.

    The target does not have to be a probability vector; the projection
    scales linearly, so the mass identity is checked against the target
    mass.  Returns ``(weights, trace, final_L)`` with dense weights.
    """
    cfg = cfg or SolverConfig()
    tv = _clean_nonnegative(_as_vector(target), "target").copy()
    nz = np.nonzero(tv)[0]
    if nz.size == 0:
        raise ValueError("target vector has no mass")
    tv = tv[: nz[-1] + 1]
    m0 = float(tv.sum())
    L = len(tv)
    warm_js = np.zeros(0, dtype=np.int64)
    warm_w = np.zeros(0)
    records = []
    work = cfg
    prev_key = None
    for _round in range(cfg.max_outer):
        w, recs = _solve_fixed(tv, L, work, warm_js, warm_w)
        records.extend(recs)
        gap = abs(float(w.sum()) - m0)
        if gap <= cfg.mass_tol:
            if work.d_tol > _SHARP_D_TOL:
                # resolve the support at a much tighter derivative
                # threshold: leftover slacks of order d_tol are magnified
                # by half the squared support length in the cumulative
                # dominance margins, so the documented threshold alone is
                # too coarse for long supports
                live = np.nonzero(w)[0]
                try:
                    w, recs = _solve_fixed(
                        tv,
                        L,
                        replace(work, d_tol=_SHARP_D_TOL),
                        (live + 1).astype(np.int64),
                        w[live].copy(),
                    )
                    records.extend(recs)
                except SolverError:
                    pass
            return _polish_mass(tv, w, m0), records, L
        live = np.nonzero(w)[0]
        warm_js = (live + 1).astype(np.int64)
        warm_w = w[live].copy()
        key = (float(w.sum()), warm_js.tobytes())
        if key == prev_key:
            # growing the order reproduced the same interior solution,
            # so the mass defect is a resolution problem: sharpen the
            # derivative threshold and re-solve at this order
            if work.d_tol <= 1e-15:
                raise SolverError(
                    "mass identity unreachable at floating point resolution",
                    mixture=TriangularMixture.from_dense(w),
                    trace=records,
                )
            work = replace(work, d_tol=work.d_tol / 100.0)
            continue
        prev_key = key
        L = cfg.next_order(L)
        if L > _L_CEILING:
            raise SolverError(
                "basis order grew past the hard ceiling without meeting "
                "the mass identity",
                mixture=TriangularMixture.from_dense(w),
                trace=records,
            )
    raise SolverError(
        f"outer growth cap {cfg.max_outer} exceeded before the mass identity was met",
        trace=records,
    )


def fit(ptilde: EmpiricalPmf, cfg: SolverConfig | None = None) -> FitResult:
    """Least squares convex pmf estimate of an empirical pmf.

    Returns the unique convex minimizer of the criterion, which is
    automatically a probability pmf, together with its mixture
    representation, trace and optimality certificate.
    """
    if not isinstance(ptilde, EmpiricalPmf):
        raise TypeError("fit expects an EmpiricalPmf; see empirical_from_samples")
    cfg = cfg or SolverConfig()

    if ptilde.pmf.support_max == 0:
        # Every observation is zero, so the estimate is the point mass
        # at zero (the order-1 basis element on its own).
        result = FitResult(
            pmf=Pmf(np.array([1.0])),
            mixture=TriangularMixture({1: 1.0}),
            objective=-0.5,
            final_L=1,
            n_iterations=0,
            trace=[],
        )
    else:
        w, records, final_L = project_vector(ptilde.pmf.probs, cfg)
        mixture = TriangularMixture.from_dense(w)
        J = mixture.max_order
        f = _K.eval_mixture(w[:J], J)
        rounds = len({r.L for r in records})
        result = FitResult(
            pmf=Pmf(f),
            mixture=mixture,
            objective=criterion_Q(f, ptilde),
            final_L=final_L,
            n_iterations=len(records) - rounds,
            trace=records,
        )

    from .diagnostics import certify

    result.certificate = certify(result, ptilde)
    return result
