"""Loss functionals, moment summaries and the optimality certificate.

The certificate re-checks a fitted estimate from scratch, without
trusting any state kept by the solver:

* directional derivatives must be nonnegative for every basis order up
  to the final order plus a lookahead window, and zero on the support
  (beyond the final order they are all proportional to the mass defect,
  so a short window is representative);
* the double cumulative sums of the estimate must dominate those of the
  empirical pmf everywhere, with equality wherever the estimate changes
  slope;
* the estimate must be piecewise linear in the regions forced by the
  geometry of the observations: below the smallest observation, above
  the largest one, and with at most two slope changes (consecutive if
  two) strictly between neighbouring observed values;
* the total mass must be one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import ACTIVE as _K
from .pmf import EmpiricalPmf, Pmf, cumulative_H_vector, _as_vector


@dataclass(frozen=True)
class CertificateTolerances:
    dj: float = 1e-8
    h_slack: float = 1e-9
    h_kink: float = 1e-8
    mass: float = 1e-8
    consistency: float = 1e-8
    kink_detect: float = 1e-9
    lookahead: int = 10


@dataclass
class LossReport:
    l2: float
    kolmogorov: float
    hellinger: float
    tv: float


@dataclass
class MomentReport:
    mean: float
    variance: float
    centered_moments: dict
    entropy: float
    p0: float


@dataclass
class CertificateReport:
    dj_min_off_support: float
    dj_max_abs_on_support: float
    h_min_slack: float
    h_kink_residual: float
    mass_residual: float
    structure_ok: bool
    consistency_residual: float
    tolerances: CertificateTolerances
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def _pair(p, q):
    pv = _as_vector(p.probs if isinstance(p, Pmf) else p)
    qv = _as_vector(q.probs if isinstance(q, Pmf) else q)
    L = max(len(pv), len(qv))
    pp = np.zeros(L)
    pp[: len(pv)] = pv
    qq = np.zeros(L)
    qq[: len(qv)] = qv
    return pp, qq


def losses(p, q) -> LossReport:
    """Squared l2, Kolmogorov, squared Hellinger and total variation."""
    pp, qq = _pair(p, q)
    diff = pp - qq
    return LossReport(
        l2=float(np.sum(diff * diff)),
        kolmogorov=float(np.max(np.abs(np.cumsum(diff)))),
        hellinger=0.5 * float(np.sum((np.sqrt(pp) - np.sqrt(qq)) ** 2)),
        tv=0.5 * float(np.sum(np.abs(diff))),
    )


def moments(p, center: float | None = None, u_max: int = 4) -> MomentReport:
    """Mean, variance, centered absolute moments, entropy and p(0).

    ``center`` defaults to the mean.  Entropy uses natural logarithm
    with the 0 log 0 = 0 convention.
    """
    pv = _as_vector(p.probs if isinstance(p, Pmf) else p)
    idx = np.arange(len(pv))
    mean = float(np.dot(idx, pv))
    a = mean if center is None else float(center)
    pos = pv[pv > 0.0]
    return MomentReport(
        mean=mean,
        variance=float(np.dot((idx - mean) ** 2, pv)),
        centered_moments={
            u: float(np.dot(np.abs(idx - a) ** u, pv)) for u in range(1, u_max + 1)
        },
        entropy=-float(np.dot(pos, np.log(pos))),
        p0=float(pv[0]) if len(pv) else 0.0,
    )


def slope_change_points(f, tol: float = 1e-9) -> list:
    """Indices where a convex vector strictly changes slope.

    Checks second differences against ``tol`` from 1 through
    support_max + 1 under the zero-extension convention.
    """
    arr = _as_vector(f.probs if isinstance(f, Pmf) else f)
    s = int(np.nonzero(arr)[0][-1]) if arr.any() else -1
    out = []
    for i in range(1, s + 2):
        fm1 = arr[i - 1]
        f0 = arr[i] if i <= s else 0.0
        fp1 = arr[i + 1] if i + 1 <= s else 0.0
        if fp1 + fm1 - 2.0 * f0 > tol:
            out.append(i)
    return out


def _structure_ok(fhat: np.ndarray, ptilde: EmpiricalPmf, kinks: list) -> bool:
    shat = len(fhat) - 1
    obs = ptilde.distinct_values
    kink_set = set(kinks)
    lo = int(obs[0])
    hi = int(obs[-1])
    # linear below the smallest observation
    if any(1 <= k <= lo - 1 for k in kink_set):
        return False
    # linear from the largest observation to the end of the support
    if any(hi + 1 <= k <= shat - 1 for k in kink_set):
        return False
    # between neighbouring observations: at most two interior slope
    # changes, adjacent when there are two
    if len(obs) >= 2:
        for a, b in zip(obs[:-1], obs[1:]):
            inner = sorted(k for k in kink_set if a < k < b)
            if len(inner) > 2:
                return False
            if len(inner) == 2 and inner[1] != inner[0] + 1:
                return False
    return True


def certify(
    fitres,
    ptilde: EmpiricalPmf,
    tols: CertificateTolerances | None = None,
) -> CertificateReport:
    """Re-verify the optimality of a fitted estimate from first principles.

    ``fitres`` only needs ``pmf``, ``mixture`` and ``final_L``
    attributes, so results reloaded from disk can be certified too.
    The report never raises; failed conditions are listed by name in
    ``violations``.
    """
    tols = tols or CertificateTolerances()
    violations = []

    mixture = fitres.mixture
    fhat = fitres.pmf.probs
    pt = ptilde.pmf.probs

    # derivative conditions, evaluated from the mixture
    Lw = int(fitres.final_L) + tols.lookahead
    w = mixture.dense(Lw)
    pt_pad = np.zeros(Lw)
    pt_pad[: min(Lw, len(pt))] = pt[: min(Lw, len(pt))]
    d = _K.dj_all(_K.eval_mixture(w, Lw) - pt_pad)
    on = np.zeros(Lw, dtype=bool)
    for j in mixture.support:
        if j <= Lw:
            on[j - 1] = True
    dj_min_off = float(d[~on].min()) if (~on).any() else 0.0
    dj_max_on = float(np.max(np.abs(d[on]))) if on.any() else 0.0
    if dj_min_off < -tols.dj:
        violations.append("derivative_nonnegative_off_support")
    if dj_max_on > tols.dj:
        violations.append("derivative_zero_on_support")

    # mixture and stored pmf must describe the same function
    recon = _K.eval_mixture(w, max(len(fhat), Lw))
    consistency = float(np.max(np.abs(recon[: len(fhat)] - fhat)))
    if len(recon) > len(fhat):
        consistency = max(consistency, float(np.max(np.abs(recon[len(fhat) :]))))
    if consistency > tols.consistency:
        violations.append("mixture_pmf_consistency")

    # double cumulative sum dominance, equality at slope changes
    upto = max(len(fhat), len(pt))
    Hhat = cumulative_H_vector(fhat, upto)
    Hemp = cumulative_H_vector(pt, upto)
    slack = Hhat - Hemp
    h_min_slack = float(slack.min())
    if h_min_slack < -tols.h_slack:
        violations.append("cumulative_dominance")
    kinks = slope_change_points(fhat, tol=tols.kink_detect)
    h_kink = 0.0
    for l in kinks:
        h_kink = max(h_kink, abs(float(slack[l - 1])))
    if h_kink > tols.h_kink:
        violations.append("cumulative_equality_at_slope_changes")

    structure = _structure_ok(fhat, ptilde, kinks)
    if not structure:
        violations.append("piecewise_linear_structure")

    mass_residual = abs(float(fhat.sum()) - 1.0)
    if mass_residual > tols.mass:
        violations.append("unit_mass")

    return CertificateReport(
        dj_min_off_support=dj_min_off,
        dj_max_abs_on_support=dj_max_on,
        h_min_slack=h_min_slack,
        h_kink_residual=h_kink,
        mass_residual=mass_residual,
        structure_ok=structure,
        consistency_residual=consistency,
        tolerances=tols,
        violations=violations,
    )
