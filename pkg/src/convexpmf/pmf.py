"""Core types and operations for pmfs on the nonnegative integers.

A pmf is represented densely as a float64 vector of probabilities on
``0..support_max`` with the implicit convention that values beyond the
stored range are zero.  Convex pmfs are exactly the nonnegative mixtures
of the triangular sequences

    t_j(i) = 2 (j - i) / (j (j + 1))   for 0 <= i < j,  else 0,

each of which sums to one.  The mixture weight of order j recovers from
the pmf through the second difference at j:

    w_j = j (j + 1) / 2 * (f(j+1) + f(j-1) - 2 f(j)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import ACTIVE as _K

# Default tolerances for the core invariants.
MASS_TOL = 1e-10          # |sum - 1| for probability vectors
NONNEG_TOL = 1e-12        # how negative an entry may be before rejection
CONVEXITY_TOL = 1e-12     # second-difference slack for real-valued pmfs
ROUNDTRIP_TOL = 1e-12


def _as_vector(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional vector of probabilities")
    return arr


def _clean_nonnegative(arr: np.ndarray, what: str) -> np.ndarray:
    if arr.size and float(arr.min()) < -NONNEG_TOL:
        i = int(arr.argmin())
        raise ValueError(f"{what} has negative entry {arr[i]!r} at index {i}")
    return np.maximum(arr, 0.0)


@dataclass
class Pmf:
    """Probability mass function on {0, 1, 2, ...}.

    Parameters
    ----------
    probs : array_like
        Probabilities on 0..s.  Entries must be nonnegative (tiny negative
        float dust is clipped) and sum to one within ``MASS_TOL``.
        Trailing zeros are trimmed.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = _clean_nonnegative(_as_vector(self.probs), "pmf")
        nz = np.nonzero(arr)[0]
        if nz.size == 0:
            raise ValueError("pmf has no mass")
        arr = arr[: nz[-1] + 1].copy()
        total = float(arr.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"pmf mass {total!r} is not 1 within {MASS_TOL}")
        self.probs = arr

    @property
    def support_max(self) -> int:
        return len(self.probs) - 1

    def padded(self, length: int) -> np.ndarray:
        """Dense copy of the probabilities extended with zeros."""
        if length < len(self.probs):
            raise ValueError("padded length is shorter than the support")
        out = np.zeros(length)
        out[: len(self.probs)] = self.probs
        return out


@dataclass
class EmpiricalPmf:
    """Empirical pmf of an integer sample together with its metadata."""

    pmf: Pmf
    n: int
    distinct_values: np.ndarray

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("sample size must be positive")
        counts = self.pmf.probs * self.n
        rounded = np.rint(counts)
        if np.max(np.abs(counts - rounded)) > 1e-6:
            raise ValueError("empirical probabilities are not multiples of 1/n")
        observed = np.nonzero(self.pmf.probs)[0]
        dv = np.asarray(self.distinct_values, dtype=np.int64)
        if dv.shape != observed.shape or np.any(dv != observed):
            raise ValueError("distinct_values disagree with the nonzero entries")
        self.distinct_values = dv

    @property
    def counts(self) -> np.ndarray:
        """Exact integer counts per value, recovered from the pmf."""
        return np.rint(self.pmf.probs * self.n).astype(np.int64)


@dataclass
class TriangularMixture:
    """Sparse nonnegative mixture over the triangular basis.

    ``weights`` maps the basis order j (an integer >= 1) to its weight.
    Zero weights are dropped; the mixture may be empty.
    """

    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for j, wj in self.weights.items():
            jj = int(j)
            if jj != j or jj < 1:
                raise ValueError(f"basis order must be an integer >= 1, got {j!r}")
            wv = float(wj)
            if wv < -NONNEG_TOL:
                raise ValueError(f"negative mixture weight {wv!r} at order {jj}")
            if wv > 0.0:
                clean[jj] = wv
        self.weights = dict(sorted(clean.items()))

    @property
    def support(self) -> np.ndarray:
        return np.fromiter(self.weights.keys(), dtype=np.int64, count=len(self.weights))

    @property
    def mass(self) -> float:
        return float(sum(self.weights.values()))

    @property
    def max_order(self) -> int:
        return max(self.weights) if self.weights else 0

    def dense(self, length: int | None = None) -> np.ndarray:
        """Weights as a dense vector, entry k holding the order k+1 weight."""
        L = self.max_order if length is None else length
        out = np.zeros(L)
        for j, wj in self.weights.items():
            if j <= L:
                out[j - 1] = wj
        return out

    @classmethod
    def from_dense(cls, w: np.ndarray) -> "TriangularMixture":
        nz = np.nonzero(w)[0]
        return cls({int(k) + 1: float(w[k]) for k in nz})


def triangular_value(j: int, i: int) -> float:
    """Value t_j(i) of the order-j triangular sequence at point i."""
    if j < 1:
        raise ValueError(f"basis order must be >= 1, got {j}")
    if i < 0 or i >= j:
        return 0.0
    return 2.0 * (j - i) / (j * (j + 1.0))


def mixture_to_pmf(mixture: TriangularMixture) -> np.ndarray:
    """Pmf values of a mixture; sums to the mixture mass.

    Returns a dense vector on ``0..max_order-1`` (empty for the empty
    mixture, which represents the zero function).
    """
    L = mixture.max_order
    if L == 0:
        return np.zeros(0)
    return _K.eval_mixture(mixture.dense(), L)


def pmf_to_mixture(f, tol: float = CONVEXITY_TOL) -> TriangularMixture:
    """Unique triangular mixture representation of a convex pmf vector.

    Raises ``ValueError`` when ``f`` is not convex; the message names the
    first violating index.
    """
    arr = _clean_nonnegative(_as_vector(f), "pmf")
    ok, where = is_convex(arr, tol=tol, _return_index=True)
    if not ok:
        raise ValueError(f"vector is not convex: second difference negative at index {where}")
    s = int(np.nonzero(arr)[0][-1]) if arr.any() else -1
    # second differences computed in floats carry rounding noise of a
    # few eps, which the j(j+1)/2 factor would otherwise promote to
    # spurious high-order weights
    noise = 64.0 * np.finfo(np.float64).eps * max(1.0, float(arr.max(initial=0.0)))
    weights = {}
    for j in range(1, s + 2):
        fm1 = arr[j - 1]
        f0 = arr[j] if j <= s else 0.0
        fp1 = arr[j + 1] if j + 1 <= s else 0.0
        diff2 = fp1 + fm1 - 2.0 * f0
        if diff2 > noise:
            weights[j] = j * (j + 1) / 2.0 * diff2
    return TriangularMixture(weights)


def is_convex(f, tol: float = CONVEXITY_TOL, _return_index: bool = False):
    """Whether a nonnegative vector is convex on the integers.

    Checks second differences f(i+1) - 2 f(i) + f(i-1) >= -tol for every
    i from 1 through support_max + 1, with zero extension beyond the
    stored range.  Use ``tol=0`` for exact integer inputs such as counts.
    """
    arr = _as_vector(f)
    s = int(np.nonzero(arr)[0][-1]) if arr.any() else -1
    for i in range(1, s + 2):
        fm1 = arr[i - 1]
        f0 = arr[i] if i <= s else 0.0
        fp1 = arr[i + 1] if i + 1 <= s else 0.0
        if fp1 + fm1 - 2.0 * f0 < -tol:
            return (False, i) if _return_index else False
    return (True, None) if _return_index else True


def empirical_is_convex(emp: EmpiricalPmf) -> bool:
    # Integer count arithmetic is exact, so no tolerance is needed.
    return is_convex(emp.counts.astype(np.float64), tol=0.0)


def cumulative_F(p, j: int) -> float:
    """Cumulative sum F_p(j) = sum_{i<=j} p(i); zero for j < 0."""
    arr = _as_vector(p)
    if j < 0:
        return 0.0
    return float(arr[: j + 1].sum())


def cumulative_H(p, j: int) -> float:
    """Double cumulative sum H_p(j) = sum_{i<=j} F_p(i); zero for j < 0."""
    arr = _as_vector(p)
    if j < 0:
        return 0.0
    F = np.cumsum(arr)
    m = min(j, len(arr) - 1)
    out = float(F[: m + 1].sum())
    if j >= len(arr):
        # beyond the stored range F is constant at the total mass
        out += (j - len(arr) + 1) * float(F[-1])
    return out


def cumulative_H_vector(p, upto: int) -> np.ndarray:
    """H_p(0..upto) in one pass, used by the optimality certificate."""
    arr = _as_vector(p)
    F = np.cumsum(arr)
    if upto + 1 > len(F):
        F = np.concatenate([F, np.full(upto + 1 - len(F), F[-1] if len(F) else 0.0)])
    return np.cumsum(F[: upto + 1])


def empirical_from_samples(samples) -> EmpiricalPmf:
    """Empirical pmf of an iterable of nonnegative integers."""
    xs = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples)
    if xs.size == 0:
        raise ValueError("no observations")
    if not np.issubdtype(xs.dtype, np.integer):
        as_int = np.rint(xs).astype(np.int64)
        if np.any(as_int != xs):
            raise ValueError("observations must be integers")
        xs = as_int
    if xs.min() < 0:
        raise ValueError("observations must be nonnegative")
    counts = np.bincount(xs)
    n = int(xs.size)
    pmf = Pmf(counts / n)
    return EmpiricalPmf(pmf=pmf, n=n, distinct_values=np.nonzero(counts)[0])


def empirical_from_counts(values, counts) -> EmpiricalPmf:
    """Empirical pmf from distinct values and their positive counts."""
    vals = np.asarray(values, dtype=np.int64)
    cnts = np.asarray(counts, dtype=np.int64)
    if vals.size == 0:
        raise ValueError("no observations")
    if vals.size != cnts.size:
        raise ValueError("values and counts differ in length")
    if np.unique(vals).size != vals.size:
        raise ValueError("duplicate values in count data")
    if vals.min() < 0:
        raise ValueError("observations must be nonnegative")
    if cnts.min() <= 0:
        raise ValueError("counts must be positive")
    n = int(cnts.sum())
    dense = np.zeros(int(vals.max()) + 1)
    dense[vals] = cnts
    pmf = Pmf(dense / n)
    return EmpiricalPmf(pmf=pmf, n=n, distinct_values=np.sort(vals))
