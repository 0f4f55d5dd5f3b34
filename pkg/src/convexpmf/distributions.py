"""True distributions used by the simulation harness.

Three families, each materialized as a finite pmf vector:

* geometric(gamma): p(i) = gamma (1 - gamma)^i, convex for every gamma
  in (0, 1];
* triangular(j): the order-j triangular basis sequence itself;
* poisson(lam): convex exactly when lam <= 2 - sqrt(2), which makes it
  the misspecification family.

Infinite-support families are truncated where the remaining tail mass
drops below ``TAIL_TOL`` and renormalized, which preserves convexity
judgements at the tolerances used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pmf import Pmf

TAIL_TOL = 1e-12

# Convexity threshold of the poisson family.
POISSON_CONVEXITY_THRESHOLD = 2.0 - math.sqrt(2.0)

_KINDS = ("geometric", "triangular", "poisson")
_ALIASES = {"geom": "geometric", "tri": "triangular", "pois": "poisson"}


@dataclass(frozen=True)
class TrueDistribution:
    """A sampling distribution with a known finite materialization."""

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "geometric" and not (0.0 < self.param <= 1.0):
            raise ValueError(f"geometric parameter must be in (0, 1], got {self.param}")
        if self.kind == "triangular":
            if int(self.param) != self.param or self.param < 1:
                raise ValueError(
                    f"triangular order must be an integer >= 1, got {self.param}"
                )
        if self.kind == "poisson" and self.param <= 0.0:
            raise ValueError(f"poisson rate must be positive, got {self.param}")

    @property
    def truncation(self) -> int:
        """Largest support point kept after tail truncation."""
        if self.kind == "triangular":
            return int(self.param) - 1
        if self.kind == "geometric":
            gamma = self.param
            if gamma == 1.0:
                return 0
            # tail mass beyond K is (1 - gamma)^(K + 1)
            return max(0, math.ceil(math.log(TAIL_TOL) / math.log1p(-gamma)) - 1)
        # poisson: walk the pmf until the tail is negligible
        lam = self.param
        term = math.exp(-lam)
        acc = term
        k = 0
        while 1.0 - acc > TAIL_TOL:
            k += 1
            term *= lam / k
            acc += term
            if k > 100000:
                raise RuntimeError("poisson truncation failed to converge")
        return k

    @property
    def label(self) -> str:
        short = {v: k for k, v in _ALIASES.items()}[self.kind]
        if self.kind == "triangular":
            return f"{short}:{int(self.param)}"
        return f"{short}:{self.param:g}"


def parse_distribution(text: str) -> TrueDistribution:
    """Parse a spec like ``geom:0.5``, ``tri:20`` or ``pois:1.0``."""
    parts = text.strip().split(":")
    if len(parts) != 2:
        raise ValueError(
            f"cannot parse distribution {text!r}; expected kind:param like geom:0.5"
        )
    kind_token, param_token = parts
    lowered = kind_token.lower()
    kind = _ALIASES.get(lowered, lowered)
    if kind not in ("geometric", "triangular", "poisson"):
        raise ValueError(
            f"unknown distribution kind {kind_token!r}; expected geom, tri or pois"
        )
    try:
        param = float(param_token)
    except ValueError as exc:
        raise ValueError(f"bad parameter in distribution spec {text!r}") from exc
    if kind == "triangular":
        if param != int(param):
            raise ValueError(f"triangular order must be an integer, got {param_token!r}")
        return TrueDistribution(kind, int(param))
    return TrueDistribution(kind, param)


def materialize(dist: TrueDistribution) -> Pmf:
    """Finite, renormalized pmf vector of the distribution."""
    K = dist.truncation
    i = np.arange(K + 1, dtype=np.float64)
    if dist.kind == "triangular":
        j = float(dist.param)
        probs = 2.0 * (j - i) / (j * (j + 1.0))
    elif dist.kind == "geometric":
        gamma = dist.param
        probs = gamma * np.exp(i * math.log1p(-gamma)) if gamma < 1.0 else np.ones(1)
    else:
        lam = dist.param
        # stable evaluation through log factorials
        probs = np.exp(-lam + i * math.log(lam) - _log_factorial(i)) if lam > 0 else None
    return Pmf(probs / probs.sum())


def _log_factorial(i: np.ndarray) -> np.ndarray:
    return np.array([math.lgamma(v + 1.0) for v in i])


def sample(dist: TrueDistribution, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` integers by inverse cdf on the materialized pmf.

    Deterministic for a given ``(dist, n, seed)`` triple.
    """
    if n <= 0:
        raise ValueError(f"sample size must be positive, got {n}")
    probs = materialize(dist).probs
    cdf = np.cumsum(probs)
    u = np.random.default_rng(seed).random(n)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1).astype(
        np.int64
    )
