"""Reference solver used to cross-check the production path.

This module re-derives the convex estimate by a different route: it
materializes the design matrix whose columns are the triangular basis
sequences and runs a classic Lawson-Hanson active set method for
nonnegative least squares on it, with dense ``lstsq`` subproblem solves.
Nothing here shares code with the production kernels, so agreement
between the two is meaningful evidence rather than a tautology.

Intended for tests; it is quadratic in memory and makes no attempt to
be fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pmf import EmpiricalPmf, Pmf, _as_vector


@dataclass
class OracleProblem:
    """Explicit nonnegative least squares formulation.

    ``design`` has one column per basis order 1..L evaluated on the
    points 0..L-1; ``target`` is the empirical pmf padded to length L.
    """

    L: int
    design: np.ndarray
    target: np.ndarray


def triangular_design(L: int) -> np.ndarray:
    """Dense (L, L) matrix with column j-1 holding the order-j sequence."""
    if L < 1:
        raise ValueError(f"design needs at least one column, got L={L}")
    i = np.arange(L, dtype=np.float64).reshape(-1, 1)
    j = np.arange(1, L + 1, dtype=np.float64).reshape(1, -1)
    return np.where(i < j, 2.0 * (j - i) / (j * (j + 1.0)), 0.0)


def oracle_problem(target, L: int) -> OracleProblem:
    tv = _as_vector(_extract(target))
    padded = np.zeros(L)
    m = min(L, len(tv))
    padded[:m] = tv[:m]
    return OracleProblem(L=L, design=triangular_design(L), target=padded)


def _extract(target):
    if isinstance(target, EmpiricalPmf):
        return target.pmf.probs
    if isinstance(target, Pmf):
        return target.probs
    return target


def nnls(A: np.ndarray, y: np.ndarray, grad_tol: float = 1e-12, max_iter: int | None = None):
    """Lawson-Hanson nonnegative least squares.

    Minimizes ||A x - y||_2 subject to x >= 0.  Returns the solution
    vector.  ``grad_tol`` is the stopping threshold on the positive part
    of the gradient of the residual sum of squares.
    """
    m, ncol = A.shape
    if max_iter is None:
        max_iter = 3 * ncol + 30
    x = np.zeros(ncol)
    passive = np.zeros(ncol, dtype=bool)
    for _outer in range(max_iter):
        grad = A.T @ (y - A @ x)
        grad_free = np.where(passive, -np.inf, grad)
        k = int(np.argmax(grad_free))
        if grad_free[k] <= grad_tol:
            break
        passive[k] = True
        while True:
            cols = np.nonzero(passive)[0]
            z = np.zeros(ncol)
            z[cols], *_ = np.linalg.lstsq(A[:, cols], y, rcond=None)
            if z[cols].min() >= -1e-14:
                x = np.maximum(z, 0.0)
                break
            # step back to the first coefficient that hits the boundary
            shrink = cols[z[cols] < 0.0]
            alpha = np.min(x[shrink] / (x[shrink] - z[shrink]))
            x = x + alpha * (z - x)
            drop = passive & (x <= 1e-14)
            x[drop] = 0.0
            passive[drop] = False
            if not passive.any():
                break
    return x


def kkt_residuals(A: np.ndarray, y: np.ndarray, x: np.ndarray):
    """Stationarity and complementary slackness residuals at ``x``.

    Returns ``(min_gradient, max_slackness)`` where the first must be
    >= -1e-10 and the second <= 1e-10 for a valid solution.
    """
    g = A.T @ (A @ x - y)
    return float(g.min()), float(np.max(np.abs(g * x)))


def oracle_solve(problem: OracleProblem) -> np.ndarray:
    """Solve the explicit problem and verify its own optimality."""
    x = nnls(problem.design, problem.target)
    min_grad, slack = kkt_residuals(problem.design, problem.target, x)
    if min_grad < -1e-10 or slack > 1e-10:
        raise RuntimeError(
            f"oracle failed its optimality check: gradient {min_grad}, "
            f"slackness {slack}"
        )
    return x


def oracle_fit(target, mass_tol: float = 1e-8, max_outer: int = 60) -> Pmf:
    """Full reference estimate with the same order-growth schedule."""
    tv = _as_vector(_extract(target)).copy()
    nz = np.nonzero(tv)[0]
    if nz.size == 0:
        raise ValueError("target vector has no mass")
    tv = tv[: nz[-1] + 1]
    m0 = float(tv.sum())
    L = len(tv)
    for _round in range(max_outer):
        problem = oracle_problem(tv, L)
        x = oracle_solve(problem)
        if abs(float(x.sum()) - m0) <= mass_tol:
            # lstsq leaves roundoff-scale weights on columns that the
            # exact solution excludes; drop them so the support is honest
            x[x <= 1e-13 * max(1.0, float(x.max(initial=0.0)))] = 0.0
            fitted = problem.design @ x
            last = np.nonzero(x)[0][-1]
            return Pmf(fitted[: last + 1])
        L = L + max(1, -(-L // 2))
    raise RuntimeError(f"oracle failed to meet the mass identity within {max_outer} rounds")
