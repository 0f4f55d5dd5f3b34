"""Hot numeric kernels for the convex pmf solver.

Everything here operates on dense float64 arrays.  A mixture over the
triangular basis is stored as a vector ``w`` of length L where ``w[k]``
is the weight attached to the triangular sequence of order ``k + 1``.

The kernel bodies are written once, in numba-compatible vectorized
numpy, and compiled (or not) by :func:`build_kernels` depending on the
requested backend.  ``ACTIVE`` holds the set picked from the
``CONVEXPMF_BACKEND`` environment flag at import time; the benchmark
script builds both sets side by side.

Status codes returned by ``solve_fixed``:

* 0: converged, every directional derivative >= -d_tol
* 1: inner iteration cap exceeded
* 2: numerical failure (non-finite solve result or a degenerate
  boundary step)
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ._backend import BACKEND, noop_jit

# Tolerance for treating a solved coefficient as nonnegative.  Absolute,
# since mixture weights live on the probability scale.
FEAS_TOL = 1e-12


class KernelSet(NamedTuple):
    backend: str
    eval_mixture: object
    dj_all: object
    gram: object
    rhs: object
    objective: object
    solve_fixed: object


def build_kernels(backend: str) -> KernelSet:
    """Build the kernel set for ``backend`` ("numba" or "numpy")."""
    if backend == "numba":
        from numba import njit

        def jit(f):
            return njit(nogil=True)(f)

    elif backend == "numpy":
        jit = noop_jit
    else:
        raise ValueError(f"unknown backend {backend!r}")

    @jit
    def eval_mixture(w, out_len):
        # pmf values of the mixture: f(i) = sum_{j > i} w_j * t_j(i) with
        # t_j(i) = 2 (j - i) / (j (j + 1)).  Split into two suffix sums so
        # the whole evaluation is O(L).
        L = w.shape[0]
        f = np.zeros(out_len)
        if L == 0:
            return f
        js = np.arange(1.0, L + 1.0)
        sa = np.cumsum((w / (js + 1.0))[::-1])[::-1]
        sb = np.cumsum((w / (js * (js + 1.0)))[::-1])[::-1]
        m = min(out_len, L)
        f[:m] = 2.0 * (sa[:m] - np.arange(m) * sb[:m])
        return f

    @jit
    def dj_all(resid):
        # Directional derivative of the quadratic criterion along every
        # basis direction: d_j = sum_{l < j} t_j(l) * resid(l).  Uses the
        # cumulative sums of resid and l * resid, again O(L).
        L = resid.shape[0]
        js = np.arange(1.0, L + 1.0)
        c0 = np.cumsum(resid)
        c1 = np.cumsum(np.arange(L) * resid)
        return 2.0 / (js * (js + 1.0)) * (js * c0 - c1)

    @jit
    def gram(js):
        # Inner products of triangular sequences admit a closed form:
        # for j <= k, <t_j, t_k> = 2 (3k - j + 1) / (3 k (k + 1)).
        jf = js.astype(np.float64)
        a = jf.reshape(-1, 1)
        b = jf.reshape(1, -1)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        return 2.0 * (3.0 * hi - lo + 1.0) / (3.0 * hi * (hi + 1.0))

    @jit
    def rhs(js, cp0, cp1):
        # <t_j, target> from the cumulative sums of the target and of
        # l * target(l).
        jf = js.astype(np.float64)
        idx = js - 1
        return 2.0 / (jf * (jf + 1.0)) * (jf * cp0[idx] - cp1[idx])

    @jit
    def objective(f, pt):
        return 0.5 * np.dot(f, f) - np.dot(f, pt)

    @jit
    def solve_fixed(pt, d_tol, feas_tol, max_inner, warm_js, warm_w):
        # Support reduction at a fixed largest basis index L = len(pt).
        # Starts from the warm set if given, otherwise from the single
        # highest-order basis element with its one-dimensional least
        # squares weight.  Returns (w, status, trace, n_trace).
        L = pt.shape[0]
        cp0 = np.cumsum(pt)
        cp1 = np.cumsum(np.arange(L) * pt)
        w = np.zeros(L)
        active = np.zeros(L, dtype=np.bool_)
        if warm_js.shape[0] > 0:
            for t in range(warm_js.shape[0]):
                w[warm_js[t] - 1] = warm_w[t]
                active[warm_js[t] - 1] = True
        else:
            g_last = 2.0 * (2.0 * L + 1.0) / (3.0 * L * (L + 1.0))
            b_last = 2.0 / (L * (L + 1.0)) * (L * cp0[L - 1] - cp1[L - 1])
            w[L - 1] = b_last / g_last
            active[L - 1] = True

        trace = np.empty((max_inner + 1, 3))
        nt = 0
        status = 1
        for it in range(max_inner + 1):
            f = eval_mixture(w, L)
            d = dj_all(f - pt)
            trace[nt, 0] = float(it)
            trace[nt, 1] = float(np.sum(active))
            trace[nt, 2] = objective(f, pt)
            nt += 1
            if it == max_inner:
                break

            # Most negative derivative among inactive indices.  Active
            # ones are excluded: their derivatives are zero up to solve
            # precision and re-adding them could stall the loop.
            dsel = d.copy()
            dsel[active] = np.inf
            k = np.argmin(dsel)
            if dsel[k] >= -d_tol:
                status = 0
                break
            active[k] = True

            stepped = False
            for _cycle in range(L + 2):
                js = np.where(active)[0] + 1
                G = gram(js)
                b = rhs(js, cp0, cp1)
                x = np.linalg.solve(G, b)
                # one refinement pass keeps the mass identity tight even
                # when adjacent high-order columns make G ill-conditioned
                x = x + np.linalg.solve(G, b - np.dot(G, x))
                if not np.all(np.isfinite(x)):
                    status = 2
                    break
                if np.min(x) >= -feas_tol:
                    w[:] = 0.0
                    for t in range(js.shape[0]):
                        v = x[t]
                        if v < 0.0:
                            v = 0.0
                        w[js[t] - 1] = v
                        active[js[t] - 1] = v > 0.0
                    stepped = True
                    break
                # Move toward the unconstrained solution until the first
                # coefficient hits zero, then deactivate it and re-solve.
                eps = 1.0e300
                lpos = -1
                for t in range(js.shape[0]):
                    cur = w[js[t] - 1]
                    if x[t] < cur:
                        e = cur / (cur - x[t])
                        if e < eps:
                            eps = e
                            lpos = t
                if lpos < 0:
                    status = 2
                    break
                for t in range(js.shape[0]):
                    idx = js[t] - 1
                    nv = w[idx] + eps * (x[t] - w[idx])
                    if nv < 0.0:
                        nv = 0.0
                    w[idx] = nv
                w[js[lpos] - 1] = 0.0
                active[js[lpos] - 1] = False
            if not stepped:
                if status == 1:
                    status = 2
                break
        return w, status, trace, nt

    return KernelSet(
        backend=backend,
        eval_mixture=eval_mixture,
        dj_all=dj_all,
        gram=gram,
        rhs=rhs,
        objective=objective,
        solve_fixed=solve_fixed,
    )


ACTIVE = build_kernels(BACKEND)
