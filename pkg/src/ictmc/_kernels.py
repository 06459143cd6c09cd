"""Compiled inner loops for envelope application and Euler-product iteration.

The envelope acts through the difference form
``[Qf](x) = sum_{y != x} q(x, y) * (f(y) - f(x))``, which reads the implied
diagonal ``-sum_{y != x} q(x, y)`` off the off-diagonal entries.  With this
form a constant gamble maps to exactly 0.0 in floating point (every
difference is +-0.0), which the operator axioms and the error-additivity
arguments rely on.

Every step kernel performs, per state, exactly the two rounded operations
``g[x] + delta * d[x]``; the single-application kernels produce the same
``d``.  This keeps one Euler step, an n-step run, and a composition of
single steps bitwise consistent with each other.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "interval_apply",
    "interval_steps",
    "finite_apply",
    "finite_steps",
]


@njit(cache=True)
def interval_apply(low, up, f, out):
    """Lower envelope of an interval rate set: pick L on rising differences, U on falling."""
    n = f.shape[0]
    for x in range(n):
        fx = f[x]
        acc = 0.0
        for y in range(n):
            if y == x:
                continue
            d = f[y] - fx
            if d >= 0.0:
                acc = acc + low[x, y] * d
            else:
                acc = acc + up[x, y] * d
        out[x] = acc


@njit(cache=True)
def interval_steps(low, up, g, delta, nsteps):
    """Run nsteps of g <- g + delta * Q_lower(g) in place."""
    n = g.shape[0]
    d = np.empty(n, dtype=np.float64)
    for _ in range(nsteps):
        interval_apply(low, up, g, d)
        for x in range(n):
            g[x] = g[x] + delta * d[x]


@njit(cache=True)
def finite_apply(qs, f, out):
    """Lower envelope of a finite rate set: row-wise minimum over the members."""
    k = qs.shape[0]
    n = f.shape[0]
    for x in range(n):
        fx = f[x]
        best = np.inf
        for m in range(k):
            acc = 0.0
            for y in range(n):
                if y == x:
                    continue
                acc = acc + qs[m, x, y] * (f[y] - fx)
            if acc < best:
                best = acc
        out[x] = best


@njit(cache=True)
def finite_steps(qs, g, delta, nsteps):
    """Run nsteps of g <- g + delta * Q_lower(g) in place."""
    n = g.shape[0]
    d = np.empty(n, dtype=np.float64)
    for _ in range(nsteps):
        finite_apply(qs, g, d)
        for x in range(n):
            g[x] = g[x] + delta * d[x]
