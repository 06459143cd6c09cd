"""Precise-chain reference computations for cross-validating the operator layer.

Everything here evaluates ordinary (precise) continuous-time Markov chains:
matrix exponentials by uniformization, piecewise-constant chains built by
concatenating exponential segments, and two schemes that realise members of
a rate set as actual chains.  Because every such chain lives inside the
credal set, these values dominate the lower transition operator and bound
it from above; the test suite leans on that ordering.

Uniformization is used instead of scaling-and-squaring because all series
terms are non-negative for a rate matrix, so no cancellation occurs; the
series is truncated once the Poisson weights cover all but 1e-13 of their
mass.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from typing import Sequence

import numpy as np

from .core import (
    Gamble,
    IctmcError,
    RateMatrix,
    StateSpace,
    TransitionMatrix,
    _require_same_space,
)
from .envelope import LowerEnvelope

__all__ = [
    "CombinatorialBudgetError",
    "PiecewiseSystem",
    "matrix_exponential",
    "piecewise_expectation",
    "greedy_markov_scheme",
    "exhaustive_markov_min",
    "example8_closed_form",
    "whm_grid_search",
]

POISSON_TAIL = 1e-13
# Above this value of lambda*delta the series start underflows; halve the
# horizon and square instead (the semigroup identity is exact).
_UNIFORMIZATION_RHO_LIMIT = 200.0

SEQUENCE_BUDGET = 10**6


class CombinatorialBudgetError(IctmcError):
    """The exhaustive scheme would enumerate too many vertex sequences."""


def matrix_exponential(q: RateMatrix, delta: float) -> TransitionMatrix:
    """e^(Q*delta) by uniformization; the result is row-stochastic.

    Uses the shift lambda = max_x |Q(x,x)| + 1, so the uniformized jump
    matrix P = I + Q/lambda is a transition matrix even for Q = 0.
    """
    if not (math.isfinite(delta) and delta >= 0.0):
        raise ValueError("delta must be non-negative and finite")
    n = q.space.size
    if delta == 0.0 or not q.entries.any():
        return TransitionMatrix(q.space, np.eye(n))
    lam = float(np.max(np.abs(np.diag(q.entries)))) + 1.0
    rho = lam * delta
    if rho > _UNIFORMIZATION_RHO_LIMIT:
        half = matrix_exponential(q, delta / 2.0)
        return TransitionMatrix(q.space, half.entries @ half.entries)
    p = np.eye(n) + q.entries / lam
    weight = math.exp(-rho)
    covered = weight
    total = weight * np.eye(n)
    power = np.eye(n)
    k = 0
    while covered < 1.0 - POISSON_TAIL:
        k += 1
        power = power @ p
        weight *= rho / k
        total += weight * power
        covered += weight
    return TransitionMatrix(q.space, total)


class PiecewiseSystem:
    """A piecewise-constant chain: rate matrix Q_j active on [b_j, b_{j+1})."""

    __slots__ = ("space", "breakpoints", "matrices")

    def __init__(
        self,
        space: StateSpace,
        breakpoints: Sequence[float],
        matrices: Sequence[RateMatrix],
    ):
        breakpoints = tuple(float(b) for b in breakpoints)
        matrices = tuple(matrices)
        if not breakpoints or breakpoints[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if any(b <= a for a, b in zip(breakpoints, breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(matrices) != len(breakpoints):
            raise ValueError("one rate matrix per breakpoint is required")
        for q in matrices:
            if q.space != space:
                raise ValueError("piece matrix over a different state space")
        self.space = space
        self.breakpoints = breakpoints
        self.matrices = matrices

    def active_index(self, time: float) -> int:
        return bisect_right(self.breakpoints, time) - 1


def piecewise_expectation(system: PiecewiseSystem, t: float, s: float, f: Gamble) -> Gamble:
    """Apply the chain's transition matrix T_t^s to f.

    T_t^s is the ordered product of the exponential factors of the pieces
    overlapping [t, s]; the factor closest to s is applied to f first.
    """
    _require_same_space(system, f)
    if not 0.0 <= t <= s:
        raise ValueError("need 0 <= t <= s")
    if t == s:
        return f
    cuts = [t] + [b for b in system.breakpoints if t < b < s] + [s]
    g = f.values
    for a, b in reversed(list(zip(cuts, cuts[1:]))):
        q = system.matrices[system.active_index(a)]
        g = matrix_exponential(q, b - a).entries @ g
    return Gamble(f.space, g)


def greedy_markov_scheme(
    env: LowerEnvelope, t: float, s: float, n: int, f: Gamble
) -> Gamble:
    """A genuine Markov chain in the set, greedily tracking the lower operator.

    Over n uniform steps, applied from the latest backward: pick the rate
    matrix whose row-wise action achieves the envelope on the current
    iterate, then push the iterate through that matrix's exponential.  The
    result upper-bounds the lower transition operator value and tightens as
    n grows.
    """
    _require_same_space(env, f)
    if n < 1:
        raise ValueError("at least one step is required")
    if not 0.0 <= t <= s:
        raise ValueError("need 0 <= t <= s")
    delta = (s - t) / n
    g = f.values
    cache: dict[bytes, np.ndarray] = {}
    for _ in range(n):
        q = env.achieving_member(Gamble(env.space, g))
        key = q.entries.tobytes()
        factor = cache.get(key)
        if factor is None:
            factor = matrix_exponential(q, delta).entries
            cache[key] = factor
        g = factor @ g
    return Gamble(env.space, g)


def exhaustive_markov_min(
    matrices: Sequence[RateMatrix],
    t: float,
    s: float,
    n: int,
    f: Gamble,
    budget: int = SEQUENCE_BUDGET,
) -> Gamble:
    """Componentwise minimum over every piecewise-constant vertex sequence.

    Brute force over all |vertices|^n assignments of a vertex matrix to
    each of n uniform pieces of [t, s]; a desk-scale oracle, never a
    user-facing solver.
    """
    matrices = tuple(matrices)
    if not matrices:
        raise ValueError("at least one vertex matrix is required")
    space = matrices[0].space
    _require_same_space(matrices[0], f)
    if n < 1:
        raise ValueError("at least one step is required")
    if not 0.0 <= t <= s:
        raise ValueError("need 0 <= t <= s")
    k = len(matrices)
    if k**n > budget:
        raise CombinatorialBudgetError(
            f"{k}^{n} vertex sequences exceed the budget of {budget}"
        )
    delta = (s - t) / n
    factors = np.stack([matrix_exponential(q, delta).entries for q in matrices])
    batch = f.values[np.newaxis, :]
    for _ in range(n):
        batch = np.einsum("kxy,by->kbx", factors, batch).reshape(-1, space.size)
    return Gamble(space, batch.min(axis=0))


def example8_closed_form(lam: float, t: float) -> float:
    """Fixed-rate expectation curve of the ternary a->b->c benchmark chain.

    The chain leaves state a at rate lam in [0.01, 0.5], leaves b at rate
    0.01, absorbs in c, and the payoff is (1, 0, 2); the value is the
    expectation at time t started from a.  The lam = 0.01 branch is the
    analytic limit of the general expression.
    """
    if not 0.01 <= lam <= 0.5:
        raise ValueError("lam must lie in [0.01, 0.5]")
    if not (math.isfinite(t) and t >= 0.0):
        raise ValueError("t must be non-negative and finite")
    if lam == 0.01:
        decay = math.exp(-t / 100.0)
        return 2.0 - decay - 0.02 * t * decay
    return 2.0 + math.exp(-lam * t) + 2.0 * (
        math.exp(-lam * t) - 100.0 * lam * math.exp(-t / 100.0)
    ) / (100.0 * lam - 1.0)


def whm_grid_search(lambda_grid: Sequence[float], t: float) -> float:
    """Minimum of the fixed-rate curve over a grid of rate values."""
    grid = [float(x) for x in lambda_grid]
    if not grid:
        raise ValueError("the grid must be non-empty")
    return min(example8_closed_form(lam, t) for lam in grid)
