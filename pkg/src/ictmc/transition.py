"""The lower transition operator: guaranteed-error Euler-product iteration.

``compute_L`` approximates the action of the operator obtained as the limit
of products ``(I + delta_i * Q_lower)`` over ever finer partitions of
``[t, s]``.  The uniform step count is chosen so that the returned gamble is
within the requested ``epsilon`` of the exact operator value in the max
norm; the returned bound is that requested epsilon, not an a-posteriori
estimate.

Floating-point rounding is not included in the bound.  The iteration is
numerically benign (every step is a convex-combination update after the
variation part is split off), and accumulated rounding stays many orders of
magnitude below any epsilon this package will accept within its step cap.

Only uniform grids are used by ``compute_L``; ``phi_u`` evaluates the
auxiliary operator for an arbitrary partition, which the mesh-difference
bound tests rely on.  Iterates depend on ``t`` and ``s`` only through
``s - t``, so runs over translated intervals are bitwise identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import _kernels
from .core import Gamble, IctmcError, variation_norm, _require_same_space
from .envelope import LowerEnvelope

__all__ = [
    "DEFAULT_STEP_CAP",
    "StepBudgetError",
    "StepSizeError",
    "OperatorQuery",
    "PartitionSpec",
    "LResult",
    "step_count",
    "euler_step",
    "compute_L",
    "phi_u",
]

DEFAULT_STEP_CAP = 10**9


class StepBudgetError(IctmcError):
    """The guaranteed-accuracy iteration would need more steps than allowed."""

    def __init__(self, required: int, cap: int):
        self.required = required
        self.cap = cap
        super().__init__(
            f"guaranteed accuracy needs {required} steps, above the cap of {cap}"
        )


class StepSizeError(IctmcError):
    """A step (or partition mesh) is too large for the operator norm bound."""


@dataclass(frozen=True)
class OperatorQuery:
    """A request to evaluate the lower transition operator from t to s."""

    env: LowerEnvelope
    t: float
    s: float
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.s)):
            raise ValueError("time points must be finite")
        if not 0.0 <= self.t <= self.s:
            raise ValueError("need 0 <= t <= s")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValueError("epsilon must be a positive finite number")


class PartitionSpec:
    """A strictly increasing grid t = t_0 < ... < t_n = s with its mesh."""

    __slots__ = ("grid", "deltas", "mesh")

    def __init__(self, grid: Sequence[float]):
        grid = tuple(float(g) for g in grid)
        if not grid:
            raise ValueError("a partition needs at least one grid point")
        if any(not math.isfinite(g) or g < 0 for g in grid):
            raise ValueError("grid points must be finite and non-negative")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid points must be strictly increasing")
        self.grid = grid
        self.deltas = tuple(b - a for a, b in zip(grid, grid[1:]))
        self.mesh = max(self.deltas, default=0.0)

    @classmethod
    def uniform(cls, t: float, s: float, n: int) -> "PartitionSpec":
        if n < 1:
            raise ValueError("a uniform partition needs at least one interval")
        c = s - t
        return cls([t + c * (i / n) for i in range(n)] + [s])


class LResult(NamedTuple):
    gamble: Gamble
    bound: float
    steps: int


def step_count(
    t: float,
    s: float,
    norm: float,
    fvar: float,
    epsilon: float,
    step_cap: Union[int, None] = None,
) -> int:
    """Number of uniform Euler steps guaranteeing an epsilon-accurate result.

    Returns ``ceil(max((s-t)*norm, (s-t)^2 * norm^2 * fvar / (2*epsilon)))``
    and short-circuits to 0 when the interval is empty, the operator norm
    bound is zero, or the gamble is constant (``fvar == 0``; the operator
    then fixes the gamble, so no iteration is needed).
    """
    if not (math.isfinite(t) and math.isfinite(s) and 0.0 <= t <= s):
        raise ValueError("need finite 0 <= t <= s")
    if norm < 0.0 or fvar < 0.0:
        raise ValueError("norm and fvar must be non-negative")
    if not (math.isfinite(epsilon) and epsilon > 0.0):
        raise ValueError("epsilon must be a positive finite number")
    cap = DEFAULT_STEP_CAP if step_cap is None else int(step_cap)
    c = s - t
    if c == 0.0 or norm == 0.0 or fvar == 0.0:
        return 0
    n = math.ceil(max(c * norm, c * c * norm * norm * fvar / (2.0 * epsilon)))
    if n > cap:
        raise StepBudgetError(n, cap)
    return n


def _split_variation(values: np.ndarray) -> tuple[np.ndarray, float]:
    # Iterating on f - min(f) keeps the iterate in [0, max f - min f] and
    # makes constant shifts commute with the whole run whenever the shifted
    # inputs are exactly representable.
    base = float(np.min(values))
    h = np.array(values - base, dtype=np.float64)
    return h, base


def _run_steps(env: LowerEnvelope, h: np.ndarray, delta: float, nsteps: int) -> None:
    if env.spec.kind == "interval":
        _kernels.interval_steps(env.spec.lower, env.spec.upper, h, delta, nsteps)
    else:
        _kernels.finite_steps(env._qs, h, delta, nsteps)


def _single_member_step_matrix(env: LowerEnvelope, delta: float) -> np.ndarray:
    # For a one-member set the envelope is linear, so (I + delta*Q) is an
    # ordinary matrix; its diagonal is implied by the off-diagonal rates,
    # matching the difference form used by the kernels.
    q = env._qs[0]
    n = q.shape[0]
    m = np.zeros((n, n))
    for x in range(n):
        off = 0.0
        for y in range(n):
            if y != x:
                m[x, y] = delta * q[x, y]
                off += q[x, y]
        m[x, x] = 1.0 - delta * off
    return m


def _matrix_power(m: np.ndarray, n: int) -> np.ndarray:
    result = np.eye(m.shape[0])
    base = m
    while n > 0:
        if n & 1:
            result = result @ base
        base = base @ base
        n >>= 1
    return result


def euler_step(env: LowerEnvelope, f: Gamble, delta: float) -> Gamble:
    """One factor (I + delta * Q_lower) applied to f."""
    _require_same_space(env, f)
    if delta < 0.0 or not math.isfinite(delta):
        raise ValueError("delta must be non-negative and finite")
    if delta * env.norm_bound > 1.0:
        raise StepSizeError(
            f"delta * norm_bound = {delta * env.norm_bound} exceeds 1"
        )
    if delta == 0.0:
        return f
    h, base = _split_variation(f.values)
    _run_steps(env, h, delta, 1)
    return Gamble(f.space, h + base)


def compute_L(
    env: LowerEnvelope,
    t: float,
    s: float,
    f: Gamble,
    epsilon: float,
    step_cap: Union[int, None] = None,
) -> LResult:
    """Approximate the lower transition operator applied to f over [t, s].

    Runs the uniform Euler product with the guaranteed step count; the
    result is within ``epsilon`` of the exact operator value componentwise.
    A one-member rate set makes the envelope linear, in which case the same
    operator product is evaluated as a matrix power instead of step by step;
    the evaluation order differs only at machine precision.
    """
    OperatorQuery(env, t, s, epsilon)
    _require_same_space(env, f)
    fvar = variation_norm(f)
    n = step_count(t, s, env.norm_bound, fvar, epsilon, step_cap)
    if n == 0:
        return LResult(f, 0.0, 0)
    c = s - t
    delta = c / n
    h, base = _split_variation(f.values)
    if env.spec.kind == "finite" and len(env.spec.matrices) == 1:
        total = _matrix_power(_single_member_step_matrix(env, delta), n)
        h = total @ h
    else:
        _run_steps(env, h, delta, n)
    return LResult(Gamble(f.space, h + base), float(epsilon), n)


def phi_u(env: LowerEnvelope, partition: PartitionSpec, f: Gamble) -> Gamble:
    """The auxiliary operator over an explicit partition, latest factor first."""
    _require_same_space(env, f)
    if partition.mesh * env.norm_bound > 1.0:
        raise StepSizeError(
            f"mesh * norm_bound = {partition.mesh * env.norm_bound} exceeds 1"
        )
    if not partition.deltas:
        return f
    h, base = _split_variation(f.values)
    for delta in reversed(partition.deltas):
        _run_steps(env, h, delta, 1)
    return Gamble(f.space, h + base)
