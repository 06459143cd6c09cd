"""Lower and upper expectations and probabilities over finitely many time points.

Conditional queries resolve the target backward over its future time
points, one guaranteed-accuracy operator application per state history, so
a query with total budget ``epsilon`` spends ``epsilon / k`` on each of its
``k`` stages; the stage errors add because the operator is monotone and
commutes with constant shifts.  Unconditional queries finish with the lower
expectation over the set of initial distributions, which is exact.

The per-history values of a conditional query depend on the history only
through its latest state.  That Markov-like property is guaranteed for the
rate-set kinds this package supports (interval sets, and finite sets used
with the row-wise envelope); whether it survives without separately
specified rows is an open question and nothing here relies on it.

Multi-future-time queries need a convex rate set.  Interval sets are convex
by construction; a finite vertex list is interpreted through the same
row-wise envelope either way, and callers are warned rather than stopped.
Lower expectations taken over only the Markov chains compatible with the
model are a strictly different (larger) quantity for such queries; no
general algorithm is known for them and they are out of scope.

The per-history computations inside a stage are independent of each other
and of other queries; the backward recursion over the future time points is
inherently sequential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

from .core import (
    Gamble,
    MultiGamble,
    SpaceMismatchError,
    StateSpace,
)
from .envelope import LowerEnvelope
from .transition import compute_L

__all__ = [
    "PMF_SUM_TOL",
    "InitialSetSpec",
    "ConditionalQuery",
    "UnconditionalQuery",
    "TableOutcome",
    "ScalarOutcome",
    "lower_exp_initial",
    "conditional_single_future",
    "conditional_multi_future",
    "unconditional",
    "lower_expectation",
    "upper_expectation",
    "lower_probability",
    "upper_probability",
]

PMF_SUM_TOL = 1e-10


class InitialSetSpec:
    """A set of initial probability mass functions: vacuous, one, or finitely many."""

    __slots__ = ("space", "kind", "pmfs")

    def __init__(self):
        raise TypeError("use InitialSetSpec.vacuous/.singleton/.finite")

    @classmethod
    def _build(cls, space: StateSpace, kind: str, pmfs) -> "InitialSetSpec":
        self = object.__new__(cls)
        self.space = space
        self.kind = kind
        self.pmfs = pmfs
        return self

    @classmethod
    def vacuous(cls, space: StateSpace) -> "InitialSetSpec":
        return cls._build(space, "vacuous", None)

    @classmethod
    def singleton(cls, space: StateSpace, pmf) -> "InitialSetSpec":
        return cls._build(space, "singleton", _check_pmfs(space, [pmf]))

    @classmethod
    def finite(cls, space: StateSpace, pmfs) -> "InitialSetSpec":
        pmfs = list(pmfs)
        if not pmfs:
            raise ValueError("a finite initial set needs at least one pmf")
        return cls._build(space, "finite", _check_pmfs(space, pmfs))


def _check_pmfs(space: StateSpace, pmfs) -> np.ndarray:
    arr = np.array(pmfs, dtype=np.float64).reshape((len(pmfs), space.size))
    if not np.all(np.isfinite(arr)):
        raise ValueError("pmf entries must be finite")
    if np.any(arr < 0.0):
        raise ValueError("pmf entries must be non-negative")
    sums = arr.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > PMF_SUM_TOL)
    if bad.size:
        raise ValueError(f"pmf {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
    arr.flags.writeable = False
    return arr


def lower_exp_initial(initial: InitialSetSpec, f: Gamble) -> float:
    """Lower expectation of f over the initial-distribution set.

    Vacuous sets give min f; a finite vertex list gives the minimum of the
    dot products, which equals the minimum over its convex hull.
    """
    if initial.space != f.space:
        raise SpaceMismatchError("initial set and gamble use different spaces")
    if initial.kind == "vacuous":
        return float(np.min(f.values))
    return float(np.min(initial.pmfs @ f.values))


def _check_times(times: Sequence[float], what: str) -> tuple[float, ...]:
    times = tuple(float(t) for t in times)
    if any(not math.isfinite(t) or t < 0 for t in times):
        raise ValueError(f"{what} must be finite and non-negative")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"{what} must be strictly increasing")
    return times


@dataclass(frozen=True)
class ConditionalQuery:
    """Lower expectation of ``target`` conditional on the states at ``condition_times``.

    The target is defined over the union of the condition times and the
    future times, with the condition times forming a strict prefix.  The
    optional state assignment selects one history; the computed table
    always covers all of them.
    """

    env: LowerEnvelope
    condition_times: tuple[float, ...]
    target: MultiGamble
    epsilon: float
    condition_states: Union[tuple[int, ...], None] = field(default=None)

    def __post_init__(self):
        u = _check_times(self.condition_times, "condition times")
        object.__setattr__(self, "condition_times", u)
        if self.target.space != self.env.space:
            raise SpaceMismatchError("target and rate set use different spaces")
        if self.target.times[: len(u)] != u:
            raise ValueError("condition times must be a prefix of the target times")
        if len(self.target.times) == len(u):
            raise ValueError("at least one target time must lie after the condition")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if self.condition_states is not None:
            states = tuple(self.env.space.index(x) for x in self.condition_states)
            if len(states) != len(u):
                raise ValueError("one conditioning state per condition time is required")
            object.__setattr__(self, "condition_states", states)

    @property
    def future_times(self) -> tuple[float, ...]:
        return self.target.times[len(self.condition_times):]


@dataclass(frozen=True)
class UnconditionalQuery:
    """Lower expectation of ``target`` under a set of initial distributions."""

    env: LowerEnvelope
    initial: InitialSetSpec
    target: MultiGamble
    epsilon: float

    def __post_init__(self):
        if self.target.space != self.env.space:
            raise SpaceMismatchError("target and rate set use different spaces")
        if self.initial.space != self.env.space:
            raise SpaceMismatchError("initial set and rate set use different spaces")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be positive")


class TableOutcome(NamedTuple):
    values: MultiGamble
    bound: float
    steps: int


class ScalarOutcome(NamedTuple):
    value: float
    bound: float
    steps: int


def _resolve_latest(
    env: LowerEnvelope,
    table: np.ndarray,
    prev_time: float,
    last_time: float,
    epsilon: float,
    step_cap,
) -> tuple[np.ndarray, int]:
    # One backward stage: for every assignment of the leading time points,
    # push the restriction through the operator and read it off at the
    # state occupied at the previous time point.
    space = env.space
    lead_shape = table.shape[:-1]
    out = np.empty(lead_shape)
    steps = 0
    for idx in np.ndindex(lead_shape):
        restriction = Gamble(space, table[idx])
        res = compute_L(env, prev_time, last_time, restriction, epsilon, step_cap)
        out[idx] = res.gamble.values[idx[-1]]
        steps += res.steps
    return out, steps


def conditional_single_future(
    env: LowerEnvelope,
    condition_times: Sequence[float],
    s: float,
    target: MultiGamble,
    epsilon: float,
    step_cap=None,
) -> TableOutcome:
    """Per-history operator value for a target with a single future time point."""
    u = _check_times(condition_times, "condition times")
    if not u:
        raise ValueError("at least one condition time is required")
    if target.times != u + (float(s),):
        raise ValueError("target times must be the condition times followed by s")
    table, steps = _resolve_latest(env, target.table, u[-1], float(s), epsilon, step_cap)
    return TableOutcome(MultiGamble(env.space, u, table), float(epsilon), steps)


def conditional_multi_future(query: ConditionalQuery, step_cap=None) -> TableOutcome:
    """Backward composition of operator applications over the future time points.

    With ``k`` operator stages, each stage runs at budget ``epsilon / k``
    and the total guaranteed bound is ``epsilon``.  With an empty condition
    the result is the gamble over the first future time point (the form the
    unconditional computation consumes).
    """
    u = query.condition_times
    times = list(query.target.times)
    stages = len(times) - len(u) if u else len(times) - 1
    if stages == 0:
        return TableOutcome(query.target, 0.0, 0)
    per_stage = query.epsilon / stages
    table = query.target.table
    steps = 0
    for _ in range(stages):
        last = times.pop()
        table, st = _resolve_latest(query.env, table, times[-1], last, per_stage, step_cap)
        steps += st
    return TableOutcome(
        MultiGamble(query.env.space, tuple(times), table), float(query.epsilon), steps
    )


def _extended_to_zero(target: MultiGamble) -> MultiGamble:
    if target.times[0] == 0.0:
        return target
    size = target.space.size
    tiled = np.broadcast_to(target.table, (size,) + target.table.shape)
    return MultiGamble(target.space, (0.0,) + target.times, np.array(tiled))


def unconditional(query: UnconditionalQuery, step_cap=None) -> ScalarOutcome:
    """Unconditional lower expectation: backward composition, then the initial set.

    A target that does not mention time 0 is first extended trivially to
    it; the initial-set minimisation itself adds no error.
    """
    target = _extended_to_zero(query.target)
    inner = ConditionalQuery(query.env, (), target, query.epsilon)
    outcome = conditional_multi_future(inner, step_cap)
    value = lower_exp_initial(query.initial, outcome.values.as_gamble())
    return ScalarOutcome(value, outcome.bound, outcome.steps)


Query = Union[ConditionalQuery, UnconditionalQuery]


def _negated(query: Query) -> Query:
    target = MultiGamble(query.target.space, query.target.times, -query.target.table)
    if isinstance(query, ConditionalQuery):
        return ConditionalQuery(
            query.env, query.condition_times, target, query.epsilon, query.condition_states
        )
    return UnconditionalQuery(query.env, query.initial, target, query.epsilon)


def lower_expectation(query: Query, step_cap=None) -> Union[TableOutcome, ScalarOutcome]:
    if isinstance(query, ConditionalQuery):
        return conditional_multi_future(query, step_cap)
    return unconditional(query, step_cap)


def upper_expectation(query: Query, step_cap=None) -> Union[TableOutcome, ScalarOutcome]:
    """Conjugate of the lower expectation: negate, run the lower query, negate."""
    outcome = lower_expectation(_negated(query), step_cap)
    if isinstance(outcome, TableOutcome):
        flipped = MultiGamble(
            outcome.values.space, outcome.values.times, -outcome.values.table
        )
        return TableOutcome(flipped, outcome.bound, outcome.steps)
    return ScalarOutcome(-outcome.value, outcome.bound, outcome.steps)


def _require_indicator(target: MultiGamble) -> None:
    v = target.table
    if not np.all((v == 0.0) | (v == 1.0)):
        raise ValueError("a probability query needs a {0,1}-valued target")


def lower_probability(query: Query, step_cap=None) -> Union[TableOutcome, ScalarOutcome]:
    _require_indicator(query.target)
    return lower_expectation(query, step_cap)


def upper_probability(query: Query, step_cap=None) -> Union[TableOutcome, ScalarOutcome]:
    _require_indicator(query.target)
    return upper_expectation(query, step_cap)
