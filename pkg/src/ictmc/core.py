"""Shared vocabulary: state spaces, gambles, matrices, norms and validation.

All types are immutable after construction (backing arrays are marked
read-only) and all operations are pure, so values can be shared freely
across threads.  Validation tolerances are fixed module constants and are
applied only at construction boundaries; internal arithmetic never clamps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "IctmcError",
    "SpaceMismatchError",
    "InvalidMatrixError",
    "StateSpace",
    "Gamble",
    "MultiGamble",
    "SquareMatrix",
    "RateMatrix",
    "TransitionMatrix",
    "Violation",
    "ValidationReport",
    "max_norm",
    "variation_norm",
    "operator_norm",
    "apply_matrix",
    "validate_rate_matrix",
    "validate_transition_matrix",
    "restrict",
]

# Row sums of a rate matrix must vanish within this tolerance (times |X|).
RATE_ROW_SUM_TOL = 1e-12
# Off-diagonal rate entries may undershoot zero by at most this much; they
# are clamped to zero on construction.
RATE_OFF_DIAG_TOL = 1e-12
# Row sums of a transition matrix must equal one within this (times |X|).
TRANS_ROW_SUM_TOL = 1e-10
# Transition entries may leave [0, 1] by at most this much; clamped back.
TRANS_ENTRY_TOL = 1e-12


class IctmcError(Exception):
    """Base class for all errors raised by this package."""


class SpaceMismatchError(IctmcError):
    """Two values built over different state spaces were combined."""


class InvalidMatrixError(IctmcError):
    """A matrix failed its structural constraints at construction."""


def _require_same_space(a, b) -> None:
    if a.space != b.space:
        raise SpaceMismatchError(
            f"state spaces differ: {a.space.labels} vs {b.space.labels}"
        )


def _as_readonly(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("entries must be finite (no NaN or infinity)")
    arr.flags.writeable = False
    return arr


class StateSpace:
    """An ordered finite set of distinct, non-empty state labels."""

    __slots__ = ("labels", "_index")

    def __init__(self, labels: Iterable[str]):
        labels = tuple(str(x) for x in labels)
        if not labels:
            raise ValueError("state space must contain at least one state")
        if any(not lab for lab in labels):
            raise ValueError("state labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise ValueError("state labels must be pairwise distinct")
        self.labels = labels
        self._index = {lab: i for i, lab in enumerate(labels)}

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, state: Union[str, int]) -> int:
        """Map a label (or an already-valid index) to its index."""
        if isinstance(state, str):
            try:
                return self._index[state]
            except KeyError:
                raise ValueError(f"unknown state label {state!r}") from None
        i = int(state)
        if not 0 <= i < self.size:
            raise ValueError(f"state index {i} out of range for size {self.size}")
        return i

    def __eq__(self, other) -> bool:
        return isinstance(other, StateSpace) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"StateSpace({list(self.labels)!r})"


class Gamble:
    """A real-valued function on the state space, stored as a vector."""

    __slots__ = ("space", "values")

    def __init__(self, space: StateSpace, values):
        self.space = space
        self.values = _as_readonly(values, (space.size,))

    @classmethod
    def constant(cls, space: StateSpace, value: float) -> "Gamble":
        return cls(space, np.full(space.size, float(value)))

    @classmethod
    def indicator(cls, space: StateSpace, state: Union[str, int]) -> "Gamble":
        v = np.zeros(space.size)
        v[space.index(state)] = 1.0
        return cls(space, v)

    def __call__(self, state: Union[str, int]) -> float:
        return float(self.values[self.space.index(state)])

    def __repr__(self) -> str:
        return f"Gamble({self.values.tolist()!r})"


class MultiGamble:
    """A real-valued function on tuples of states at ordered time points.

    The table is dense and row-major over state indices, with the first
    time point outermost: the entry for states (x_0, ..., x_k) lives at the
    mixed-radix index ``sum(x_j * size**(k - j))``.
    """

    __slots__ = ("space", "times", "table")

    def __init__(self, space: StateSpace, times: Sequence[float], table):
        times = tuple(float(t) for t in times)
        if not times:
            raise ValueError("times must be non-empty")
        if any(t < 0 for t in times):
            raise ValueError("times must be non-negative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        self.space = space
        self.times = times
        self.table = _as_readonly(table, (space.size,) * len(times))

    @classmethod
    def from_gamble(cls, f: Gamble, time: float) -> "MultiGamble":
        return cls(f.space, (time,), f.values)

    def as_gamble(self) -> Gamble:
        if len(self.times) != 1:
            raise ValueError("only a single-time-point table is a gamble")
        return Gamble(self.space, self.table)

    def value(self, assignment: Sequence[Union[str, int]]) -> float:
        idx = tuple(self.space.index(s) for s in assignment)
        if len(idx) != len(self.times):
            raise ValueError("assignment length must match the time points")
        return float(self.table[idx])

    def __repr__(self) -> str:
        return f"MultiGamble(times={self.times!r}, table={self.table.tolist()!r})"


class SquareMatrix:
    """A real |X| x |X| matrix over a state space; row x is A(x, .)."""

    __slots__ = ("space", "entries")

    def __init__(self, space: StateSpace, entries):
        self.space = space
        self.entries = _as_readonly(entries, (space.size, space.size))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.entries.tolist()!r})"


@dataclass(frozen=True)
class Violation:
    """One violated constraint: which rule, where, and by how much."""

    constraint: str
    row: int
    col: Union[int, None]
    residual: float

    def describe(self, labels: Sequence[str]) -> str:
        where = f"row {labels[self.row]!r}"
        if self.col is not None:
            where += f", entry ({labels[self.row]!r}, {labels[self.col]!r})"
        return f"{self.constraint} violated at {where}: residual {self.residual:.3e}"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a structural matrix check; ``matrix`` is set iff ``ok``."""

    ok: bool
    violations: tuple[Violation, ...] = ()
    matrix: Union["RateMatrix", "TransitionMatrix", None] = field(default=None)

    def describe(self, labels: Sequence[str]) -> str:
        if self.ok:
            return "all constraints satisfied"
        return "; ".join(v.describe(labels) for v in self.violations)


class RateMatrix(SquareMatrix):
    """A square matrix with zero row sums and non-negative off-diagonals.

    Construction enforces the constraints within the documented tolerances
    and clamps tiny negative off-diagonal entries to zero.
    """

    def __init__(self, space: StateSpace, entries):
        arr = np.array(entries, dtype=np.float64).reshape((space.size, space.size))
        report = _check_rate(space, arr)
        if not report.ok:
            raise InvalidMatrixError(report.describe(space.labels))
        off = ~np.eye(space.size, dtype=bool)
        arr[off & (arr < 0.0)] = 0.0
        super().__init__(space, arr)


class TransitionMatrix(SquareMatrix):
    """A row-stochastic square matrix; rows are probability mass functions."""

    def __init__(self, space: StateSpace, entries):
        arr = np.array(entries, dtype=np.float64).reshape((space.size, space.size))
        report = _check_transition(space, arr)
        if not report.ok:
            raise InvalidMatrixError(report.describe(space.labels))
        np.clip(arr, 0.0, 1.0, out=arr)
        super().__init__(space, arr)


def _check_rate(space: StateSpace, arr: np.ndarray) -> ValidationReport:
    n = space.size
    violations = []
    if not np.all(np.isfinite(arr)):
        violations.append(Violation("finite", 0, None, float("nan")))
        return ValidationReport(False, tuple(violations))
    row_tol = RATE_ROW_SUM_TOL * n
    sums = arr.sum(axis=1)
    for x in np.flatnonzero(np.abs(sums) > row_tol):
        violations.append(Violation("R1 (zero row sum)", int(x), None, float(sums[x])))
    for x in range(n):
        for y in range(n):
            if x != y and arr[x, y] < -RATE_OFF_DIAG_TOL:
                violations.append(
                    Violation("R2 (non-negative off-diagonal)", x, y, float(arr[x, y]))
                )
    return ValidationReport(not violations, tuple(violations))


def _check_transition(space: StateSpace, arr: np.ndarray) -> ValidationReport:
    n = space.size
    violations = []
    if not np.all(np.isfinite(arr)):
        violations.append(Violation("finite", 0, None, float("nan")))
        return ValidationReport(False, tuple(violations))
    row_tol = TRANS_ROW_SUM_TOL * n
    sums = arr.sum(axis=1)
    for x in np.flatnonzero(np.abs(sums - 1.0) > row_tol):
        violations.append(Violation("T1 (unit row sum)", int(x), None, float(sums[x] - 1.0)))
    for x in range(n):
        for y in range(n):
            e = arr[x, y]
            if e < -TRANS_ENTRY_TOL or e > 1.0 + TRANS_ENTRY_TOL:
                violations.append(Violation("T2 (entry in [0, 1])", x, y, float(e)))
    return ValidationReport(not violations, tuple(violations))


def validate_rate_matrix(a: SquareMatrix) -> ValidationReport:
    """Check R1/R2 on a square matrix; on success the report carries a RateMatrix."""
    report = _check_rate(a.space, np.array(a.entries))
    if report.ok:
        return ValidationReport(True, (), RateMatrix(a.space, a.entries))
    return report


def validate_transition_matrix(a: SquareMatrix) -> ValidationReport:
    """Check T1/T2 on a square matrix; on success the report carries a TransitionMatrix."""
    report = _check_transition(a.space, np.array(a.entries))
    if report.ok:
        return ValidationReport(True, (), TransitionMatrix(a.space, a.entries))
    return report


def max_norm(f: Gamble) -> float:
    """The supremum norm: max over states of |f(x)|."""
    return float(np.max(np.abs(f.values)))


def variation_norm(f: Gamble) -> float:
    """The variation seminorm: max f - min f."""
    return float(np.max(f.values) - np.min(f.values))


def operator_norm(a: SquareMatrix) -> float:
    """The induced sup-norm of a matrix: its maximum absolute row sum."""
    return float(np.max(np.abs(a.entries).sum(axis=1)))


def apply_matrix(a: SquareMatrix, f: Gamble) -> Gamble:
    """(Af)(x) = sum_y A(x, y) f(y)."""
    _require_same_space(a, f)
    return Gamble(f.space, a.entries @ f.values)


def restrict(
    f: MultiGamble, assignment: Mapping[float, Union[str, int]]
) -> Union[MultiGamble, Gamble]:
    """Fix the states at a subset of f's time points.

    Returns the table over the remaining time points; when exactly one time
    point remains the result collapses to a Gamble.
    """
    fixed = {}
    for t, state in assignment.items():
        t = float(t)
        if t not in f.times:
            raise ValueError(f"time point {t} is not among {f.times}")
        fixed[t] = f.space.index(state)
    remaining = [t for t in f.times if t not in fixed]
    if not remaining:
        raise ValueError("assignment must leave at least one free time point")
    indexer = tuple(
        fixed[t] if t in fixed else slice(None) for t in f.times
    )
    sub = f.table[indexer]
    if len(remaining) == 1:
        return Gamble(f.space, sub)
    return MultiGamble(f.space, remaining, sub)
