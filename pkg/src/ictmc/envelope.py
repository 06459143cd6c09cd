"""Rate-set specifications and the evaluatable lower transition rate operator.

A :class:`RateSetSpec` describes a non-empty bounded set of rate matrices,
either as entrywise interval bounds on the off-diagonal rates (one row
polytope per state, so the set has separately specified rows) or as a
finite list of member matrices.  A :class:`LowerEnvelope` evaluates the
pointwise infimum of ``Qf`` over that set, its conjugate upper envelope and
a safe upper bound on its operator norm.

General linear-constraint row polytopes are out of scope; they would need a
linear-programming evaluator per application.

Specifications and envelopes are immutable after construction and all
operations are pure, so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .core import (
    Gamble,
    RateMatrix,
    SpaceMismatchError,
    StateSpace,
    _require_same_space,
)

__all__ = [
    "RateSetSpec",
    "LowerEnvelope",
    "AxiomCheck",
    "AxiomReport",
    "DominanceViolation",
    "DominanceReport",
    "check_lower_rate_axioms",
    "dominance_falsifier",
]

# Componentwise slack for super-additivity, homogeneity and dominance checks.
AXIOM_TOL = 1e-9


class RateSetSpec:
    """Declarative description of a bounded, non-empty set of rate matrices."""

    __slots__ = ("space", "kind", "lower", "upper", "matrices", "rows_separately_specified")

    def __init__(self):
        raise TypeError("use RateSetSpec.interval(...) or RateSetSpec.finite(...)")

    @classmethod
    def _blank(cls) -> "RateSetSpec":
        return object.__new__(cls)

    @classmethod
    def interval(cls, space: StateSpace, lower, upper) -> "RateSetSpec":
        """Entrywise bounds 0 <= L(x,y) <= U(x,y) on the off-diagonal rates.

        Diagonal entries of the bound matrices are ignored; each member's
        diagonal is forced by its zero row sum.  The described set always
        has separately specified rows.
        """
        n = space.size
        low = np.array(lower, dtype=np.float64).reshape((n, n))
        up = np.array(upper, dtype=np.float64).reshape((n, n))
        if not (np.all(np.isfinite(low)) and np.all(np.isfinite(up))):
            raise ValueError("interval bounds must be finite")
        np.fill_diagonal(low, 0.0)
        np.fill_diagonal(up, 0.0)
        off = ~np.eye(n, dtype=bool)
        if np.any(low[off] < 0.0):
            raise ValueError("lower off-diagonal bounds must be non-negative")
        if np.any(low[off] > up[off]):
            x, y = next(zip(*np.nonzero(off & (low > up))))
            raise ValueError(
                f"lower bound exceeds upper bound at ({space.labels[x]!r}, {space.labels[y]!r})"
            )
        self = cls._blank()
        self.space = space
        self.kind = "interval"
        low.flags.writeable = False
        up.flags.writeable = False
        self.lower = low
        self.upper = up
        self.matrices = None
        self.rows_separately_specified = True
        return self

    @classmethod
    def finite(
        cls,
        space: StateSpace,
        matrices: Sequence[RateMatrix],
        rows_separately_specified: bool = False,
    ) -> "RateSetSpec":
        """A finite vertex list of rate matrices.

        ``rows_separately_specified`` is advisory metadata: the envelope is
        the row-wise infimum either way.  It only signals whether the
        tightness guarantees that need that property may be relied on.
        """
        matrices = tuple(matrices)
        if not matrices:
            raise ValueError("a finite rate set needs at least one member")
        for q in matrices:
            if not isinstance(q, RateMatrix):
                raise TypeError("finite members must be RateMatrix values")
            if q.space != space:
                raise SpaceMismatchError("member matrix over a different state space")
        self = cls._blank()
        self.space = space
        self.kind = "finite"
        self.lower = None
        self.upper = None
        self.matrices = matrices
        self.rows_separately_specified = bool(rows_separately_specified)
        return self


class LowerEnvelope:
    """The lower transition rate operator of a rate-set specification.

    For a finite set, ``[Qf](x)`` is minimised member by member; for an
    interval set the minimiser has the closed form that picks the lower
    bound on rising differences (``f(y) >= f(x)``) and the upper bound on
    falling ones.  Ties contribute zero either way; the lower bound is used.
    """

    __slots__ = ("spec", "space", "_norm_bound", "_qs")

    def __init__(self, spec: RateSetSpec):
        self.spec = spec
        self.space = spec.space
        if spec.kind == "finite":
            qs = np.stack([q.entries for q in spec.matrices]).astype(np.float64)
            qs.flags.writeable = False
            self._qs = qs
        else:
            self._qs = None
        bound = 0.0
        for x in range(self.space.size):
            g = self.lower_apply(Gamble.indicator(self.space, x))
            bound = max(bound, abs(float(g.values[x])))
        self._norm_bound = 2.0 * bound

    @property
    def norm_bound(self) -> float:
        """Safe upper bound on the operator norm: 2 max_x |[Q 1_x](x)|."""
        return self._norm_bound

    def lower_apply(self, f: Gamble) -> Gamble:
        """Pointwise infimum of Qf over the rate set."""
        _require_same_space(self, f)
        out = np.empty(self.space.size, dtype=np.float64)
        if self.spec.kind == "interval":
            _kernels.interval_apply(self.spec.lower, self.spec.upper, f.values, out)
        else:
            _kernels.finite_apply(self._qs, f.values, out)
        return Gamble(self.space, out)

    def upper_apply(self, f: Gamble) -> Gamble:
        """Conjugate upper envelope: -Q_lower(-f), computed by sign flips."""
        _require_same_space(self, f)
        return Gamble(self.space, -self.lower_apply(Gamble(self.space, -f.values)).values)

    def achieving_member(self, f: Gamble) -> RateMatrix:
        """A rate matrix in the set assembled from the per-row minimisers of Qf."""
        _require_same_space(self, f)
        n = self.space.size
        if self.spec.kind == "interval":
            q = np.zeros((n, n))
            fv = f.values
            for x in range(n):
                for y in range(n):
                    if y == x:
                        continue
                    if fv[y] - fv[x] >= 0.0:
                        q[x, y] = self.spec.lower[x, y]
                    else:
                        q[x, y] = self.spec.upper[x, y]
                q[x, x] = -q[x].sum()
            return RateMatrix(self.space, q)
        rows = np.empty((n, n))
        fv = f.values
        for x in range(n):
            best = np.inf
            pick = 0
            for m in range(self._qs.shape[0]):
                acc = 0.0
                for y in range(n):
                    if y != x:
                        acc = acc + self._qs[m, x, y] * (fv[y] - fv[x])
                if acc < best:
                    best = acc
                    pick = m
            rows[x] = self._qs[pick, x]
        return RateMatrix(self.space, rows)

    def __repr__(self) -> str:
        return f"LowerEnvelope(kind={self.spec.kind!r}, norm_bound={self._norm_bound!r})"


@dataclass(frozen=True)
class AxiomCheck:
    name: str
    passed: bool
    worst_residual: float


@dataclass(frozen=True)
class AxiomReport:
    ok: bool
    checks: tuple[AxiomCheck, ...]

    def __getitem__(self, name: str) -> AxiomCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_lower_rate_axioms(
    env: LowerEnvelope,
    probes: Sequence[tuple[Gamble, Gamble, float]],
    tol: float = AXIOM_TOL,
) -> AxiomReport:
    """Verify the lower-rate-operator axioms on a finite probe set.

    Each probe is a triple (f, g, lam) with lam >= 0.  Constants-to-zero is
    checked on a canonical set of constants plus the probe means,
    non-negativity of off-diagonal indicator images on all state pairs,
    super-additivity on (f, g) and non-negative homogeneity on (f, lam).
    Passing is evidence, not proof: only the probes were examined.
    """
    if not probes:
        raise ValueError("at least one probe is required")
    space = env.space

    worst_lr1 = 0.0
    consts = [0.0, 1.0, -1.0] + [float(np.mean(f.values)) for f, _, _ in probes]
    for c in consts:
        img = env.lower_apply(Gamble.constant(space, c))
        worst_lr1 = max(worst_lr1, float(np.max(np.abs(img.values))))

    worst_lr2 = 0.0
    for y in range(space.size):
        img = env.lower_apply(Gamble.indicator(space, y)).values
        for x in range(space.size):
            if x != y:
                worst_lr2 = max(worst_lr2, max(0.0, -float(img[x])))

    worst_lr3 = 0.0
    worst_lr4 = 0.0
    for f, g, lam in probes:
        lhs = env.lower_apply(Gamble(space, f.values + g.values)).values
        rhs = env.lower_apply(f).values + env.lower_apply(g).values
        worst_lr3 = max(worst_lr3, float(np.max(rhs - lhs)))
        lam = abs(float(lam))
        scaled = env.lower_apply(Gamble(space, lam * f.values)).values
        worst_lr4 = max(
            worst_lr4, float(np.max(np.abs(scaled - lam * env.lower_apply(f).values)))
        )

    checks = (
        AxiomCheck("LR1", worst_lr1 <= tol, worst_lr1),
        AxiomCheck("LR2", worst_lr2 <= tol, worst_lr2),
        AxiomCheck("LR3", worst_lr3 <= tol, worst_lr3),
        AxiomCheck("LR4", worst_lr4 <= tol, worst_lr4),
    )
    return AxiomReport(all(c.passed for c in checks), checks)


@dataclass(frozen=True)
class DominanceViolation:
    probe_index: int
    state: int
    gap: float


@dataclass(frozen=True)
class DominanceReport:
    """Outcome of probing Qf >= Q_lower(f) componentwise.

    A violation certifies that Q does not dominate the envelope (so it lies
    outside the dominating set); an empty report is not a membership proof,
    since only finitely many probes were tried.
    """

    ok: bool
    violations: tuple[DominanceViolation, ...]


def dominance_falsifier(
    q: RateMatrix,
    env: LowerEnvelope,
    probes: Sequence[Gamble],
    tol: float = AXIOM_TOL,
) -> DominanceReport:
    _require_same_space(q, env)
    violations = []
    for i, f in enumerate(probes):
        qf = q.entries @ f.values
        low = env.lower_apply(f).values
        gaps = low - qf
        for x in np.flatnonzero(gaps > tol):
            violations.append(DominanceViolation(i, int(x), float(gaps[x])))
    return DominanceReport(not violations, tuple(violations))
