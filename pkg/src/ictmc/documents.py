"""Bit-exact JSON document formats for models and queries.

A model document carries the state labels, a rate-set description and an
optional set of initial distributions.  Numeric entries are either JSON
numbers or fraction strings like ``"1/52"``; fractions are converted to the
nearest 64-bit float exactly once, at parse time, so ``"1/52"`` and the
decimal literal ``0.019230769230769232`` denote the same value.

Serialization writes floats in shortest round-trip form, so parsing a
serialized model reproduces the original field for field.

Schema problems (malformed JSON, wrong types, missing keys, a non-positive
epsilon) raise :class:`DocumentError`; well-formed documents whose values
break a model invariant (bound ordering, row sums, pmf normalisation)
raise :class:`ModelValidationError`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .core import (
    IctmcError,
    MultiGamble,
    SquareMatrix,
    StateSpace,
    validate_rate_matrix,
)
from .envelope import LowerEnvelope, RateSetSpec
from .inference import InitialSetSpec

__all__ = [
    "DocumentError",
    "ModelValidationError",
    "ParsedModel",
    "ParsedQuery",
    "QUERY_KINDS",
    "parse_number",
    "load_model",
    "dump_model",
    "load_query",
]

QUERY_KINDS = (
    "conditional",
    "unconditional",
    "lower_probability",
    "upper_probability",
    "lower_expectation",
    "upper_expectation",
)


class DocumentError(IctmcError):
    """A document could not be parsed; carries line/column when known."""

    def __init__(self, message: str, line: Union[int, None] = None, col: Union[int, None] = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, column {col}: {message}"
        super().__init__(message)


class ModelValidationError(IctmcError):
    """A parsed document violates a model invariant."""


def parse_number(value) -> float:
    """A JSON number, or a fraction string "p/q" with integer p and q > 0."""
    if isinstance(value, bool):
        raise DocumentError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        parts = value.split("/")
        if len(parts) != 2:
            raise DocumentError(f"fraction string must look like 'p/q', got {value!r}")
        try:
            p = int(parts[0])
            q = int(parts[1])
        except ValueError:
            raise DocumentError(f"fraction parts must be integers in {value!r}") from None
        if q <= 0:
            raise DocumentError(f"fraction denominator must be positive in {value!r}")
        return float(Fraction(p, q))
    raise DocumentError(f"expected a number or fraction string, got {type(value).__name__}")


def parse_number_text(text: str) -> float:
    """A decimal literal or fraction string taken from command-line text."""
    text = text.strip()
    if "/" in text:
        return parse_number(text)
    try:
        return float(text)
    except ValueError:
        raise DocumentError(f"expected a number, got {text!r}") from None


@dataclass(frozen=True)
class ParsedModel:
    space: StateSpace
    rate_spec: RateSetSpec
    envelope: LowerEnvelope
    initial: Union[InitialSetSpec, None]


@dataclass(frozen=True)
class ParsedQuery:
    kind: str
    condition_times: tuple[float, ...]
    condition_states: Union[tuple[int, ...], None]
    target: MultiGamble
    epsilon: float


def _loads(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise DocumentError("top level must be a JSON object")
    return doc


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise DocumentError(f"missing key {key!r} in {context}")
    return doc[key]


def _bound_matrix(raw, space: StateSpace, which: str) -> np.ndarray:
    n = space.size
    if not (isinstance(raw, list) and len(raw) == n):
        raise DocumentError(f"{which!r} must be a {n}x{n} array")
    out = np.zeros((n, n))
    for x, row in enumerate(raw):
        if not (isinstance(row, list) and len(row) == n):
            raise DocumentError(f"{which!r} row {x} must have {n} entries")
        for y, cell in enumerate(row):
            if x == y:
                if cell is not None:
                    raise DocumentError(
                        f"{which!r} diagonal entries must be null (row {x})"
                    )
                continue
            out[x, y] = parse_number(cell)
    return out


def _parse_rate_set(doc, space: StateSpace) -> RateSetSpec:
    kind = _require(doc, "kind", "rate_set")
    if kind == "interval":
        lower = _bound_matrix(_require(doc, "lower", "rate_set"), space, "lower")
        upper = _bound_matrix(_require(doc, "upper", "rate_set"), space, "upper")
        try:
            return RateSetSpec.interval(space, lower, upper)
        except ValueError as exc:
            raise ModelValidationError(str(exc)) from None
    if kind == "finite":
        raw = _require(doc, "matrices", "rate_set")
        if not (isinstance(raw, list) and raw):
            raise DocumentError("'matrices' must be a non-empty list")
        members = []
        n = space.size
        for i, mat in enumerate(raw):
            if not (isinstance(mat, list) and len(mat) == n):
                raise DocumentError(f"matrix {i} must be a {n}x{n} array")
            entries = [[parse_number(c) for c in row] for row in mat]
            report = validate_rate_matrix(SquareMatrix(space, entries))
            if not report.ok:
                raise ModelValidationError(
                    f"matrix {i}: {report.describe(space.labels)}"
                )
            members.append(report.matrix)
        sep = doc.get("separately_specified", False)
        if not isinstance(sep, bool):
            raise DocumentError("'separately_specified' must be a boolean")
        return RateSetSpec.finite(space, members, rows_separately_specified=sep)
    raise DocumentError(f"unknown rate_set kind {kind!r}")


def _parse_initial(doc, space: StateSpace) -> InitialSetSpec:
    kind = _require(doc, "kind", "initial_set")
    pmfs_raw = doc.get("pmfs") or []
    pmfs = [[parse_number(c) for c in row] for row in pmfs_raw]
    try:
        if kind == "vacuous":
            if pmfs:
                raise DocumentError("a vacuous initial set carries no pmfs")
            return InitialSetSpec.vacuous(space)
        if kind == "singleton":
            if len(pmfs) != 1:
                raise DocumentError("a singleton initial set needs exactly one pmf")
            return InitialSetSpec.singleton(space, pmfs[0])
        if kind == "finite":
            return InitialSetSpec.finite(space, pmfs)
    except ValueError as exc:
        raise ModelValidationError(str(exc)) from None
    raise DocumentError(f"unknown initial_set kind {kind!r}")


def load_model(text: str) -> ParsedModel:
    doc = _loads(text)
    labels = _require(doc, "states", "model")
    if not (isinstance(labels, list) and all(isinstance(x, str) for x in labels)):
        raise DocumentError("'states' must be a list of strings")
    try:
        space = StateSpace(labels)
    except ValueError as exc:
        raise ModelValidationError(str(exc)) from None
    rate_raw = _require(doc, "rate_set", "model")
    if not isinstance(rate_raw, dict):
        raise DocumentError("'rate_set' must be an object")
    spec = _parse_rate_set(rate_raw, space)
    initial = None
    if "initial_set" in doc:
        if not isinstance(doc["initial_set"], dict):
            raise DocumentError("'initial_set' must be an object")
        initial = _parse_initial(doc["initial_set"], space)
    return ParsedModel(space, spec, LowerEnvelope(spec), initial)


def dump_model(model: ParsedModel) -> str:
    spec = model.rate_spec
    if spec.kind == "interval":
        def with_null_diag(arr):
            return [
                [None if x == y else arr[x, y] for y in range(model.space.size)]
                for x in range(model.space.size)
            ]

        rate = {
            "kind": "interval",
            "lower": with_null_diag(spec.lower),
            "upper": with_null_diag(spec.upper),
        }
    else:
        rate = {
            "kind": "finite",
            "matrices": [q.entries.tolist() for q in spec.matrices],
            "separately_specified": spec.rows_separately_specified,
        }
    doc = {"states": list(model.space.labels), "rate_set": rate}
    if model.initial is not None:
        init = {"kind": model.initial.kind}
        if model.initial.kind != "vacuous":
            init["pmfs"] = model.initial.pmfs.tolist()
        doc["initial_set"] = init
    return json.dumps(doc, indent=2)


def _expand_function(raw, space: StateSpace, times: tuple[float, ...]) -> np.ndarray:
    shape = (space.size,) * len(times)
    kind = _require(raw, "kind", "target.function")
    if kind == "table":
        values = _require(raw, "values", "target.function")
        expected = space.size ** len(times)
        if not (isinstance(values, list) and len(values) == expected):
            raise DocumentError(
                f"'values' must hold {expected} entries for {len(times)} time points"
            )
        return np.array([parse_number(v) for v in values]).reshape(shape)
    if kind == "indicator_state":
        t = parse_number(_require(raw, "time", "indicator_state"))
        label = _require(raw, "state", "indicator_state")
        if t not in times:
            raise DocumentError(f"indicator time {t} is not a target time point")
        try:
            idx = space.index(label)
        except ValueError as exc:
            raise DocumentError(str(exc)) from None
        table = np.zeros(shape)
        sel = tuple(idx if tp == t else slice(None) for tp in times)
        table[sel] = 1.0
        return table
    if kind == "indicator_equal":
        ta = parse_number(_require(raw, "time_a", "indicator_equal"))
        tb = parse_number(_require(raw, "time_b", "indicator_equal"))
        for t in (ta, tb):
            if t not in times:
                raise DocumentError(f"indicator time {t} is not a target time point")
        if ta == tb:
            raise DocumentError("indicator_equal needs two distinct time points")
        grids = np.indices(shape)
        pa = times.index(ta)
        pb = times.index(tb)
        return (grids[pa] == grids[pb]).astype(np.float64)
    raise DocumentError(f"unknown target function kind {kind!r}")


def load_query(text: str, space: StateSpace) -> ParsedQuery:
    doc = _loads(text)
    kind = _require(doc, "kind", "query")
    if kind not in QUERY_KINDS:
        raise DocumentError(f"unknown query kind {kind!r}")

    condition_times: tuple[float, ...] = ()
    condition_states = None
    if doc.get("condition") is not None:
        cond = doc["condition"]
        if not isinstance(cond, dict):
            raise DocumentError("'condition' must be an object")
        raw_times = _require(cond, "times", "condition")
        if not isinstance(raw_times, list):
            raise DocumentError("condition 'times' must be a list")
        condition_times = tuple(parse_number(t) for t in raw_times)
        if any(b <= a for a, b in zip(condition_times, condition_times[1:])):
            raise DocumentError("condition times must be strictly increasing")
        if cond.get("states") is not None:
            raw_states = cond["states"]
            if not (isinstance(raw_states, list) and len(raw_states) == len(condition_times)):
                raise DocumentError("condition 'states' must name one state per time")
            try:
                condition_states = tuple(space.index(x) for x in raw_states)
            except ValueError as exc:
                raise DocumentError(str(exc)) from None

    target_raw = _require(doc, "target", "query")
    if not isinstance(target_raw, dict):
        raise DocumentError("'target' must be an object")
    raw_times = _require(target_raw, "times", "target")
    if not (isinstance(raw_times, list) and raw_times):
        raise DocumentError("target 'times' must be a non-empty list")
    times = tuple(parse_number(t) for t in raw_times)
    if any(t < 0 for t in times):
        raise DocumentError("target times must be non-negative")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DocumentError("target times must be strictly increasing")
    table = _expand_function(_require(target_raw, "function", "target"), space, times)

    epsilon = parse_number(_require(doc, "epsilon", "query"))
    if not epsilon > 0:
        raise DocumentError("epsilon must be positive")

    if condition_times and times[: len(condition_times)] != condition_times:
        raise DocumentError("condition times must be a prefix of the target times")

    return ParsedQuery(
        kind=kind,
        condition_times=condition_times,
        condition_states=condition_states,
        target=MultiGamble(space, times, table),
        epsilon=epsilon,
    )
