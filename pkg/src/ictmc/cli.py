"""Command-line surface: validate models, run queries, sweep horizons, cross-check.

Exit codes are a stable contract: 0 success, 1 parse error, 2 validation
error, 3 step-budget exceeded, 4 incompatible flags for the given model,
5 oracle cross-check failure.  Results go to standard output, diagnostics
to standard error.  Numbers are printed in shortest round-trip form, so
output is deterministic byte for byte for fixed inputs and flags.

The environment variable ``ICTMC_STEP_CAP`` overrides the default cap of
10^9 guaranteed-accuracy iteration steps.
"""

from __future__ import annotations

import json
import os
import sys
from typing import Union

import click
import numpy as np

from .core import Gamble, MultiGamble
from .documents import (
    DocumentError,
    ModelValidationError,
    ParsedModel,
    load_model,
    load_query,
    parse_number_text,
)
from .envelope import check_lower_rate_axioms
from .inference import (
    ConditionalQuery,
    InitialSetSpec,
    TableOutcome,
    UnconditionalQuery,
    lower_expectation,
    lower_probability,
    upper_expectation,
    upper_probability,
)
from .oracle import (
    exhaustive_markov_min,
    greedy_markov_scheme,
    matrix_exponential,
    whm_grid_search,
)
from .transition import DEFAULT_STEP_CAP, StepBudgetError, compute_L

EXIT_PARSE = 1
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_INCOMPATIBLE = 4
EXIT_ORACLE = 5


def _step_cap() -> int:
    raw = os.environ.get("ICTMC_STEP_CAP")
    if raw is None:
        return DEFAULT_STEP_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise click.ClickException(f"ICTMC_STEP_CAP must be an integer, got {raw!r}")
    if cap < 1:
        raise click.ClickException("ICTMC_STEP_CAP must be positive")
    return cap


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        _fail(EXIT_PARSE, f"cannot read {path}: {exc}")


def _load_model_or_exit(path: str) -> ParsedModel:
    try:
        return load_model(_read(path))
    except ModelValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except DocumentError as exc:
        _fail(EXIT_PARSE, str(exc))


@click.group()
def main():
    """Guaranteed-accuracy inference for imprecise continuous-time Markov chains."""


@main.command()
@click.argument("model_path", type=click.Path())
def validate(model_path):
    """Check a model document and report its derived quantities."""
    model = _load_model_or_exit(model_path)
    spec = model.rate_spec
    click.echo(f"states: {model.space.size} ({', '.join(model.space.labels)})")
    click.echo(f"rate set: {spec.kind}")
    if spec.kind == "interval":
        click.echo("interval bounds: 0 <= lower <= upper on all off-diagonal entries")
    else:
        click.echo(f"members: {len(spec.matrices)} (all pass the rate-matrix constraints)")
        click.echo(f"separately specified rows declared: {spec.rows_separately_specified}")
    click.echo(f"lower rate operator norm bound: {model.envelope.norm_bound!r}")
    if model.initial is not None:
        click.echo(f"initial set: {model.initial.kind}")
    click.echo("OK")


def _maybe_warn_finite(model: ParsedModel, stages: int) -> None:
    spec = model.rate_spec
    if spec.kind != "finite":
        return
    if not spec.rows_separately_specified:
        click.echo(
            "warning: the finite rate set does not declare separately specified rows; "
            "computed lower values are guaranteed outer bounds but may not be tight",
            err=True,
        )
    if stages > 1:
        click.echo(
            "warning: multi-future-time queries assume a convex rate set; a finite "
            "vertex list is evaluated through its row-wise envelope, so the result "
            "applies to its convex closure",
            err=True,
        )


def _history_rows(model: ParsedModel, outcome: TableOutcome, states):
    values = outcome.values
    rows = []
    if states is not None:
        idx = tuple(states)
        rows.append((idx, float(values.table[idx])))
    else:
        for idx in np.ndindex(values.table.shape):
            rows.append((idx, float(values.table[idx])))
    return [
        {
            "history": [model.space.labels[i] for i in idx],
            "value": value,
            "bound": outcome.bound,
        }
        for idx, value in rows
    ]


@main.command()
@click.argument("model_path", type=click.Path())
@click.argument("query_path", type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON object.")
@click.option("--plain", "as_json", flag_value=False, help="Emit plain lines (default).")
def query(model_path, query_path, as_json):
    """Evaluate a query document against a model document."""
    model = _load_model_or_exit(model_path)
    try:
        parsed = load_query(_read(query_path), model.space)
    except DocumentError as exc:
        _fail(EXIT_PARSE, str(exc))

    conditional = bool(parsed.condition_times)
    if parsed.kind == "conditional" and not conditional:
        _fail(EXIT_PARSE, "a 'conditional' query needs a condition")
    if parsed.kind == "unconditional" and conditional:
        _fail(EXIT_PARSE, "an 'unconditional' query cannot carry a condition")

    try:
        if conditional:
            q = ConditionalQuery(
                model.envelope,
                parsed.condition_times,
                parsed.target,
                parsed.epsilon,
                parsed.condition_states,
            )
            stages = len(parsed.target.times) - len(parsed.condition_times)
        else:
            initial = model.initial or InitialSetSpec.vacuous(model.space)
            q = UnconditionalQuery(model.envelope, initial, parsed.target, parsed.epsilon)
            stages = len(parsed.target.times)
    except ValueError as exc:
        _fail(EXIT_PARSE, str(exc))

    _maybe_warn_finite(model, stages)
    op = {
        "conditional": lower_expectation,
        "unconditional": lower_expectation,
        "lower_expectation": lower_expectation,
        "upper_expectation": upper_expectation,
        "lower_probability": lower_probability,
        "upper_probability": upper_probability,
    }[parsed.kind]
    try:
        outcome = op(q, step_cap=_step_cap())
    except StepBudgetError as exc:
        _fail(EXIT_BUDGET, f"{exc} (required steps: {exc.required})")
    except ValueError as exc:
        _fail(EXIT_PARSE, str(exc))

    if isinstance(outcome, TableOutcome):
        results = _history_rows(model, outcome, q.condition_states)
    else:
        results = [{"value": outcome.value, "bound": outcome.bound}]

    if as_json:
        click.echo(
            json.dumps(
                {
                    "results": results,
                    "epsilon": parsed.epsilon,
                    "steps_total": outcome.steps,
                }
            )
        )
    else:
        for row in results:
            if "history" in row:
                hist = ",".join(row["history"])
                click.echo(f"{hist}\t{row['value']!r}\t{row['bound']!r}")
            else:
                click.echo(f"{row['value']!r}\t{row['bound']!r}")


def _whm_free_interval(model: ParsedModel):
    """The free off-diagonal interval of a one-parameter ternary chain.

    Compatible models have three states, interval bounds with exactly one
    strict interval (first row, second column) inside [0.01, 0.5], a fixed
    second-row rate of 0.01 to the third state, and an absorbing third
    state; the fixed-rate closed form used for the grid search hard-codes
    that structure.
    """
    spec = model.rate_spec
    if spec.kind != "interval" or model.space.size != 3:
        return None
    low, up = spec.lower, spec.upper
    fixed = {(0, 2): 0.0, (1, 0): 0.0, (1, 2): 0.01, (2, 0): 0.0, (2, 1): 0.0}
    for (x, y), value in fixed.items():
        if low[x, y] != value or up[x, y] != value:
            return None
    if not (0.01 <= low[0, 1] < up[0, 1] <= 0.5):
        return None
    return float(low[0, 1]), float(up[0, 1])


@main.command()
@click.argument("model_path", type=click.Path())
@click.option("--target", required=True, help="Comma-separated gamble values, e.g. '1,0,2'.")
@click.option("--condition", required=True, help="Conditioning state label at time 0.")
@click.option("--t0", type=float, required=True)
@click.option("--t1", type=float, required=True)
@click.option("--points", type=int, required=True)
@click.option("--epsilon", type=float, default=1e-3, show_default=True)
@click.option("--whm-grid", type=int, default=None, help="Fixed-rate grid size, when compatible.")
def sweep(model_path, target, condition, t0, t1, points, epsilon, whm_grid):
    """Sweep the horizon and print CSV rows of guaranteed lower expectations."""
    model = _load_model_or_exit(model_path)
    try:
        values = [parse_number_text(v) for v in target.split(",")]
    except DocumentError as exc:
        _fail(EXIT_PARSE, f"bad --target: {exc}")
    if len(values) != model.space.size:
        _fail(EXIT_VALIDATION, f"--target needs {model.space.size} values")
    try:
        cond_idx = model.space.index(condition)
    except ValueError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    if not t0 < t1:
        _fail(EXIT_VALIDATION, "--t0 must be strictly below --t1")
    if points < 2:
        _fail(EXIT_VALIDATION, "--points must be at least 2")
    if epsilon <= 0:
        _fail(EXIT_VALIDATION, "--epsilon must be positive")

    lam_grid = None
    if whm_grid is not None:
        free = _whm_free_interval(model)
        if free is None:
            _fail(
                EXIT_INCOMPATIBLE,
                "--whm-grid needs the one-parameter ternary interval model",
            )
        if whm_grid < 2:
            _fail(EXIT_VALIDATION, "--whm-grid must be at least 2")
        if values != [1.0, 0.0, 2.0] or cond_idx != 0:
            _fail(
                EXIT_INCOMPATIBLE,
                "--whm-grid requires --target 1,0,2 and conditioning on the first state",
            )
        lam_grid = np.linspace(free[0], free[1], whm_grid)

    f = Gamble(model.space, values)
    cap = _step_cap()
    ts = np.linspace(t0, t1, points)
    header = "t,lower_W,whm_grid" if lam_grid is not None else "t,lower_W"
    click.echo(header)
    for t in ts:
        t = float(t)
        try:
            res = compute_L(model.envelope, 0.0, t, f, epsilon, cap)
        except StepBudgetError as exc:
            _fail(EXIT_BUDGET, f"{exc} (required steps: {exc.required})")
        low = float(res.gamble.values[cond_idx])
        if lam_grid is not None:
            click.echo(f"{t!r},{low!r},{whm_grid_search(lam_grid, t)!r}")
        else:
            click.echo(f"{t!r},{low!r}")


def _random_unit_gamble(rng, space) -> Gamble:
    v = rng.uniform(-1.0, 1.0, space.size)
    return Gamble(space, v)


def _oracle_singleton(model: ParsedModel, rng, cap) -> tuple[float, float, str]:
    q = model.rate_spec.matrices[0]
    worst = 0.0
    worst_probe = ""
    eps = 1e-6
    for _ in range(10):
        f = _random_unit_gamble(rng, model.space)
        t = float(rng.uniform(0.0, 3.0))
        approx = compute_L(model.envelope, 0.0, t, f, eps, cap).gamble.values
        exact = matrix_exponential(q, t).entries @ f.values
        residual = float(np.max(np.abs(approx - exact)))
        if residual > worst:
            worst = residual
            worst_probe = f"f={f.values.tolist()} t={t}"
    return worst, eps + 1e-9, worst_probe


def _oracle_greedy(model: ParsedModel, rng, cap) -> tuple[float, float, str]:
    eps = 1e-3
    worst = 0.0
    worst_probe = ""
    for _ in range(3):
        f = _random_unit_gamble(rng, model.space)
        low = compute_L(model.envelope, 0.0, 1.0, f, eps, cap).gamble.values
        markov = greedy_markov_scheme(model.envelope, 0.0, 1.0, 2048, f).values
        residual = float(np.max(low - markov))
        if residual > worst:
            worst = residual
            worst_probe = f"f={f.values.tolist()}"
    return worst, eps + 1e-9, worst_probe


def _oracle_exhaustive(model: ParsedModel, rng, cap) -> tuple[float, float, str]:
    eps = 1e-4
    worst = 0.0
    worst_probe = ""
    for _ in range(3):
        f = _random_unit_gamble(rng, model.space)
        low = compute_L(model.envelope, 0.0, 1.0, f, eps, cap).gamble.values
        brute = exhaustive_markov_min(model.rate_spec.matrices, 0.0, 1.0, 6, f).values
        residual = float(np.max(low - brute))
        if residual > worst:
            worst = residual
            worst_probe = f"f={f.values.tolist()}"
    return worst, eps + 1e-9, worst_probe


def _oracle_axioms(model: ParsedModel, rng, cap) -> tuple[float, float, str]:
    probes = []
    for _ in range(100):
        probes.append(
            (
                _random_unit_gamble(rng, model.space),
                _random_unit_gamble(rng, model.space),
                float(rng.uniform(0.0, 3.0)),
            )
        )
    report = check_lower_rate_axioms(model.envelope, probes)
    worst = max(c.worst_residual for c in report.checks)
    failing = ", ".join(c.name for c in report.checks if not c.passed) or "none"
    return worst, 1e-9, f"failing axioms: {failing}"


@main.command()
@click.argument("model_path", type=click.Path())
@click.option(
    "--check",
    type=click.Choice(["singleton", "greedy", "exhaustive", "axioms"]),
    required=True,
)
@click.option("--seed", type=int, default=0, show_default=True)
def oracle(model_path, check, seed):
    """Cross-check the operator layer against precise-chain references."""
    model = _load_model_or_exit(model_path)
    if check == "singleton" and not (
        model.rate_spec.kind == "finite" and len(model.rate_spec.matrices) == 1
    ):
        _fail(EXIT_INCOMPATIBLE, "the singleton check needs a one-member finite model")
    if check == "exhaustive" and model.rate_spec.kind != "finite":
        _fail(EXIT_INCOMPATIBLE, "the exhaustive check needs a finite model")
    rng = np.random.default_rng(seed)
    runner = {
        "singleton": _oracle_singleton,
        "greedy": _oracle_greedy,
        "exhaustive": _oracle_exhaustive,
        "axioms": _oracle_axioms,
    }[check]
    worst, tolerance, probe = runner(model, rng, _step_cap())
    ok = worst <= tolerance
    click.echo(f"check: {check}")
    click.echo(f"worst residual: {worst!r} (tolerance {tolerance!r})")
    click.echo("PASS" if ok else "FAIL")
    if not ok:
        click.echo(f"counterexample probe: {probe}", err=True)
        sys.exit(EXIT_ORACLE)


if __name__ == "__main__":
    main()
