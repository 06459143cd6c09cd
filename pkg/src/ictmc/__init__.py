"""Guaranteed-accuracy inference for imprecise continuous-time Markov chains.

Models are bounded sets of transition rate matrices (interval bounds or
finite vertex lists) together with a set of initial distributions.  The
package evaluates lower and upper expectations and probabilities of
functions of the state at finitely many time points, each with an explicit
worst-case error bound, plus a precise-chain oracle layer used to
cross-validate the operator computations.
"""

from .core import (
    Gamble,
    IctmcError,
    InvalidMatrixError,
    MultiGamble,
    RateMatrix,
    SpaceMismatchError,
    SquareMatrix,
    StateSpace,
    TransitionMatrix,
    ValidationReport,
    apply_matrix,
    max_norm,
    operator_norm,
    restrict,
    validate_rate_matrix,
    validate_transition_matrix,
    variation_norm,
)
from .envelope import (
    LowerEnvelope,
    RateSetSpec,
    check_lower_rate_axioms,
    dominance_falsifier,
)
from .inference import (
    ConditionalQuery,
    InitialSetSpec,
    UnconditionalQuery,
    conditional_multi_future,
    conditional_single_future,
    lower_exp_initial,
    lower_expectation,
    lower_probability,
    unconditional,
    upper_expectation,
    upper_probability,
)
from .oracle import (
    PiecewiseSystem,
    example8_closed_form,
    exhaustive_markov_min,
    greedy_markov_scheme,
    matrix_exponential,
    piecewise_expectation,
    whm_grid_search,
)
from .transition import (
    OperatorQuery,
    PartitionSpec,
    StepBudgetError,
    StepSizeError,
    compute_L,
    euler_step,
    phi_u,
    step_count,
)

__version__ = "0.1.0"
