import numpy as np
import pytest

from ictmc import (
    ConditionalQuery,
    Gamble,
    InitialSetSpec,
    LowerEnvelope,
    MultiGamble,
    RateSetSpec,
    SpaceMismatchError,
    StateSpace,
    UnconditionalQuery,
    compute_L,
    conditional_multi_future,
    conditional_single_future,
    lower_exp_initial,
    lower_expectation,
    lower_probability,
    matrix_exponential,
    unconditional,
    upper_expectation,
    upper_probability,
)

from conftest import random_rate_matrix


def match_indicator(space):
    """1 if the states at times 1 and 2 coincide, extended over time 0."""
    n = space.size
    table = np.zeros((n, n, n))
    for x1 in range(n):
        table[:, x1, x1] = 1.0
    return MultiGamble(space, (0.0, 1.0, 2.0), table)


class TestInitialSets:
    def test_vacuous_is_min(self):
        sp = StateSpace(["a", "b", "c"])
        init = InitialSetSpec.vacuous(sp)
        assert lower_exp_initial(init, Gamble(sp, [1.0, 0.0, 2.0])) == 0.0

    def test_singleton_is_dot_product(self):
        sp = StateSpace(["a", "b"])
        init = InitialSetSpec.singleton(sp, [0.5, 0.5])
        assert lower_exp_initial(init, Gamble(sp, [0.0, 1.0])) == 0.5

    def test_finite_is_min_over_vertices(self):
        sp = StateSpace(["a", "b"])
        init = InitialSetSpec.finite(sp, [[1.0, 0.0], [0.0, 1.0]])
        assert lower_exp_initial(init, Gamble(sp, [0.2, 0.9])) == 0.2

    def test_convex_combination_changes_nothing(self):
        sp = StateSpace(["a", "b"])
        two = InitialSetSpec.finite(sp, [[1.0, 0.0], [0.0, 1.0]])
        three = InitialSetSpec.finite(sp, [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        rng = np.random.default_rng(81)
        for _ in range(50):
            f = Gamble(sp, rng.uniform(-3, 3, 2))
            assert lower_exp_initial(two, f) == lower_exp_initial(three, f)

    def test_pmf_validation(self):
        sp = StateSpace(["a", "b"])
        with pytest.raises(ValueError):
            InitialSetSpec.singleton(sp, [0.7, 0.7])
        with pytest.raises(ValueError):
            InitialSetSpec.singleton(sp, [-0.1, 1.1])
        with pytest.raises(ValueError):
            InitialSetSpec.finite(sp, [])

    def test_space_mismatch(self):
        init = InitialSetSpec.vacuous(StateSpace(["a", "b"]))
        with pytest.raises(SpaceMismatchError):
            lower_exp_initial(init, Gamble(StateSpace(["x", "y"]), [0.0, 1.0]))


class TestConditionalSingleFuture:
    def test_disease_inner_pass(self, disease_env, disease_space):
        # Restrictions of the match indicator at time 2 are the two state
        # indicators; values come from the one-step-ahead operator run.
        f = match_indicator(disease_space)
        out = conditional_single_future(disease_env, (0.0, 1.0), 2.0, f, 1e-3)
        table = out.values.table
        for x0 in range(2):
            assert abs(table[x0, 0] - 0.956) < 2e-3
            assert abs(table[x0, 1] - 0.141) < 2e-3
        assert out.bound == 1e-3

    def test_history_matters_only_through_latest_state(self, disease_env, disease_space):
        f = match_indicator(disease_space)
        out = conditional_single_future(disease_env, (0.0, 1.0), 2.0, f, 1e-3)
        table = out.values.table
        assert np.array_equal(table[0], table[1])

    def test_constant_restriction_short_circuits(self, disease_env, disease_space):
        table = np.zeros((2, 2))
        table[0, :] = 3.0
        table[1, :] = -1.0
        f = MultiGamble(disease_space, (0.0, 5.0), table)
        out = conditional_single_future(disease_env, (0.0,), 5.0, f, 1e-6)
        assert np.array_equal(out.values.table, [3.0, -1.0])
        assert out.steps == 0

    def test_singleton_env_matches_uniformization(self, disease_space):
        rng = np.random.default_rng(91)
        q = random_rate_matrix(rng, disease_space, 2.0)
        env = LowerEnvelope(RateSetSpec.finite(disease_space, [q]))
        table = rng.uniform(-1, 1, (2, 2))
        f = MultiGamble(disease_space, (0.5, 2.0), table)
        out = conditional_single_future(env, (0.5,), 2.0, f, 1e-6)
        factor = matrix_exponential(q, 1.5).entries
        for x0 in range(2):
            exact = (factor @ table[x0])[x0]
            assert abs(out.values.table[x0] - exact) <= 1e-6 + 1e-9

    def test_requires_matching_times(self, disease_env, disease_space):
        f = match_indicator(disease_space)
        with pytest.raises(ValueError):
            conditional_single_future(disease_env, (0.0,), 2.0, f, 1e-3)


class TestConditionalMultiFuture:
    def test_disease_two_step_query(self, disease_env, disease_space):
        q = ConditionalQuery(disease_env, (0.0,), match_indicator(disease_space), 2e-3)
        out = conditional_multi_future(q)
        assert abs(out.values.table[0] - 0.920) <= 3e-3
        assert abs(out.values.table[1] - 0.453) <= 3e-3
        assert out.bound == 2e-3

    def test_single_stage_reduces_to_single_future(self, disease_env, disease_space):
        rng = np.random.default_rng(92)
        table = rng.uniform(-1, 1, (2, 2))
        f = MultiGamble(disease_space, (0.0, 1.0), table)
        q = ConditionalQuery(disease_env, (0.0,), f, 1e-3)
        multi = conditional_multi_future(q)
        single = conditional_single_future(disease_env, (0.0,), 1.0, f, 1e-3)
        assert np.array_equal(multi.values.table, single.values.table)

    def test_singleton_env_composes_exponentials(self, disease_space):
        rng = np.random.default_rng(93)
        q = random_rate_matrix(rng, disease_space, 1.5)
        env = LowerEnvelope(RateSetSpec.finite(disease_space, [q]))
        v = rng.uniform(-1, 1, 2)
        table = np.broadcast_to(v, (2, 2, 2))
        f = MultiGamble(disease_space, (0.0, 1.0, 2.0), np.array(table))
        out = conditional_multi_future(ConditionalQuery(env, (0.0,), f, 2e-6))
        exact = matrix_exponential(q, 2.0).entries @ v
        for x0 in range(2):
            assert abs(out.values.table[x0] - exact[x0]) <= 2e-6 + 1e-9

    def test_empty_condition_yields_first_time_gamble(self, disease_env, disease_space):
        rng = np.random.default_rng(94)
        table = rng.uniform(0, 1, (2, 2))
        f = MultiGamble(disease_space, (0.0, 1.0), table)
        out = conditional_multi_future(ConditionalQuery(disease_env, (), f, 1e-3))
        assert out.values.times == (0.0,)
        direct = np.array(
            [
                compute_L(disease_env, 0.0, 1.0, Gamble(disease_space, table[x0]), 1e-3)
                .gamble.values[x0]
                for x0 in range(2)
            ]
        )
        assert np.array_equal(out.values.table, direct)

    def test_query_validation(self, disease_env, disease_space):
        f = match_indicator(disease_space)
        with pytest.raises(ValueError):
            ConditionalQuery(disease_env, (1.0,), f, 1e-3)
        with pytest.raises(ValueError):
            ConditionalQuery(disease_env, (0.0, 1.0, 2.0), f, 1e-3)
        with pytest.raises(ValueError):
            ConditionalQuery(disease_env, (0.0,), f, 0.0)
        with pytest.raises(ValueError):
            ConditionalQuery(disease_env, (0.0,), f, 1e-3, condition_states=(0, 1))


class TestUnconditional:
    def test_time_zero_only_is_exact(self, disease_env, disease_space):
        init = InitialSetSpec.finite(disease_space, [[0.9, 0.1], [0.4, 0.6]])
        f = MultiGamble(disease_space, (0.0,), [2.0, -1.0])
        out = unconditional(UnconditionalQuery(disease_env, init, f, 1e-3))
        assert out.value == lower_exp_initial(init, Gamble(disease_space, [2.0, -1.0]))
        assert out.bound == 0.0 and out.steps == 0

    def test_vacuous_with_future_time(self, disease_env, disease_space):
        # Target ignores the state at time 0, so the value is the minimum
        # of the one-week operator image of the sick indicator.
        table = np.zeros((2, 2))
        table[:, 1] = 1.0
        f = MultiGamble(disease_space, (0.0, 1.0), table)
        init = InitialSetSpec.vacuous(disease_space)
        out = unconditional(UnconditionalQuery(disease_env, init, f, 1e-3))
        assert abs(out.value - 0.0083) <= 1e-3 + 5e-4

    def test_trivial_extension_matches_explicit(self, disease_env, disease_space):
        init = InitialSetSpec.vacuous(disease_space)
        short = MultiGamble(disease_space, (1.0,), [0.0, 1.0])
        table = np.zeros((2, 2))
        table[:, 1] = 1.0
        explicit = MultiGamble(disease_space, (0.0, 1.0), table)
        a = unconditional(UnconditionalQuery(disease_env, init, short, 1e-3))
        b = unconditional(UnconditionalQuery(disease_env, init, explicit, 1e-3))
        assert a.value == b.value

    def test_singleton_chain_matches_precise_expectation(self, disease_space):
        rng = np.random.default_rng(95)
        q = random_rate_matrix(rng, disease_space, 2.5)
        env = LowerEnvelope(RateSetSpec.finite(disease_space, [q]))
        p = np.array([0.3, 0.7])
        init = InitialSetSpec.singleton(disease_space, p)
        v = rng.uniform(-1, 1, 2)
        f = MultiGamble(disease_space, (1.5,), v)
        out = unconditional(UnconditionalQuery(env, init, f, 1e-6))
        exact = p @ (matrix_exponential(q, 1.5).entries @ v)
        assert abs(out.value - exact) <= 1e-6 + 1e-9


class TestProbabilitiesAndConjugacy:
    def test_disease_lower_probability(self, disease_env, disease_space):
        table = np.zeros((2, 2))
        table[:, 1] = 1.0
        event = MultiGamble(disease_space, (0.0, 1.0), table)
        q = ConditionalQuery(
            disease_env, (0.0,), event, 1e-3, condition_states=("sick",)
        )
        out = lower_probability(q)
        assert abs(out.values.table[1] - 0.141) <= 1e-3 + 5e-4

    def test_certain_event_is_exactly_one(self, disease_env, disease_space):
        event = MultiGamble(disease_space, (0.0, 1.0), np.ones((2, 2)))
        out = lower_probability(ConditionalQuery(disease_env, (0.0,), event, 1e-3))
        assert np.array_equal(out.values.table, [1.0, 1.0])

    def test_impossible_event_is_exactly_zero(self, disease_env, disease_space):
        event = MultiGamble(disease_space, (0.0, 1.0), np.zeros((2, 2)))
        out = lower_probability(ConditionalQuery(disease_env, (0.0,), event, 1e-3))
        assert np.array_equal(out.values.table, [0.0, 0.0])

    def test_probability_rejects_non_indicator(self, disease_env, disease_space):
        f = MultiGamble(disease_space, (0.0, 1.0), np.full((2, 2), 0.5))
        with pytest.raises(ValueError):
            lower_probability(ConditionalQuery(disease_env, (0.0,), f, 1e-3))

    def test_upper_is_negated_lower_bitwise(self, disease_env, disease_space):
        rng = np.random.default_rng(96)
        table = rng.uniform(-2, 2, (2, 2, 2))
        f = MultiGamble(disease_space, (0.0, 1.0, 2.0), table)
        q = ConditionalQuery(disease_env, (0.0,), f, 1e-3)
        upper = upper_expectation(q).values.table
        negated = ConditionalQuery(
            disease_env, (0.0,), MultiGamble(disease_space, f.times, -table), 1e-3
        )
        manual = -conditional_multi_future(negated).values.table
        assert np.array_equal(upper, manual)

    def test_upper_dominates_week_ahead_lower(self, disease_env, disease_space):
        table = np.zeros((2, 2))
        table[:, 1] = 1.0
        event = MultiGamble(disease_space, (0.0, 1.0), table)
        q = ConditionalQuery(disease_env, (0.0,), event, 1e-3)
        low = lower_probability(q).values.table[1]
        high = upper_probability(q).values.table[1]
        assert high >= low
        assert high >= 0.141 - 1e-3

    def test_lower_below_upper(self, disease_env, disease_space):
        rng = np.random.default_rng(97)
        for _ in range(25):
            table = rng.uniform(-2, 2, (2, 2))
            f = MultiGamble(disease_space, (0.0, 1.0), table)
            q = ConditionalQuery(disease_env, (0.0,), f, 1e-3)
            assert np.all(
                lower_expectation(q).values.table
                <= upper_expectation(q).values.table + 1e-12
            )

    def test_complement_identity(self, disease_env, disease_space):
        eps = 1e-3
        table = np.zeros((2, 2))
        table[:, 1] = 1.0
        event = MultiGamble(disease_space, (0.0, 1.0), table)
        complement = MultiGamble(disease_space, (0.0, 1.0), 1.0 - table)
        low = lower_probability(ConditionalQuery(disease_env, (0.0,), event, eps))
        upc = upper_probability(ConditionalQuery(disease_env, (0.0,), complement, eps))
        assert np.max(np.abs(low.values.table + upc.values.table - 1.0)) <= 2 * eps

    def test_widening_never_raises_lower_expectation(self, disease_space):
        rng = np.random.default_rng(98)
        low = np.array([[0.0, 1 / 52], [0.5, 0.0]])
        up = np.array([[0.0, 3 / 52], [2.0, 0.0]])
        narrow = LowerEnvelope(RateSetSpec.interval(disease_space, low, up))
        wide = LowerEnvelope(RateSetSpec.interval(disease_space, low * 0.5, up * 1.5))
        eps = 1e-4
        for _ in range(5):
            table = rng.uniform(-1, 1, (2, 2))
            f = MultiGamble(disease_space, (0.0, 1.0), table)
            a = conditional_multi_future(ConditionalQuery(narrow, (0.0,), f, eps))
            b = conditional_multi_future(ConditionalQuery(wide, (0.0,), f, eps))
            assert np.all(b.values.table <= a.values.table + 2 * eps)
