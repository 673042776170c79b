from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from contend.model import EMPTY, ApplicationAgent, Phase, ResourceVector, ValuationHistory
from contend.valuation import (
    ApplicationFinished,
    BeliefTable,
    DiscountPolicy,
    ObservationOrderError,
    baseline_value,
    belief_update,
    differential_valuation,
    discount_factor,
    phase_valuation,
    record_observation,
    seed_histories,
)

KEY = ("App1", ResourceVector.single("R1"))


def history(*samples):
    return ValuationHistory(KEY, tuple((float(t), float(v)) for t, v in samples))


def exact_weighted_mean(samples, W, delta):
    """Rational-arithmetic evaluation of the discounted average."""
    delta = Fraction(delta)
    num = sum(delta ** int(W - t) * Fraction(v) for t, v in samples)
    den = sum(delta ** int(W - t) for t, _ in samples)
    return num / den


class TestRecordObservation:
    def test_first_sample(self):
        h = record_observation(ValuationHistory(KEY), 1, 1.9)
        assert h.samples == ((1.0, 1.9),)

    def test_loss_records_zero(self):
        h = record_observation(history((1, 1.9)), 2, 0.0)
        assert h.samples[-1] == (2.0, 0.0)

    def test_duplicate_time(self):
        with pytest.raises(ObservationOrderError):
            record_observation(history((1, 1.9)), 1, 1.0)

    def test_off_grid(self):
        with pytest.raises(ObservationOrderError):
            record_observation(ValuationHistory(KEY), 0.5, 1.0)

    def test_input_not_mutated(self):
        h = history((1, 1.0))
        record_observation(h, 2, 2.0)
        assert len(h) == 1


class TestBeliefUpdate:
    def test_constant(self):
        assert belief_update(history((0, 2.5), (1, 2.5), (2, 2.5)), 2, 0.3) == 2.5

    def test_zero_discount_keeps_latest(self):
        assert belief_update(history((0, 1.0), (1, 3.0)), 1, 0.0) == 3.0

    def test_unit_discount_is_mean(self):
        assert belief_update(history((0, 1.0), (1, 3.0)), 1, 1.0) == 2.0

    def test_half_discount(self):
        got = belief_update(history((0, 1.0), (1, 3.0)), 1, 0.5)
        assert got == pytest.approx(7 / 3, abs=1e-12)
        assert got == pytest.approx(float(exact_weighted_mean([(0, 1), (1, 3)], 1, 0.5)), abs=1e-12)

    def test_missing_grid_points_are_skipped(self):
        h = history((0, 1.0), (3, 4.0))
        expected = exact_weighted_mean([(0, 1), (3, 4)], 4, Fraction(1, 2))
        assert belief_update(h, 4, 0.5) == pytest.approx(float(expected), abs=1e-12)

    def test_rejects_empty_and_bad_delta(self):
        with pytest.raises(ValueError):
            belief_update(ValuationHistory(KEY), 0, 0.5)
        with pytest.raises(ValueError):
            belief_update(history((0, 1.0)), 0, 1.5)

    @given(
        st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=8),
        st.sampled_from([0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]),
    )
    def test_matches_rational_oracle(self, values, tenths):
        delta = Fraction(tenths, 10)
        samples = list(enumerate(values))
        W = len(values) - 1
        expected = float(exact_weighted_mean(samples, W, delta)) if delta else values[-1]
        got = belief_update(history(*samples), W, float(delta))
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestDiscountFactor:
    def test_zero_variance_gives_clamp_max(self):
        assert discount_factor(history((0, 2), (1, 2), (2, 2)), DiscountPolicy()) == 1.0

    def test_fixed(self):
        assert discount_factor(history((0, 5), (1, 0)), DiscountPolicy.fixed(0.7)) == 0.7

    def test_ratio_clamped(self):
        # mean 1, population variance 1
        assert discount_factor(history((0, 0), (1, 2)), DiscountPolicy()) == 1.0

    def test_ratio_inside_bounds(self):
        # mean 1, population variance 4: ratio 0.25
        assert discount_factor(history((0, -1), (1, 3)), DiscountPolicy()) == pytest.approx(0.25)

    def test_invalid_policy(self):
        with pytest.raises(ValueError):
            DiscountPolicy(mode="sometimes")


class TestDifferentialValuation:
    def test_matrix_rows(self, matrix_beliefs):
        assert differential_valuation("App1", 0, EMPTY, "R1", matrix_beliefs) == 1.9
        assert differential_valuation("App4", 0, EMPTY, "R5", matrix_beliefs) == 1.4

    def test_held_resource_is_worth_nothing_extra(self, matrix_beliefs):
        held = ResourceVector.single("R3")
        assert differential_valuation("App2", 0, held, "R3", matrix_beliefs) == 0.0

    def test_move_between_resources(self, matrix_beliefs):
        held = ResourceVector.single("R2")
        got = differential_valuation("App1", 0, held, "R1", matrix_beliefs)
        assert got == pytest.approx(0.2)

    def test_unknown_resource(self, matrix_beliefs):
        with pytest.raises(KeyError):
            differential_valuation("App1", 0, EMPTY, "R9", matrix_beliefs)

    def test_scaled_and_baseline(self):
        table = BeliefTable.from_matrix({"a": {"x": 2.0}}, ["x"], baseline={"a": 0.5})
        assert table.value("a", EMPTY) == 0.5
        assert table.scaled("a", 2.0).row("a") == {"x": 4.0}


class TestPhaseValuation:
    def test_profiled_values(self, hmmer_mcf):
        hmmer = hmmer_mcf.application("hmmer")
        mcf = hmmer_mcf.application("mcf")
        assert phase_valuation(hmmer, 0, "large") == 1.35
        assert phase_valuation(mcf, 1, "large") == 1.3684

    def test_finished(self, hmmer_mcf):
        with pytest.raises(ApplicationFinished):
            phase_valuation(hmmer_mcf.application("hmmer"), 2, "large")

    def test_baseline_modes(self):
        app = ApplicationAgent("a", (Phase(0, 1, {"x": 1.0, "y": 3.0}),))
        assert baseline_value(app, 0, "zero") == 0.0
        assert baseline_value(app, 0, "mean") == 2.0
        with pytest.raises(ValueError):
            baseline_value(app, 0, "median")

    def test_seed_histories(self, hmmer_mcf):
        seeded = seed_histories(hmmer_mcf.application("mcf"), 1)
        assert seeded[("mcf", ResourceVector.single("large"))].samples == ((1.0, 1.3684),)
