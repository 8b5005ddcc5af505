"""Aggregate infection curves: shape detection, verification, search."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbfsir import (
    EpidemicState,
    IntegratorOptions,
    ModelParams,
    OuterProduct,
    Rank1Local,
    Shape,
    aggregate_curve,
    aggregate_values,
    curve_to_csv,
    detect_unimodality,
    force_of_infection,
    integrate,
    is_feasible,
    preset,
    search_multimodal_ic,
    vector_field,
    verify_unimodality,
)
from nbfsir.errors import UsageError
from nbfsir.interaction import ExpressionFunction


def _rank1(g: str, f: str, n: int = 2) -> Rank1Local:
    return Rank1Local(tuple(ExpressionFunction(g) for _ in range(n)),
                      tuple(ExpressionFunction(f) for _ in range(n)))


class TestDetectUnimodality:
    def test_falling_curve(self):
        shape, peak, extrema = detect_unimodality(
            [0.0, 1.0, 2.0, 3.0, 4.0], [5.0, 4.0, 3.0, 2.0, 1.0])
        assert shape is Shape.MONOTONE_DECREASING
        assert peak == 0.0
        assert extrema == ()

    def test_single_peak_with_quadratic_refinement(self):
        shape, peak, extrema = detect_unimodality(
            [0.0, 1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 1.0, 0.5])
        assert shape is Shape.UNIMODAL
        # vertex of the parabola through (0,1), (1,3), (2,2)
        assert peak == pytest.approx(7.0 / 6.0, abs=1e-12)
        assert len(extrema) == 1
        assert extrema[0].kind == "max"
        assert extrema[0].index == 1

    def test_two_waves(self):
        shape, peak, extrema = detect_unimodality(
            [0.0, 1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 1.0, 3.0, 1.0],
            noise_tol=1e-3)
        assert shape is Shape.MULTIMODAL
        assert peak is None
        assert [e.kind for e in extrema] == ["max", "min", "max"]

    def test_still_rising_at_the_end(self):
        shape, peak, extrema = detect_unimodality(
            [0.0, 1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0, 5.0])
        assert shape is Shape.MONOTONE_INCREASING_TRUNCATED
        assert peak is None
        assert extrema == ()

    def test_hysteresis_ignores_sub_threshold_ripple(self):
        times = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        ripple = [1.0, 3.0, 2.0, 2.0005, 1.0, 0.5]
        shape, _, extrema = detect_unimodality(times, ripple, noise_tol=1e-3)
        assert shape is Shape.UNIMODAL
        assert len(extrema) == 1
        # the same wiggle above threshold is a genuine second wave
        bump = [1.0, 3.0, 2.0, 2.5, 1.0, 0.5]
        shape, _, _ = detect_unimodality(times, bump, noise_tol=1e-3)
        assert shape is Shape.MULTIMODAL

    def test_input_validation(self):
        with pytest.raises(UsageError, match="at least 3"):
            detect_unimodality([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(UsageError, match="strictly increasing"):
            detect_unimodality([0.0, 2.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(UsageError, match="finite"):
            detect_unimodality([0.0, 1.0, 2.0], [1.0, np.nan, 3.0])
        with pytest.raises(UsageError, match="noise_tol"):
            detect_unimodality([0.0, 1.0, 2.0], [1.0, 2.0, 3.0],
                               noise_tol=-1e-6)
        with pytest.raises(UsageError, match="matching"):
            detect_unimodality([0.0, 1.0, 2.0], [1.0, 2.0])

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(-20, 20))
    def test_classification_is_scale_invariant(self, seed, k):
        """Multiplying a curve by a positive constant changes nothing.

        Power-of-two scales keep every comparison bit-identical, so shape,
        peak, and extremum indices must match exactly.
        """
        rng = np.random.default_rng(seed)
        m = int(rng.integers(3, 40))
        times = np.cumsum(rng.uniform(0.1, 1.0, size=m))
        values = np.abs(np.cumsum(rng.normal(size=m)))
        scale = 2.0 ** k
        shape1, peak1, ext1 = detect_unimodality(times, values)
        shape2, peak2, ext2 = detect_unimodality(times, values * scale)
        assert shape1 is shape2
        assert peak1 == peak2
        assert [e.index for e in ext1] == [e.index for e in ext2]


class TestAggregateValues:
    def test_constant_transmission_is_a_weighted_sum(self):
        spec = Rank1Local(
            (ExpressionFunction("1"), ExpressionFunction("1")),
            (ExpressionFunction("2"), ExpressionFunction("3")))
        y = np.random.default_rng(3).uniform(0.0, 0.5, size=(7, 2))
        assert np.array_equal(aggregate_values(spec, y),
                              2.0 * y[:, 0] + 3.0 * y[:, 1])

    def test_saturating_transmission(self):
        spec = preset("example3").interaction
        got = aggregate_values(spec, [0.2, 0.4])
        want = 0.2 / (1 + 1.5 * 0.2) + 0.4 / (1 + 1.5 * 0.4)
        assert got == pytest.approx(want, abs=1e-15)

    def test_batched_shapes(self):
        spec = preset("example3").interaction
        y = np.random.default_rng(5).uniform(0.0, 0.4, size=(4, 5, 2))
        out = aggregate_values(spec, y)
        assert out.shape == (4, 5)

    def test_rejects_unfactored_interactions(self):
        with pytest.raises(UsageError, match="rank-1"):
            aggregate_values(preset("example2a").interaction, [0.1, 0.1])


class TestForceOfInfection:
    def test_hand_values(self):
        spec = _rank1("1 + u", "1 / (1 + 1.5*u)")
        h = force_of_infection(spec, [0.4, 0.2], [0.1, 0.3])
        rows = np.array([0.4 * 1.4, 0.2 * 1.2])
        cols = np.array([0.1 / 1.15, 0.3 / 1.45])
        assert np.allclose(h, np.outer(rows, cols), rtol=0, atol=1e-15)

    def test_row_sums_recover_the_incidence(self):
        spec = _rank1("1 + u", "1 / (1 + 1.5*u)")
        params = ModelParams(gamma=0.7, interaction=spec)
        rng = np.random.default_rng(11)
        for _ in range(10):
            x = rng.uniform(0.0, 0.6, size=2)
            y = rng.uniform(0.0, 0.4, size=2)
            h = force_of_infection(spec, x, y)
            dx, dy = vector_field(params, x, y)
            incidence = dy + 0.7 * y
            assert np.allclose(h.sum(axis=-1), incidence, rtol=0, atol=1e-12)
            assert np.allclose(h.sum(axis=-1), -dx, rtol=0, atol=1e-12)

    def test_rejects_unfactored_interactions(self):
        with pytest.raises(UsageError, match="rank-1"):
            force_of_infection(preset("example2c").interaction,
                               [0.1, 0.1], [0.1, 0.1])


class TestAggregateCurve:
    def test_scalar_epidemic_peaks_at_the_threshold_crossing(self):
        # with A = 3 and gamma = 1 the prevalence curve turns exactly
        # where susceptibility crosses 1/3
        spec = _rank1("3", "1", n=1)
        params = ModelParams(gamma=1.0, interaction=spec)
        traj = integrate(params, EpidemicState([0.99], [0.01]),
                         IntegratorOptions(t_max=60.0, max_step=0.05))
        curve = aggregate_curve(traj, spec)
        assert curve.shape is Shape.UNIMODAL
        x_at_peak = np.interp(curve.peak_time, traj.times, traj.x[:, 0])
        assert x_at_peak == pytest.approx(1.0 / 3.0, abs=1e-3)

    def test_rising_caution_preset_is_single_peaked(self):
        cfg = preset("example3")
        traj = integrate(cfg.params(), cfg.require_initial())
        curve = aggregate_curve(traj, cfg.interaction)
        assert curve.shape is Shape.UNIMODAL
        assert curve.n_maxima == 1
        assert curve.peak_time > 0.0

    def test_subcritical_saturation_preset_only_decays(self):
        cfg = preset("example5")
        traj = integrate(cfg.params(), cfg.require_initial())
        curve = aggregate_curve(traj, cfg.interaction)
        assert curve.shape is Shape.MONOTONE_DECREASING
        assert curve.peak_time == traj.times[0]

    def test_disease_free_record_is_classified_from_its_endpoints(self):
        cfg = preset("example3")
        traj = integrate(cfg.params(), EpidemicState([0.5, 0.5], [0.0, 0.0]))
        curve = aggregate_curve(traj, cfg.interaction)
        assert curve.shape is Shape.MONOTONE_DECREASING
        assert curve.extrema == ()

    def test_as_dict_round_trips_extrema(self):
        times = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        values = np.array([1.0, 3.0, 2.0, 1.0, 0.5])
        shape, peak, extrema = detect_unimodality(times, values)
        assert extrema[0].as_dict() == {
            "kind": "max", "index": 1, "time": 1.0, "value": 3.0}


class TestVerifyUnimodality:
    def test_saturating_feedback_is_always_single_peaked(self):
        spec = _rank1("1 + u", "1 / (1 + 1.5*u)")
        report = verify_unimodality(spec, gamma=1.0, trials=20, seed=42)
        assert report.all_unimodal
        assert report.counterexamples == ()
        assert report.trials == 20
        assert sum(report.shape_counts.values()) == 20
        assert set(report.shape_counts) <= {"MonotoneDecreasing", "Unimodal"}

    def test_deterministic_for_a_seed(self):
        spec = _rank1("1 + u", "1 / (1 + 1.5*u)")
        a = verify_unimodality(spec, gamma=1.0, trials=8, seed=7)
        b = verify_unimodality(spec, gamma=1.0, trials=8, seed=7)
        assert a.shape_counts == b.shape_counts

    def test_rejects_specs_outside_the_hypotheses(self):
        # the strong-fatigue kernel drives g to zero at full
        # susceptibility, violating positivity
        with pytest.raises(UsageError, match="g_positive"):
            verify_unimodality(OuterProduct(0.8, 5), gamma=1.0,
                               trials=5, seed=0)

    def test_rejects_bad_trial_counts(self):
        spec = _rank1("1 + u", "1")
        with pytest.raises(UsageError, match="trials"):
            verify_unimodality(spec, gamma=1.0, trials=0, seed=0)

    def test_report_as_dict(self):
        spec = _rank1("1 + u", "1 / (1 + 1.5*u)")
        doc = verify_unimodality(spec, gamma=1.0, trials=4, seed=1).as_dict()
        assert doc["all_unimodal"] is True
        assert doc["trials"] == 4
        assert doc["counterexamples"] == []


class TestSearchMultimodalIC:
    def test_strong_fatigue_shows_repeated_waves(self):
        report = search_multimodal_ic(OuterProduct(8.0, 5), gamma=1.0,
                                      budget=3000, seed=7)
        assert report.n_maxima >= 2
        assert report.curve.shape is Shape.MULTIMODAL
        assert is_feasible(report.best_state.x, report.best_state.y)

    def test_single_peak_dynamics_yield_no_second_wave(self):
        spec = _rank1("1 + u", "1 / (1 + 1.5*u)")
        report = search_multimodal_ic(spec, gamma=1.0, budget=60, seed=3)
        assert report.n_maxima <= 1
        assert report.budget == 60

    def test_deterministic_for_a_seed(self):
        spec = _rank1("1 + u", "1 / (1 + 1.5*u)")
        a = search_multimodal_ic(spec, gamma=1.0, budget=40, seed=9)
        b = search_multimodal_ic(spec, gamma=1.0, budget=40, seed=9)
        assert np.array_equal(a.best_state.x, b.best_state.x)
        assert np.array_equal(a.best_state.y, b.best_state.y)
        assert a.n_maxima == b.n_maxima

    def test_validation(self):
        spec = _rank1("1 + u", "1")
        with pytest.raises(UsageError, match="budget"):
            search_multimodal_ic(spec, gamma=1.0, budget=0, seed=0)
        with pytest.raises(UsageError, match="top_k"):
            search_multimodal_ic(spec, gamma=1.0, budget=5, seed=0, top_k=0)
        with pytest.raises(UsageError, match="rank-1"):
            search_multimodal_ic(preset("example2a").interaction,
                                 gamma=1.0, budget=5, seed=0)

    def test_report_as_dict_keys(self):
        spec = _rank1("1 + u", "1 / (1 + 1.5*u)")
        doc = search_multimodal_ic(spec, gamma=1.0, budget=12,
                                   seed=2).as_dict()
        assert set(doc) == {"budget", "n_maxima", "best_ic", "shape",
                            "peak_time", "extrema"}
        assert len(doc["best_ic"]["x"]) == 2


class TestCurveCsv:
    def test_format_and_round_trip(self):
        cfg = preset("example3")
        traj = integrate(cfg.params(), cfg.require_initial(),
                         IntegratorOptions(t_max=5.0))
        curve = aggregate_curve(traj, cfg.interaction)
        text = curve_to_csv(curve)
        lines = text.strip().split("\n")
        assert lines[0] == "t,ybar"
        assert len(lines) == len(curve.times) + 1
        t, v = lines[3].split(",")
        assert float(t) == curve.times[2]
        assert float(v) == curve.values[2]
