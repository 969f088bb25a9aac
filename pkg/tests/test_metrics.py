"""Signal norms and bookkeeping metrics."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusionguard.metrics import (
    SignalTrace,
    bound_violation_report,
    confusion_stats,
    lp_norm,
    string_stability_check,
)


def trace_of(values, dt=0.1, label=""):
    values = np.asarray(values, dtype=float)
    return SignalTrace(np.arange(values.size) * dt, values, label=label)


class TestSignalTrace:
    def test_dt(self):
        assert trace_of([0.0, 1.0, 2.0], dt=0.25).dt == 0.25

    def test_rejects_nonuniform_grid(self):
        with pytest.raises(ValueError, match="uniform"):
            SignalTrace(np.array([0.0, 0.1, 0.3]), np.zeros(3))

    def test_rejects_decreasing_or_short(self):
        with pytest.raises(ValueError, match="increasing"):
            SignalTrace(np.array([0.0, -0.1, -0.2]), np.zeros(3))
        with pytest.raises(ValueError):
            SignalTrace(np.array([0.0]), np.array([1.0]))
        with pytest.raises(ValueError):
            SignalTrace(np.arange(3.0), np.zeros(4))


class TestLpNorm:
    def test_unit_constant_on_unit_interval(self):
        tr = trace_of(np.ones(11), dt=0.1)
        assert lp_norm(tr, 1) == 1.0
        assert lp_norm(tr, 2) == 1.0
        assert lp_norm(tr, math.inf) == 1.0

    def test_left_endpoint_rule_ignores_last_sample(self):
        values = np.zeros(11)
        values[-1] = 100.0
        assert lp_norm(trace_of(values), 2) == 0.0
        assert lp_norm(trace_of(values), math.inf) == 100.0

    def test_sine_l2_matches_closed_form(self):
        times = np.linspace(0.0, 2.0 * math.pi, 20001)
        tr = SignalTrace(times, np.sin(times))
        assert lp_norm(tr, 2) == pytest.approx(math.sqrt(math.pi), abs=1e-3)

    def test_string_inf_accepted(self):
        tr = trace_of([1.0, -3.0, 2.0])
        assert lp_norm(tr, "inf") == 3.0

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError):
            lp_norm(trace_of([1.0, 2.0]), 0.5)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
           st.sampled_from([0.5, 2.0, 8.0]))
    def test_homogeneity_exact_for_power_of_two_scales(self, values, alpha):
        tr = trace_of(values)
        scaled = trace_of([alpha * v for v in values])
        assert lp_norm(scaled, math.inf) == alpha * lp_norm(tr, math.inf)
        assert lp_norm(scaled, 2) == pytest.approx(alpha * lp_norm(tr, 2), rel=1e-12)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
           st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
    @settings(max_examples=100)
    def test_triangle_inequality(self, a, b):
        n = min(len(a), len(b))
        ta, tb = trace_of(a[:n]), trace_of(b[:n])
        tsum = trace_of([x + y for x, y in zip(a[:n], b[:n])])
        for p in (1, 2, math.inf):
            assert lp_norm(tsum, p) <= lp_norm(ta, p) + lp_norm(tb, p) + 1e-9


class TestStringStability:
    def test_attenuating_string_passes(self):
        times = np.linspace(0.0, 10.0, 1001)
        traces = [SignalTrace(times, gain * np.sin(times), label=f"v{i}")
                  for i, gain in enumerate((1.0, 0.8, 0.5))]
        verdicts = string_stability_check(traces)
        assert all(v.passed for v in verdicts)
        assert verdicts[0].ratio == pytest.approx(0.8, rel=1e-9)
        assert verdicts[0].upstream_label == "v0"
        assert verdicts[0].downstream_label == "v1"

    def test_amplifying_pair_fails(self):
        times = np.linspace(0.0, 10.0, 1001)
        up = SignalTrace(times, np.sin(times))
        down = SignalTrace(times, 1.2 * np.sin(times))
        verdicts = string_stability_check([up, down])
        assert not verdicts[0].passed

    def test_tolerance_allows_slight_growth(self):
        times = np.linspace(0.0, 10.0, 1001)
        up = SignalTrace(times, np.sin(times))
        down = SignalTrace(times, 1.005 * np.sin(times))
        assert not string_stability_check([up, down])[0].passed
        assert string_stability_check([up, down], tolerance=0.01)[0].passed

    def test_zero_upstream_zero_downstream_passes(self):
        times = np.linspace(0.0, 1.0, 11)
        z = SignalTrace(times, np.zeros(11))
        verdict = string_stability_check([z, z])[0]
        assert verdict.passed and verdict.ratio == 1.0

    def test_nonzero_start_warns(self):
        times = np.linspace(0.0, 1.0, 11)
        bad = SignalTrace(times, np.ones(11), label="hot")
        ok = SignalTrace(times, np.zeros(11))
        with pytest.warns(UserWarning, match="hot"):
            string_stability_check([bad, ok])

    def test_needs_two_traces(self):
        times = np.linspace(0.0, 1.0, 11)
        with pytest.raises(ValueError):
            string_stability_check([SignalTrace(times, np.zeros(11))])


class TestBoundReport:
    def test_counts_and_argmax(self):
        tr = trace_of([0.1, -0.95, 0.2, 1.5, -0.3], dt=0.5)
        report = bound_violation_report(tr, noise_sup=0.3)
        assert report.bound == pytest.approx(0.9)
        assert report.n_samples == 5
        assert report.violation_count == 2
        assert report.max_abs_error == 1.5
        assert report.time_of_max == pytest.approx(1.5)

    def test_clean_trace(self):
        report = bound_violation_report(trace_of([0.0, 0.1, -0.1]), noise_sup=0.2)
        assert report.violation_count == 0


class TestConfusionStats:
    def test_hand_case(self):
        predicted = [(3,), (), (1, 3)]
        truth = [(3,), (2,), (3,)]
        stats = confusion_stats(predicted, truth, n_sensors=3)
        assert (stats.true_positives, stats.false_positives) == (2, 1)
        assert (stats.false_negatives, stats.true_negatives) == (1, 5)
        assert stats.precision == pytest.approx(2 / 3)
        assert stats.recall == pytest.approx(2 / 3)

    def test_empty_runs_give_nan_rates(self):
        stats = confusion_stats([()], [()], n_sensors=2)
        assert math.isnan(stats.precision) and math.isnan(stats.recall)
        assert stats.true_negatives == 2

    def test_validation(self):
        with pytest.raises(ValueError, match="equal length"):
            confusion_stats([()], [(), ()], n_sensors=2)
        with pytest.raises(ValueError, match="out of range"):
            confusion_stats([(5,)], [()], n_sensors=3)
