"""Outlier detection, spike flattening, and event extraction.

The hand-worked cases at the top pin the arithmetic down sample by sample;
the seeded loops then check the behavior that matters downstream, that
spikes vanish and genuine steps survive with their magnitudes intact.
"""

import numpy as np
import pytest

from eventnilm.errors import InsufficientDataError
from eventnilm.filtering import (
    REPLACEMENT_RUN_CAP,
    build_filtered_signal,
    change_ratios,
    detect_events,
    detect_outliers,
    filter_and_detect,
)

from helpers import sig


def ratio_oracle(values):
    """Direct 1 - min/max per consecutive pair, zero when both are zero."""
    out = []
    for a, b in zip(values[:-1], values[1:]):
        hi, lo = max(a, b), min(a, b)
        out.append(0.0 if hi == 0 else 1.0 - lo / hi)
    return np.array(out)


class TestChangeRatios:
    def test_matches_direct_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            vals = rng.uniform(0, 500, size=rng.integers(2, 40))
            vals[rng.uniform(size=vals.size) < 0.3] = 0.0
            assert np.allclose(change_ratios(vals), ratio_oracle(vals), atol=1e-12)

    def test_zero_pair_counts_as_no_change(self):
        m = change_ratios(np.array([0.0, 0.0, 5.0]))
        assert m[0] == 0.0
        assert m[1] == 1.0

    def test_all_ratios_in_unit_interval(self):
        rng = np.random.default_rng(8)
        vals = rng.uniform(0, 3000, size=500)
        m = change_ratios(vals)
        assert np.all(m >= 0.0) and np.all(m <= 1.0)


class TestDetectOutliers:
    def test_hand_worked_spike(self):
        # pairs: (100,100)=0 (100,500)=.8 (500,100)=.8 (100,100)=0
        s = sig([100, 100, 500, 100, 100])
        report = detect_outliers(s)
        m = report.ratios.m
        assert np.allclose(m, [0.0, 0.8, 0.8, 0.0])
        sd = float(np.std(m, ddof=1))
        assert report.ratios.threshold_sd == pytest.approx(sd)
        assert list(report.instances) == [1, 2]
        assert list(report.sample_marks) == [2, 3]

    def test_hand_worked_step(self):
        s = sig([100, 100, 500, 500, 500, 500, 500, 500, 500, 500])
        report = detect_outliers(s)
        assert list(report.instances) == [1]
        assert list(report.sample_marks) == [2]

    def test_constant_signal_has_no_outliers(self):
        report = detect_outliers(sig([42.0] * 30))
        assert report.instances.size == 0

    def test_threshold_is_strict(self):
        # two equal nonzero ratios and nothing else: sd > 0, both ratios
        # sit above it, a flat tail sits below
        s = sig([10, 10, 20, 20, 10, 10, 10, 10])
        report = detect_outliers(s)
        m = report.ratios.m
        sd = report.ratios.threshold_sd
        assert set(report.instances) == {i for i, v in enumerate(m) if v > sd}

    def test_too_short_rejected(self):
        with pytest.raises(InsufficientDataError):
            detect_outliers(sig([1.0]))


class TestBuildFilteredSignal:
    def test_spike_replaced_by_following_inliers(self):
        s = sig([100, 100, 500, 100, 100])
        filtered = build_filtered_signal(s, detect_outliers(s))
        assert list(filtered.values) == [100, 100, 100, 100, 100]

    def test_step_survives(self):
        s = sig([100, 100, 500, 500, 500, 500, 500, 500, 500, 500])
        filtered = build_filtered_signal(s, detect_outliers(s))
        assert list(filtered.values) == list(s.values)

    def test_replacement_run_is_capped(self):
        # one marked sample at a step edge, then a slow climb of inliers;
        # only the first REPLACEMENT_RUN_CAP of them may enter the mean
        values = [100.0] * 10 + [500.0] + [501.0 + i for i in range(40)]
        s = sig(values)
        report = detect_outliers(s)
        assert list(report.sample_marks) == [10]
        filtered = build_filtered_signal(s, report)
        run = values[11 : 11 + REPLACEMENT_RUN_CAP]
        assert filtered.values[10] == pytest.approx(np.mean(run))

    def test_trailing_run_uses_preceding_inliers(self):
        values = [100.0] * 10 + [900.0]
        s = sig(values)
        report = detect_outliers(s)
        assert list(report.sample_marks) == [10]
        filtered = build_filtered_signal(s, report)
        assert filtered.values[10] == pytest.approx(100.0)

    def test_never_negative(self):
        rng = np.random.default_rng(5)
        vals = np.abs(rng.normal(50, 40, size=300))
        s = sig(vals)
        filtered = build_filtered_signal(s, detect_outliers(s))
        assert np.all(filtered.values >= 0.0)


class TestDetectEvents:
    def test_step_event_fields(self):
        s = sig([100, 100, 500, 500, 500, 500, 500, 500, 500, 500])
        events = detect_events(s)
        assert len(events) == 1
        ev = events[0]
        assert ev.index == 1
        assert ev.pre_level == 100.0
        assert ev.post_level == 500.0
        assert ev.magnitude == 400.0
        assert ev.post_index == 3

    def test_two_steps(self):
        s = sig([0.0] * 20 + [1000.0] * 20 + [0.0] * 20)
        events = detect_events(s)
        assert [(e.index, e.magnitude) for e in events] == [(19, 1000.0), (39, -1000.0)]

    def test_unchanged_level_run_dropped(self):
        # an isolated spike leaves pre == post, which is not an event
        s = sig([100.0] * 10 + [900.0] + [100.0] * 10)
        events = detect_events(s)
        assert events == []

    def test_post_index_clamped_at_end(self):
        s = sig([100.0] * 10 + [900.0, 900.0])
        events = detect_events(s)
        assert len(events) == 1
        assert events[0].post_index == 11


class TestFilterAndDetect:
    def test_spikes_removed_steps_kept(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = 400
            base = np.zeros(n)
            # one genuine appliance run
            a, b = sorted(rng.integers(50, n - 50, size=2))
            if b - a < 20:
                b = a + 20
            level = rng.uniform(500, 2000)
            base[a:b] = level
            # one isolated spike well away from the step edges
            while True:
                p = int(rng.integers(20, n - 20))
                if min(abs(p - a), abs(p - b)) > 10:
                    break
            spiked = base.copy()
            spiked[p] += rng.uniform(3000, 5000)
            filtered, events = filter_and_detect(sig(spiked))
            assert filtered.values[p] == pytest.approx(base[p], abs=1e-6)
            assert [(e.index, round(e.magnitude)) for e in events] == [
                (a - 1, round(level)),
                (b - 1, -round(level)),
            ]

    def test_noisy_steps_recovered(self):
        rng = np.random.default_rng(12)
        n = 2000
        base = np.zeros(n)
        edges = [200, 700, 1200, 1700]
        base[edges[0] : edges[1]] = 1200.0
        base[edges[2] : edges[3]] = 900.0
        noisy = base * (1.0 + rng.uniform(-0.01, 0.01, size=n))
        filtered, events = filter_and_detect(sig(noisy))
        assert [e.index for e in events] == [e - 1 for e in edges]
        mags = [e.magnitude for e in events]
        assert mags[0] == pytest.approx(1200.0, rel=0.03)
        assert mags[1] == pytest.approx(-1200.0, rel=0.03)
        assert mags[2] == pytest.approx(900.0, rel=0.03)
        assert mags[3] == pytest.approx(-900.0, rel=0.03)
