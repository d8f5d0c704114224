"""Statistics-based signal filtering and event detection.

An event is treated as an *uncommon* change rather than a *large* one: the
1 - min/max ratio of every consecutive sample pair is collected, and ratios
exceeding the standard deviation of the whole ratio series are outliers.
Outlier samples are flattened against the following inlier run, which removes
spikes and transition overshoots while leaving genuine steps intact; a second
outlier pass over the flattened signal then yields the events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .signals import EventRecord, PowerSignal

# Replacement means never average more than this many following inliers.
REPLACEMENT_RUN_CAP = 10


@dataclass(frozen=True)
class RatioSeries:
    """Consecutive-pair change ratios and their dispersion threshold.

    ``m[t] = 1 - min(P[t], P[t+1]) / max(P[t], P[t+1])`` for t = 0..T-2, with
    m[t] = 0 when both samples are zero. Every entry lies in [0, 1].
    """

    m: np.ndarray
    threshold_sd: float


@dataclass(frozen=True)
class OutlierReport:
    """Outlier instances (ratio indices) and the sample indices they mark.

    Instance ``t`` flags the pair (t, t+1); the changed sample is t+1, so
    ``sample_marks = {t + 1 for t in instances}``.
    """

    instances: np.ndarray
    sample_marks: np.ndarray
    ratios: RatioSeries


def change_ratios(values: np.ndarray) -> np.ndarray:
    """1 - min/max for each consecutive pair, with 0/0 counted as no change."""
    a, b = values[:-1], values[1:]
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = 1.0 - lo / hi
    m[hi == 0] = 0.0
    return m


def detect_outliers(signal: PowerSignal) -> OutlierReport:
    """Flag the uncommonly large consecutive-pair change ratios.

    The threshold is the sample (n-1) standard deviation of the full ratio
    series; an instance is an outlier iff its ratio strictly exceeds it, so a
    constant signal (sd = 0, all ratios 0) yields no outliers.
    """
    if len(signal) < 2:
        raise InsufficientDataError(
            f"outlier detection needs at least 2 samples, got {len(signal)}"
        )
    m = change_ratios(signal.values)
    sd = float(np.std(m, ddof=1)) if m.size > 1 else 0.0
    instances = np.nonzero(m > sd)[0]
    return OutlierReport(
        instances=instances,
        sample_marks=instances + 1,
        ratios=RatioSeries(m=m, threshold_sd=sd),
    )


def _runs(indices: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of consecutive integers as inclusive (first, last) pairs."""
    if indices.size == 0:
        return []
    breaks = np.nonzero(np.diff(indices) > 1)[0]
    starts = np.concatenate(([0], breaks + 1))
    stops = np.concatenate((breaks, [indices.size - 1]))
    return [(int(indices[a]), int(indices[b])) for a, b in zip(starts, stops)]


def build_filtered_signal(signal: PowerSignal, report: OutlierReport) -> PowerSignal:
    """Flatten spikes and overshoots; keep genuine steps.

    Each maximal run of marked samples is replaced by the mean of the inlier
    run that follows it (capped at ``REPLACEMENT_RUN_CAP`` samples). A marked
    run ending the signal falls back to the preceding inlier run. Steps
    survive because the following inliers already sit at the new level.
    """
    values = signal.values.copy()
    n = values.size
    marked = np.zeros(n, dtype=bool)
    marked[report.sample_marks] = True
    for first, last in _runs(report.sample_marks):
        if last + 1 < n:
            stop = last + 1
            while stop < n and not marked[stop] and stop - (last + 1) < REPLACEMENT_RUN_CAP:
                stop += 1
            replacement = values[last + 1 : stop].mean()
        else:
            # run ends the signal: average the inliers just before it
            start = first - 1
            while start > 0 and not marked[start - 1] and first - start < REPLACEMENT_RUN_CAP:
                start -= 1
            replacement = signal.values[start:first].mean()
        values[first : last + 1] = replacement
    return PowerSignal(
        np.maximum(values, 0.0),
        start_time=signal.start_time,
        sample_period=signal.sample_period,
        source_id=signal.source_id,
    )


def detect_events(filtered: PowerSignal) -> list[EventRecord]:
    """One outlier pass over a filtered signal; outlier runs become events.

    A maximal run of consecutive outlier instances is one mode transition:
    its pre level is read one sample before the marked run and its post level
    one sample after (the run's own samples may straddle the edge). Runs whose
    levels end up equal are dropped, since an event must change the value.
    """
    report = detect_outliers(filtered)
    values = filtered.values
    n = values.size
    events = []
    for first, last in _runs(report.instances):
        pre_idx = first  # instance t flags pair (t, t+1): sample t is pre-event
        post_idx = min(last + 2, n - 1)
        pre = float(values[pre_idx])
        post = float(values[post_idx])
        if post == pre:
            continue
        events.append(
            EventRecord(
                index=pre_idx,
                magnitude=post - pre,
                pre_level=pre,
                post_level=post,
                post_index=post_idx,
            )
        )
    return events


def filter_and_detect(signal: PowerSignal) -> tuple[PowerSignal, list[EventRecord]]:
    """Outlier detection, filtered-signal construction, event detection, in order."""
    report = detect_outliers(signal)
    filtered = build_filtered_signal(signal, report)
    return filtered, detect_events(filtered)
