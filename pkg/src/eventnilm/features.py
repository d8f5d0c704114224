"""Per-appliance features learned from training data.

Three feature families are extracted on top of the state set:

* transition intervals: the band of event magnitudes a mode change can
  produce, derived purely from the endpoint states' power envelopes;
* the participation index: how large a share of a day's events a transition
  accounts for, averaged over the days it occurs in;
* behavioral fingerprints: habits of the appliance (signature transitions,
  transitions never observed, overshoot floor, minimum off gap) used later to
  veto implausible labels.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DataConsistencyError
from .modes import OFF_MODE, State, StateSet
from .signals import EventRecord, PowerSignal


@dataclass(frozen=True)
class Transition:
    """An ordered mode change and the magnitude band it can produce."""

    from_mode: str
    to_mode: str
    low: float
    high: float

    @property
    def key(self) -> tuple[str, str]:
        return (self.from_mode, self.to_mode)

    @property
    def rising(self) -> bool:
        # intervals never straddle zero: a transition between distinct
        # states is either wholly rising or wholly falling
        return self.high > 0 or (self.high == 0 and self.low == 0)

    def contains(self, magnitude: float) -> bool:
        return self.low <= magnitude <= self.high

    def distance_to(self, magnitude: float) -> float:
        if magnitude < self.low:
            return self.low - magnitude
        if magnitude > self.high:
            return magnitude - self.high
        return 0.0

    def label(self, appliance: str) -> str:
        return f"{appliance}:{self.from_mode}->{self.to_mode}"


def transition_interval(from_state: State, to_state: State) -> tuple[float, float]:
    """Magnitude band for a jump between two power intervals.

    A rising jump from [L_min, L_max] to [H_min, H_max] can measure anything
    in [H_min - L_max, H_max - L_min]; a genuine rise cannot measure
    negative, so the band clamps at zero (and symmetrically for falls). A
    zero-width origin such as OFF = [0, 0] leaves the target state's own
    envelope as the band.
    """
    lo = to_state.low - from_state.high
    hi = to_state.high - from_state.low
    if to_state.centroid >= from_state.centroid:
        lo = max(lo, 0.0)
    else:
        hi = min(hi, 0.0)
    return (lo, hi)


def all_transitions(states: StateSet) -> list[Transition]:
    """Every ordered pair of distinct modes with its magnitude band."""
    out = []
    for a in states.states:
        for b in states.states:
            if a.mode == b.mode:
                continue
            lo, hi = transition_interval(a, b)
            out.append(Transition(a.mode, b.mode, lo, hi))
    return out


# ---------------------------------------------------------------------------
# training-event labeling


def label_training_events(
    events: list[EventRecord], states: StateSet
) -> list[tuple[EventRecord, Transition]]:
    """Assign each single-appliance training event to a mode transition.

    Pre and post levels are matched to the nearest state; self transitions
    (pre and post in the same state, small residual wobble) carry no mode
    change and are dropped.
    """
    pairs = []
    for ev in events:
        src = states.nearest(ev.pre_level)
        dst = states.nearest(ev.post_level)
        if src.mode == dst.mode:
            continue
        lo, hi = transition_interval(src, dst)
        pairs.append((ev, Transition(src.mode, dst.mode, lo, hi)))
    return pairs


DAY_SECONDS = 86400.0


def day_of(time: float, base: float, day_seconds: float = DAY_SECONDS) -> int:
    return int((time - base) // day_seconds)


def split_days(
    events: list[EventRecord],
    signal: PowerSignal,
    base: float | None = None,
    day_seconds: float = DAY_SECONDS,
):
    """Group events by the day of their sample timestamp, in time order.

    ``base`` anchors day 0; it defaults to the signal's own start but must be
    shared when aligning day indices across several signals.
    """
    if base is None:
        base = signal.start_time
    by_day: dict[int, list] = defaultdict(list)
    for ev in sorted(events, key=lambda e: e.index):
        by_day[day_of(signal.time_at(ev.index), base, day_seconds)].append(ev)
    return dict(sorted(by_day.items()))


# ---------------------------------------------------------------------------
# participation index


def participation_index(
    daily_counts: list[dict[tuple[str, str], int]],
    daily_totals: list[int],
    count_all_days: bool = False,
) -> dict[tuple[str, str], float]:
    """Average share of a day's events that each transition accounts for.

    ``daily_counts`` holds one mapping per day from transition key to the
    number of times it fired; ``daily_totals`` holds the matching day's total
    event count on the household's aggregated signal. For each transition the
    per-day share is count over total, averaged over the days the transition
    occurred in; days without it are skipped (unless ``count_all_days``,
    which averages over every day with any events instead).
    """
    if len(daily_counts) != len(daily_totals):
        raise ValueError("daily_counts and daily_totals must align day by day")
    shares: dict[tuple[str, str], list[float]] = defaultdict(list)
    active_days = 0
    for day, total in zip(daily_counts, daily_totals):
        if total == 0:
            if any(c > 0 for c in day.values()):
                raise DataConsistencyError(
                    "day has appliance transitions but zero total events"
                )
            continue
        active_days += 1
        for key, cnt in day.items():
            if cnt > 0:
                shares[key].append(cnt / total)
    if count_all_days:
        return {
            key: sum(vals) / active_days for key, vals in sorted(shares.items())
        }
    return {key: sum(vals) / len(vals) for key, vals in sorted(shares.items())}


def daily_transition_counts(
    labeled_days: list[list[Transition]],
) -> list[dict[tuple[str, str], int]]:
    return [dict(Counter(t.key for t in day)) for day in labeled_days]


# ---------------------------------------------------------------------------
# behavioral fingerprints


@dataclass(frozen=True)
class BehaviorSet:
    """Habits mined from training days, used to veto implausible labels.

    signature: all-or-none usage marker. Set when every active training day
      exercises every non-OFF mode; holds a transition seen on each such day,
      so its absence from a test day implies the appliance stayed off.
    forbidden: ordered mode pairs never observed in training.
    overshoot_min: smallest rise-event overshoot (raw local peak above the
      settled filtered level) seen in training. Recorded only when every
      rising training event overshoots by at least the floor; 0 disables.
    min_off_gap_s: shortest observed OFF dwell between ON runs, in seconds;
      0 disables the rule.
    """

    signature: Transition | None
    forbidden: tuple[tuple[str, str], ...]
    overshoot_min: float
    min_off_gap_s: float


def observed_transition_keys(labeled: list[Transition]) -> set[tuple[str, str]]:
    return {t.key for t in labeled}


def find_signature(
    daily_transitions: list[list[Transition]],
    states: StateSet,
) -> Transition | None:
    """All-or-none usage marker: a transition whose presence implies a run-day.

    The habit holds only when every active training day exercises every
    non-OFF mode (a dishwasher always runs its full program). When it holds,
    the marker is a transition observed on every active day; among those the
    rising one with the highest magnitude band wins, which tends to be the
    most distinctive against other appliances.
    """
    active = [day for day in daily_transitions if day]
    if not active:
        return None
    all_on_modes = {s.mode for s in states.non_off}
    for day in active:
        touched = {t.from_mode for t in day} | {t.to_mode for t in day}
        if not all_on_modes <= touched:
            return None
    common = set.intersection(*({t.key for t in day} for day in active))
    if not common:
        return None
    by_key = {t.key: t for day in active for t in day}
    candidates = sorted(
        (by_key[k] for k in common),
        key=lambda t: (t.rising, t.low, t.high, t.key),
    )
    return candidates[-1]


def overshoot_floor(
    raw: PowerSignal,
    filtered: PowerSignal,
    labeled: list[tuple[EventRecord, Transition]],
    floor: float = 50.0,
    window: int = 10,
) -> float:
    """Smallest consistent rise overshoot, or 0 when rises do not overshoot.

    For each rising event the raw signal's local maximum in a short window
    after the event is compared with the settled filtered level; the
    appliance exhibits the habit only if every rise overshoots by at least
    ``floor`` watts.
    """
    gaps = []
    n = len(raw)
    for ev, _tr in labeled:
        if not ev.rising:
            continue
        a = ev.post_index
        b = min(n, a + window)
        if a >= b:
            continue
        peak = float(np.max(raw.values[a:b]))
        gaps.append(peak - ev.post_level)
    if not gaps:
        return 0.0
    lowest = min(gaps)
    return lowest if lowest >= floor else 0.0


def min_off_gap(
    labeled: list[tuple[EventRecord, Transition]],
    signal: PowerSignal,
) -> float:
    """Shortest observed dwell in OFF between two ON runs, in seconds."""
    gaps = []
    enter_off_at = None
    ordered = sorted(labeled, key=lambda p: p[0].index)
    for ev, tr in ordered:
        if tr.to_mode == OFF_MODE:
            enter_off_at = signal.time_at(ev.post_index)
        elif tr.from_mode == OFF_MODE and enter_off_at is not None:
            gaps.append(signal.time_at(ev.index) - enter_off_at)
            enter_off_at = None
    return min(gaps) if gaps else 0.0


def extract_behaviors(
    raw: PowerSignal,
    filtered: PowerSignal,
    labeled: list[tuple[EventRecord, Transition]],
    states: StateSet,
    overshoot_floor_w: float = 50.0,
) -> BehaviorSet:
    """Mine the behavior fingerprints from one appliance's training signal."""
    days = split_days([ev for ev, _ in labeled], filtered)
    by_index = {ev.index: tr for ev, tr in labeled}
    daily_transitions = [
        [by_index[ev.index] for ev in evs] for evs in days.values()
    ]
    observed = {t.key for day in daily_transitions for t in day}
    forbidden = tuple(
        sorted(t.key for t in all_transitions(states) if t.key not in observed)
    )
    return BehaviorSet(
        signature=find_signature(daily_transitions, states),
        forbidden=forbidden,
        overshoot_min=overshoot_floor(raw, filtered, labeled, floor=overshoot_floor_w),
        min_off_gap_s=min_off_gap(labeled, filtered),
    )


# ---------------------------------------------------------------------------
# the trained per-appliance model


@dataclass(frozen=True)
class ApplianceModel:
    """Everything learned about one appliance from its training signal.

    ``transitions`` holds only mode changes actually observed in training;
    the pairs that never occurred live in ``behaviors.forbidden``.
    """

    appliance_id: str
    states: StateSet
    transitions: tuple[Transition, ...]
    participation: dict[tuple[str, str], float] = field(default_factory=dict)
    behaviors: BehaviorSet | None = None

    def transition_for(self, key: tuple[str, str]) -> Transition:
        for t in self.transitions:
            if t.key == key:
                return t
        raise KeyError(key)


def train_appliance(
    appliance_id: str,
    raw: PowerSignal,
    filtered: PowerSignal,
    events: list[EventRecord],
    states: StateSet,
    daily_totals: dict[int, int] | None = None,
    day_base: float | None = None,
    overshoot_floor_w: float = 50.0,
    count_all_days: bool = False,
) -> ApplianceModel:
    """Assemble the appliance model from its filtered signal and events.

    ``daily_totals`` maps day index to the aggregated household signal's
    event count that day; participation shares are fractions of those totals.
    Without it the appliance's own per-day counts stand in, which is only
    right when the appliance is alone on the meter.
    """
    labeled = label_training_events(events, states)
    if not labeled:
        raise DataConsistencyError(
            f"appliance {appliance_id!r}: no usable mode transitions in training data"
        )
    days = split_days([ev for ev, _ in labeled], filtered, base=day_base)
    by_index = {ev.index: tr for ev, tr in labeled}
    labeled_days = {
        day: [by_index[ev.index] for ev in evs] for day, evs in days.items()
    }
    if daily_totals is None:
        daily_totals = {day: len(trs) for day, trs in labeled_days.items()}
    all_days = sorted(set(daily_totals) | set(labeled_days))
    counts = daily_transition_counts([labeled_days.get(d, []) for d in all_days])
    totals = [daily_totals.get(d, 0) for d in all_days]
    participation = participation_index(counts, totals, count_all_days=count_all_days)
    behaviors = extract_behaviors(
        raw, filtered, labeled, states, overshoot_floor_w=overshoot_floor_w
    )
    observed = {}
    for _, tr in labeled:
        observed.setdefault(tr.key, tr)
    return ApplianceModel(
        appliance_id=appliance_id,
        states=states,
        transitions=tuple(observed[k] for k in sorted(observed)),
        participation=participation,
        behaviors=behaviors,
    )
