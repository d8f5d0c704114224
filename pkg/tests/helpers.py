"""Small builders shared across test modules."""

from __future__ import annotations

import numpy as np

from eventnilm.signals import PowerSignal


def sig(values, start=0.0, period=1.0, source="test"):
    return PowerSignal(
        values=np.asarray(values, dtype=np.float64),
        start_time=start,
        sample_period=period,
        source_id=source,
    )


def cut(signal: PowerSignal, lo: int, hi: int) -> PowerSignal:
    """Slice a signal by sample index, keeping the grid consistent."""
    return PowerSignal(
        values=signal.values[lo:hi].copy(),
        start_time=signal.start_time + lo * signal.sample_period,
        sample_period=signal.sample_period,
        source_id=signal.source_id,
    )


def split_train_test(result, train_days):
    """Split a generated household at a day boundary.

    Returns (train appliances, train aggregate, test appliances,
    test aggregate, split sample index).
    """
    spd = int(round(86400.0 / result.period))
    split = train_days * spd
    n = len(result.aggregate)
    train_apps = {a: cut(s, 0, split) for a, s in result.appliances.items()}
    test_apps = {a: cut(s, split, n) for a, s in result.appliances.items()}
    return (
        train_apps,
        cut(result.aggregate, 0, split),
        test_apps,
        cut(result.aggregate, split, n),
        split,
    )


def state(mode, lo, hi):
    from eventnilm.modes import State

    return State(mode, low=float(lo), high=float(hi), centroid=(lo + hi) / 2.0)


def ev(index, pre, post, post_index=None):
    from eventnilm.signals import EventRecord

    return EventRecord(
        index=index,
        magnitude=float(post - pre),
        pre_level=float(pre),
        post_level=float(post),
        post_index=index + 2 if post_index is None else post_index,
    )


def two_mode_model(
    app,
    lo,
    hi,
    participation=None,
    forbidden=(),
    signature=None,
    overshoot_min=0.0,
    min_off_gap_s=0.0,
):
    """An appliance with one running mode whose band is [lo, hi] watts."""
    from eventnilm.features import ApplianceModel, BehaviorSet, Transition
    from eventnilm.modes import OFF_MODE, State, StateSet

    states = StateSet(
        states=(State(OFF_MODE, 0.0, 0.0, 0.0), state("on1", lo, hi))
    )
    rise = Transition(OFF_MODE, "on1", float(lo), float(hi))
    fall = Transition("on1", OFF_MODE, -float(hi), -float(lo))
    behaviors = BehaviorSet(
        signature=signature,
        forbidden=tuple(forbidden),
        overshoot_min=overshoot_min,
        min_off_gap_s=min_off_gap_s,
    )
    return ApplianceModel(
        appliance_id=app,
        states=states,
        transitions=(rise, fall),
        participation=dict(participation or {}),
        behaviors=behaviors,
    )


def enumerate_surviving(matrix, cycle, models):
    """Brute force over all full assignments; exact but exponential."""
    import itertools

    from eventnilm.modes import OFF_MODE

    apps = sorted(m.appliance_id for m in models)
    forbidden = {
        m.appliance_id: set(m.behaviors.forbidden) if m.behaviors else set()
        for m in models
    }
    cols = list(cycle.columns)
    kept = [set() for _ in cols]
    for assignment in itertools.product(*(matrix.candidates(c) for c in cols)):
        modes = {a: OFF_MODE for a in apps}
        ok = True
        for r in assignment:
            row = matrix.rows[r]
            if row.transition.key in forbidden[row.appliance]:
                ok = False
                break
            if modes[row.appliance] != row.transition.from_mode:
                ok = False
                break
            modes[row.appliance] = row.transition.to_mode
        if ok and all(m == OFF_MODE for m in modes.values()):
            for i, r in enumerate(assignment):
                kept[i].add(r)
    return kept


def random_instance(rng):
    """A household of overlapping two-mode appliances plus a valid walk."""
    n_apps = int(rng.integers(1, 4))
    bases = [500.0, 540.0, 1000.0][:n_apps]
    models = [
        two_mode_model(f"app{i}", base - 60.0, base + 60.0)
        for i, base in enumerate(bases)
    ]
    events = []
    on = set()
    level = 0.0
    idx = 0
    while len(events) < 6:
        choices = []
        if len(on) < n_apps:
            choices.append("rise")
        if on:
            choices.append("fall")
        move = choices[int(rng.integers(0, len(choices)))]
        if move == "rise":
            i = int(rng.choice(sorted(set(range(n_apps)) - on)))
            mag = float(rng.uniform(bases[i] - 60.0, bases[i] + 60.0))
            on.add(i)
        else:
            i = int(rng.choice(sorted(on)))
            mag = -float(rng.uniform(bases[i] - 60.0, bases[i] + 60.0))
            on.discard(i)
        events.append(ev(idx, level, max(0.0, level + mag)))
        level = max(0.0, level + mag)
        idx += 10
        if not on and len(events) >= 2 and rng.uniform() < 0.5:
            break
    # close any dangling runs
    for i in sorted(on):
        mag = float(rng.uniform(bases[i] - 60.0, bases[i] + 60.0))
        events.append(ev(idx, level, max(0.0, level - mag)))
        level = max(0.0, level - mag)
        idx += 10
    return models, events
