"""Event labeling on an aggregated household signal.

Each detected event gets exactly one appliance mode transition, in four
narrowing stages:

1. candidate labels by magnitude-interval containment;
2. cycle segmentation at all-OFF samples, then pruning of candidates that
   cannot take part in any walk from the all-OFF mode vector back to all-OFF;
3. behavior vetoes (all-or-none daily marker, forbidden pairs, overshoot
   habit, minimum off gap);
4. participation-index resolution of whatever ambiguity remains, with a final
   repair step that nudges choices onto a feasible walk so every refined
   cycle still closes at all-OFF.

A stage never strips a column's last remaining candidate, so a label always
comes out even for events the model explains poorly; such columns are listed
in the diagnostics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelCoverageError
from .features import ApplianceModel, Transition, day_of
from .filtering import filter_and_detect
from .modes import OFF_MODE
from .signals import EventRecord, PowerSignal

log = logging.getLogger(__name__)

OVERSHOOT_WINDOW = 10
ALL_OFF_MARGIN_W = 10.0
SEARCH_BUDGET = 1_000_000


@dataclass(frozen=True)
class LabelRow:
    """One global candidate label: an appliance plus one of its transitions."""

    appliance: str
    transition: Transition

    @property
    def key(self):
        return (self.appliance, self.transition.key)

    def label(self) -> str:
        return self.transition.label(self.appliance)


class CandidateLabelMatrix:
    """Binary rows-by-events candidate matrix with stage bookkeeping."""

    def __init__(self, rows: list[LabelRow], events: list[EventRecord]):
        self.rows = rows
        self.events = events
        self.cells = np.zeros((len(rows), len(events)), dtype=bool)

    def candidates(self, col: int) -> list[int]:
        return list(np.nonzero(self.cells[:, col])[0])

    def column_count(self, col: int) -> int:
        return int(self.cells[:, col].sum())

    def keep_only(self, col: int, keep: set[int]) -> None:
        current = self.candidates(col)
        kept = [r for r in current if r in keep]
        if not kept:
            return  # never empty a column
        self.cells[:, col] = False
        self.cells[kept, col] = True

    def assign(self, col: int, row: int) -> None:
        """Set a column to one row outright, even one not currently set.

        Closure repair picks from the pre-resolution candidate sets, which
        the resolution pass may already have cleared from the cells.
        """
        self.cells[:, col] = False
        self.cells[row, col] = True

    def drop(self, col: int, row: int) -> bool:
        """Zero one cell unless it is the column's last. True if dropped."""
        if self.cells[row, col] and self.column_count(col) > 1:
            self.cells[row, col] = False
            return True
        return False

    def resolved(self) -> list[tuple[EventRecord, LabelRow]]:
        out = []
        for col, ev in enumerate(self.events):
            rows = self.candidates(col)
            if len(rows) != 1:
                raise ValueError(f"column {col} holds {len(rows)} labels, wanted 1")
            out.append((ev, self.rows[rows[0]]))
        return out


@dataclass(frozen=True)
class Cycle:
    """A contiguous run of events between all-OFF stretches of the signal."""

    start_event: int
    end_event: int  # inclusive

    @property
    def columns(self) -> range:
        return range(self.start_event, self.end_event + 1)


@dataclass
class Diagnostics:
    """What the pipeline could not fully explain, for the run report."""

    unmatched_columns: list[int] = field(default_factory=list)
    unrefined_cycles: list[tuple[int, str]] = field(default_factory=list)
    never_all_off: bool = False
    unrepaired_cycles: list[int] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "unmatched_columns": list(self.unmatched_columns),
            "unrefined_cycles": [
                {"cycle": i, "reason": r} for i, r in self.unrefined_cycles
            ],
            "never_all_off": self.never_all_off,
            "unrepaired_cycles": list(self.unrepaired_cycles),
        }


def build_rows(models: list[ApplianceModel]) -> list[LabelRow]:
    """Global label space: every observed transition of every appliance."""
    rows = []
    for model in sorted(models, key=lambda m: m.appliance_id):
        for tr in sorted(model.transitions, key=lambda t: t.key):
            rows.append(LabelRow(model.appliance_id, tr))
    return rows


# ---------------------------------------------------------------------------
# stage 1: interval containment


def initial_labels(
    events: list[EventRecord],
    rows: list[LabelRow],
    diagnostics: Diagnostics | None = None,
) -> CandidateLabelMatrix:
    """Mark every transition whose magnitude band contains the event.

    Intervals are signed (falling transitions carry negative bands), so
    containment is direction-aware for free. A column matching nothing gets
    the nearest same-direction band; failing that the nearest band of either
    direction, compared on absolute magnitude.
    """
    if not rows:
        raise ModelCoverageError("no appliance transitions to label against")
    matrix = CandidateLabelMatrix(rows, events)
    for col, ev in enumerate(events):
        m = ev.magnitude
        hit = False
        for r, row in enumerate(rows):
            if row.transition.contains(m):
                matrix.cells[r, col] = True
                hit = True
        if hit:
            continue
        signed = [
            (row.transition.distance_to(m), row.appliance, row.transition.key, r)
            for r, row in enumerate(rows)
            if row.transition.rising == (m > 0)
        ]
        if signed:
            matrix.cells[min(signed)[3], col] = True
        else:
            agnostic = [
                (_abs_distance(row.transition, abs(m)), row.appliance, row.transition.key, r)
                for r, row in enumerate(rows)
            ]
            matrix.cells[min(agnostic)[3], col] = True
        if diagnostics is not None:
            diagnostics.unmatched_columns.append(col)
    return matrix


def _abs_distance(tr: Transition, abs_magnitude: float) -> float:
    lo, hi = sorted((abs(tr.low), abs(tr.high)))
    if abs_magnitude < lo:
        return lo - abs_magnitude
    if abs_magnitude > hi:
        return abs_magnitude - hi
    return 0.0


# ---------------------------------------------------------------------------
# stage 2: cycles and walk compatibility


def all_off_threshold(models: list[ApplianceModel], margin: float = ALL_OFF_MARGIN_W) -> float:
    """Aggregate level under which every appliance can be assumed OFF."""
    return sum(m.states.off_state.high for m in models) + margin


def segment_cycles(
    filtered: PowerSignal,
    events: list[EventRecord],
    threshold: float,
    diagnostics: Diagnostics | None = None,
) -> list[Cycle]:
    """Split events into cycles separated by all-OFF stretches.

    Two consecutive events belong to different cycles iff some sample
    between them (from the first event's settled sample to the second's last
    pre-event sample) sits below the all-OFF threshold.
    """
    if not events:
        return []
    off = filtered.values < threshold
    off_prefix = np.concatenate(([0], np.cumsum(off)))

    def any_off(a: int, b: int) -> bool:
        # inclusive sample range [a, b]
        return a <= b and off_prefix[b + 1] - off_prefix[a] > 0

    cycles = []
    start = 0
    for i in range(len(events) - 1):
        if any_off(events[i].post_index, events[i + 1].index):
            cycles.append(Cycle(start, i))
            start = i + 1
    cycles.append(Cycle(start, len(events) - 1))
    if not off.any():
        log.warning("signal never reaches all-OFF; treating it as one cycle")
        if diagnostics is not None:
            diagnostics.never_all_off = True
    return cycles


class _WalkSpace:
    """Mode-vector bookkeeping shared by the walk searches."""

    def __init__(self, models: list[ApplianceModel]):
        self.apps = sorted(m.appliance_id for m in models)
        self.index = {a: i for i, a in enumerate(self.apps)}
        self.forbidden = {
            m.appliance_id: set(m.behaviors.forbidden) if m.behaviors else set()
            for m in models
        }
        self.all_off = tuple(OFF_MODE for _ in self.apps)

    def applicable(self, theta: tuple, row: LabelRow) -> bool:
        if row.transition.key in self.forbidden[row.appliance]:
            return False
        return theta[self.index[row.appliance]] == row.transition.from_mode

    def apply(self, theta: tuple, row: LabelRow) -> tuple:
        i = self.index[row.appliance]
        return theta[:i] + (row.transition.to_mode,) + theta[i + 1 :]


class _BudgetExceeded(Exception):
    pass


def _walk_layers(space, matrix, cols, budget):
    """Forward-reachable mode-vector sets F(i) for one cycle's columns.

    F(i) holds the vectors reachable from all-OFF after events 0..i-1;
    every (theta, row) expansion costs one unit of budget.
    """
    spent = 0
    layers = [{space.all_off}]
    for col in cols:
        rows = matrix.candidates(col)
        nxt = set()
        for theta in layers[-1]:
            for r in rows:
                spent += 1
                if spent > budget:
                    raise _BudgetExceeded
                row = matrix.rows[r]
                if space.applicable(theta, row):
                    nxt.add(space.apply(theta, row))
        layers.append(nxt)
    return layers, spent


def refine_by_compatibility(
    matrix: CandidateLabelMatrix,
    cycles: list[Cycle],
    models: list[ApplianceModel],
    budget: int = SEARCH_BUDGET,
    diagnostics: Diagnostics | None = None,
) -> CandidateLabelMatrix:
    """Keep a candidate iff some full assignment of its cycle uses it.

    A full assignment picks one candidate per event such that the transition
    sequence is a walk from the all-OFF mode vector back to all-OFF, each
    step applicable in its predecessor state. Kept sets are computed exactly
    with forward and backward reachability layers; a cycle whose search
    exceeds the node budget, or that admits no walk at all, is left as-is and
    reported in the diagnostics.
    """
    space = _WalkSpace(models)
    for ci, cycle in enumerate(cycles):
        cols = list(cycle.columns)
        try:
            forward, spent = _walk_layers(space, matrix, cols, budget)
        except _BudgetExceeded:
            _flag(diagnostics, ci, "search budget exhausted")
            continue
        if space.all_off not in forward[-1]:
            _flag(diagnostics, ci, "no compatible assignment")
            continue

        # backward sets B(i): vectors from which events i.. can finish at all-OFF
        back = [set() for _ in range(len(cols) + 1)]
        back[-1] = {space.all_off}
        exceeded = False
        for i in range(len(cols) - 1, -1, -1):
            rows = matrix.candidates(cols[i])
            # candidate predecessors are exactly the forward-reachable vectors
            for theta in forward[i]:
                for r in rows:
                    spent += 1
                    if spent > budget:
                        exceeded = True
                        break
                    row = matrix.rows[r]
                    if space.applicable(theta, row) and space.apply(theta, row) in back[i + 1]:
                        back[i].add(theta)
                        break
                if exceeded:
                    break
            if exceeded:
                break
        if exceeded:
            _flag(diagnostics, ci, "search budget exhausted")
            continue

        for i, col in enumerate(cols):
            keep = set()
            for r in matrix.candidates(col):
                row = matrix.rows[r]
                for theta in forward[i]:
                    if space.applicable(theta, row) and space.apply(theta, row) in back[i + 1]:
                        keep.add(r)
                        break
            matrix.keep_only(col, keep)
    return matrix


def _flag(diagnostics, cycle_index, reason):
    log.warning("cycle %d left unrefined: %s", cycle_index, reason)
    if diagnostics is not None:
        diagnostics.unrefined_cycles.append((cycle_index, reason))


# ---------------------------------------------------------------------------
# stage 3: behavior vetoes


def _event_day(ev, signal, base):
    return day_of(signal.time_at(ev.index), base)


def _overshoot_height(raw: PowerSignal, ev: EventRecord, window: int = OVERSHOOT_WINDOW) -> float:
    a = ev.post_index
    b = min(len(raw), a + window)
    if a >= b:
        return 0.0
    return float(np.max(raw.values[a:b])) - ev.post_level


def refine_by_behaviors(
    matrix: CandidateLabelMatrix,
    models: list[ApplianceModel],
    raw: PowerSignal,
    filtered: PowerSignal,
    day_base: float | None = None,
) -> CandidateLabelMatrix:
    """Veto candidates that contradict appliance habits, in rule order.

    (a) all-or-none daily marker: a day with no event inside the marker's
        band cannot involve the appliance at all;
    (b) forbidden pairs (already excluded from the label space; re-checked);
    (c) overshoot habit, rising events only: too small a raw overshoot rules
        out an always-overshooting appliance, and an overshoot matching such
        an appliance rules out habit-free rivals;
    (d) minimum off gap: an OFF-to-ON candidate too soon after the
        appliance's last single-labeled OFF is dropped.
    No rule removes a column's last candidate.
    """
    if day_base is None:
        day_base = filtered.start_time
    by_app = {m.appliance_id: m for m in models}
    days = sorted({_event_day(ev, filtered, day_base) for ev in matrix.events})
    cols_by_day = {
        d: [c for c, ev in enumerate(matrix.events) if _event_day(ev, filtered, day_base) == d]
        for d in days
    }

    # (a) all-or-none daily marker
    for model in sorted(models, key=lambda m: m.appliance_id):
        beh = model.behaviors
        if beh is None or beh.signature is None:
            continue
        sig = beh.signature
        app_rows = [
            r for r, row in enumerate(matrix.rows) if row.appliance == model.appliance_id
        ]
        for d in days:
            cols = cols_by_day[d]
            if any(sig.contains(matrix.events[c].magnitude) for c in cols):
                continue
            for c in cols:
                for r in app_rows:
                    matrix.drop(c, r)

    # (b) forbidden pairs, re-checked against the model
    for r, row in enumerate(matrix.rows):
        beh = by_app[row.appliance].behaviors
        if beh and row.transition.key in beh.forbidden:
            for c in range(len(matrix.events)):
                matrix.drop(c, r)

    # (c) overshoot habit on rising multi-labeled events
    overshoot_of = {
        m.appliance_id: (m.behaviors.overshoot_min if m.behaviors else 0.0)
        for m in models
    }
    for c, ev in enumerate(matrix.events):
        if not ev.rising or matrix.column_count(c) < 2:
            continue
        height = _overshoot_height(raw, ev)
        cand = matrix.candidates(c)
        for r in cand:
            need = overshoot_of[matrix.rows[r].appliance]
            if need > 0.0 and height < need:
                matrix.drop(c, r)
        cand = matrix.candidates(c)
        habit_matched = any(
            0.0 < overshoot_of[matrix.rows[r].appliance] <= height for r in cand
        )
        if habit_matched:
            for r in cand:
                if overshoot_of[matrix.rows[r].appliance] == 0.0:
                    matrix.drop(c, r)

    # (d) minimum off gap, inferred from single-labeled events only
    last_off: dict[str, float] = {}
    for c, ev in enumerate(matrix.events):
        t = filtered.time_at(ev.index)
        for r in matrix.candidates(c):
            row = matrix.rows[r]
            beh = by_app[row.appliance].behaviors
            if beh is None or beh.min_off_gap_s <= 0.0:
                continue
            if row.transition.from_mode != OFF_MODE:
                continue
            seen = last_off.get(row.appliance)
            if seen is not None and t - seen < beh.min_off_gap_s:
                matrix.drop(c, r)
        rows = matrix.candidates(c)
        if len(rows) == 1:
            row = matrix.rows[rows[0]]
            if row.transition.to_mode == OFF_MODE:
                last_off[row.appliance] = filtered.time_at(ev.post_index)
    return matrix


# ---------------------------------------------------------------------------
# stage 4: participation resolution


def _overlap_groups(matrix: CandidateLabelMatrix, cols: list[int]) -> list[list[int]]:
    """Connected components of ambiguous columns sharing candidate rows.

    Two ambiguous events compete in the same group when their candidate sets
    intersect (their magnitude bands overlap); union-find over columns.
    """
    ambiguous = [c for c in cols if matrix.column_count(c) > 1]
    parent = {c: c for c in ambiguous}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    by_row: dict[int, int] = {}
    for c in ambiguous:
        for r in matrix.candidates(c):
            if r in by_row:
                ra, rb = find(by_row[r]), find(c)
                if ra != rb:
                    parent[rb] = ra
            else:
                by_row[r] = c
    groups: dict[int, list[int]] = {}
    for c in ambiguous:
        groups.setdefault(find(c), []).append(c)
    return [sorted(g) for _, g in sorted(groups.items())]


def resolve_by_participation(
    matrix: CandidateLabelMatrix,
    models: list[ApplianceModel],
    filtered: PowerSignal,
    day_base: float | None = None,
) -> CandidateLabelMatrix:
    """Pick the candidate whose trained daily share the day best supports.

    Per day and per overlap group, each candidate transition's observed
    participation index is computed as if every ambiguous event of the group
    went to it (plus its already-single-labeled events); each column then
    keeps the candidate minimizing |observed - trained|. Ties prefer the
    larger trained index, then the lexicographically smaller appliance id.
    """
    if day_base is None:
        day_base = filtered.start_time
    trained = {
        (m.appliance_id, key): p
        for m in models
        for key, p in m.participation.items()
    }
    days: dict[int, list[int]] = {}
    for c, ev in enumerate(matrix.events):
        days.setdefault(_event_day(ev, filtered, day_base), []).append(c)

    for d in sorted(days):
        cols = days[d]
        total = len(cols)
        singles: dict[int, int] = {}
        for c in cols:
            rows = matrix.candidates(c)
            if len(rows) == 1:
                singles[rows[0]] = singles.get(rows[0], 0) + 1
        for group in _overlap_groups(matrix, cols):
            tentative: dict[int, int] = {}
            for c in group:
                for r in matrix.candidates(c):
                    tentative.setdefault(r, 0)
                    tentative[r] += 1
            observed = {
                r: (singles.get(r, 0) + n) / total for r, n in tentative.items()
            }
            for c in group:
                scored = []
                for r in matrix.candidates(c):
                    row = matrix.rows[r]
                    p = trained.get((row.appliance, row.transition.key), 0.0)
                    scored.append((abs(observed[r] - p), -p, row.appliance, row.transition.key, r))
                best = min(scored)[4]
                matrix.keep_only(c, {best})

    # any still-multi column (no participation data at all) resolves by the
    # same total order on (trained index, appliance, transition)
    for c in range(len(matrix.events)):
        rows = matrix.candidates(c)
        if len(rows) > 1:
            scored = [
                (
                    -trained.get((matrix.rows[r].appliance, matrix.rows[r].transition.key), 0.0),
                    matrix.rows[r].appliance,
                    matrix.rows[r].transition.key,
                    r,
                )
                for r in rows
            ]
            matrix.keep_only(c, {min(scored)[3]})
    return matrix


# ---------------------------------------------------------------------------
# closure repair


def enforce_cycle_closure(
    matrix: CandidateLabelMatrix,
    cycles: list[Cycle],
    models: list[ApplianceModel],
    pre_step4: list[list[int]],
    refined: set[int],
    budget: int = SEARCH_BUDGET,
    diagnostics: Diagnostics | None = None,
) -> CandidateLabelMatrix:
    """Nudge resolved labels onto a feasible walk, changing as few as possible.

    Participation picks each column independently, which can break the walk
    property stage 2 guaranteed was attainable. For every cycle stage 2
    refined, if the chosen labels do not replay from all-OFF to all-OFF, the
    valid assignment disagreeing with the fewest choices replaces them
    (candidates drawn from the pre-resolution label sets).
    """
    space = _WalkSpace(models)
    for ci, cycle in enumerate(cycles):
        if ci not in refined:
            continue
        cols = list(cycle.columns)
        chosen = [matrix.candidates(c)[0] for c in cols]
        theta = space.all_off
        ok = True
        for i, c in enumerate(cols):
            row = matrix.rows[chosen[i]]
            if not space.applicable(theta, row):
                ok = False
                break
            theta = space.apply(theta, row)
        if ok and theta == space.all_off:
            continue

        # min-disagreement walk over the pre-resolution candidate sets
        spent = 0
        frontier = {space.all_off: (0, None, None)}  # theta -> (cost, parent theta, row)
        layers = [frontier]
        feasible = True
        for i, c in enumerate(cols):
            nxt: dict = {}
            for th, (cost, _, _) in layers[-1].items():
                for r in pre_step4[c]:
                    spent += 1
                    if spent > budget:
                        feasible = False
                        break
                    row = matrix.rows[r]
                    if not space.applicable(th, row):
                        continue
                    th2 = space.apply(th, row)
                    c2 = cost + (0 if r == chosen[i] else 1)
                    prev = nxt.get(th2)
                    if prev is None or (c2, r) < (prev[0], prev[2]):
                        nxt[th2] = (c2, th, r)
                if not feasible:
                    break
            if not feasible or not nxt:
                feasible = False
                break
            layers.append(nxt)
        if not feasible or space.all_off not in layers[-1]:
            if diagnostics is not None:
                diagnostics.unrepaired_cycles.append(ci)
            log.warning("cycle %d: resolved labels do not close; left as chosen", ci)
            continue
        path = []
        th = space.all_off
        for i in range(len(cols), 0, -1):
            _, parent, r = layers[i][th]
            path.append(r)
            th = parent
        path.reverse()
        for c, r in zip(cols, path):
            matrix.assign(c, r)
    return matrix


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass(frozen=True)
class LabeledEvent:
    event: EventRecord
    appliance: str
    transition: Transition
    stage: str = "containment"  # which stage pinned the label down

    def label(self) -> str:
        return self.transition.label(self.appliance)


def classify(
    aggregate: PowerSignal,
    models: list[ApplianceModel],
    all_off_margin: float = ALL_OFF_MARGIN_W,
    budget: int = SEARCH_BUDGET,
    day_base: float | None = None,
) -> tuple[list[LabeledEvent], Diagnostics]:
    """Label every event of the aggregate signal with one mode transition."""
    diagnostics = Diagnostics()
    filtered, events = filter_and_detect(aggregate)
    if not events:
        return [], diagnostics
    rows = build_rows(models)
    matrix = initial_labels(events, rows, diagnostics)
    threshold = all_off_threshold(models, all_off_margin)
    cycles = segment_cycles(filtered, events, threshold, diagnostics)

    n = len(events)
    after_containment = [matrix.column_count(c) for c in range(n)]
    matrix = refine_by_compatibility(matrix, cycles, models, budget, diagnostics)
    after_compat = [matrix.column_count(c) for c in range(n)]
    unrefined = {i for i, _ in diagnostics.unrefined_cycles}
    refined = {i for i in range(len(cycles)) if i not in unrefined}
    matrix = refine_by_behaviors(matrix, models, aggregate, filtered, day_base)
    after_behavior = [matrix.column_count(c) for c in range(n)]
    pre_step4 = [matrix.candidates(c) for c in range(n)]
    matrix = resolve_by_participation(matrix, models, filtered, day_base)
    after_resolve = [matrix.candidates(c)[0] for c in range(n)]
    matrix = enforce_cycle_closure(
        matrix, cycles, models, pre_step4, refined, budget, diagnostics
    )

    out = []
    for col, (ev, row) in enumerate(matrix.resolved()):
        if after_containment[col] == 1:
            stage = "containment"
        elif after_compat[col] == 1:
            stage = "compatibility"
        elif after_behavior[col] == 1:
            stage = "behavior"
        elif after_resolve[col] == matrix.candidates(col)[0]:
            stage = "participation"
        else:
            stage = "closure"
        out.append(LabeledEvent(ev, row.appliance, row.transition, stage))
    return out, diagnostics
