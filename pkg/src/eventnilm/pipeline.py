"""End-to-end orchestration: train, disaggregate, evaluate, plot data.

Glues the library stages together on dataset bundles and writes the text
artifacts the command-line tool exposes. Everything here is deterministic:
sorted appliance order, stable float formatting, atomic writes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .classifier import Cycle, Diagnostics, LabeledEvent, classify
from .config import RunConfig
from .errors import DataConsistencyError, ParseError
from .evaluation import (
    ConfusionCounts,
    LabelPoint,
    f_measure,
    macro_average_f,
    match_events,
    precision_recall,
)
from .features import ApplianceModel, label_training_events, day_of, train_appliance
from .filtering import filter_and_detect
from .model_io import atomic_write_text, format_number
from .modes import OFF_MODE, State, StateSet, extract_states
from .signals import EventRecord, PowerSignal


@dataclass
class TrainResult:
    models: list[ApplianceModel]
    notes: list[str] = field(default_factory=list)


def _off_only_model(name: str, filtered: PowerSignal) -> ApplianceModel:
    vals = filtered.values
    states = StateSet(
        states=(
            State(
                OFF_MODE,
                low=float(vals.min()),
                high=float(vals.max()),
                centroid=float(vals.mean()),
                size=len(filtered),
            ),
        )
    )
    return ApplianceModel(
        appliance_id=name, states=states, transitions=(), participation={}, behaviors=None
    )


def train_models(
    appliances: dict[str, PowerSignal],
    aggregate: PowerSignal,
    config: RunConfig,
) -> TrainResult:
    """Learn one model per appliance from its submetered training signal."""
    day_base = aggregate.start_time
    _, agg_events = filter_and_detect(aggregate)
    totals: dict[int, int] = {}
    for ev in agg_events:
        d = day_of(aggregate.time_at(ev.index), day_base)
        totals[d] = totals.get(d, 0) + 1

    result = TrainResult(models=[])
    for name in sorted(appliances):
        raw = appliances[name]
        filtered, events = filter_and_detect(raw)
        if not events:
            result.models.append(_off_only_model(name, filtered))
            result.notes.append(f"{name}: no training events; OFF-only model")
            continue
        states = extract_states(
            filtered,
            k=config.k_clusters,
            merge_ratio=config.merge_ratio,
            off_threshold=config.off_threshold,
        )
        try:
            model = train_appliance(
                name,
                raw,
                filtered,
                events,
                states,
                daily_totals=totals,
                day_base=day_base,
                overshoot_floor_w=config.overshoot_floor,
                count_all_days=config.n_days_variant,
            )
        except DataConsistencyError:
            result.models.append(_off_only_model(name, filtered))
            result.notes.append(f"{name}: no labelable transitions; OFF-only model")
            continue
        result.models.append(model)
    return result


def disaggregate(
    aggregate: PowerSignal,
    models: list[ApplianceModel],
    config: RunConfig,
) -> tuple[list[LabeledEvent], Diagnostics]:
    return classify(
        aggregate,
        models,
        all_off_margin=config.all_off_margin,
        budget=config.search_budget,
    )


# ---------------------------------------------------------------------------
# report formats


def format_event_report(labeled: list[LabeledEvent], signal: PowerSignal) -> str:
    lines = [
        "# event report 1",
        "timestamp\tindex\tmagnitude\tappliance\tfrom_mode\tto_mode\tstage",
    ]
    for item in labeled:
        ev = item.event
        lines.append(
            "\t".join(
                (
                    format_number(signal.time_at(ev.index)),
                    str(ev.index),
                    format_number(ev.magnitude),
                    item.appliance,
                    item.transition.from_mode,
                    item.transition.to_mode,
                    item.stage,
                )
            )
        )
    return "\n".join(lines) + "\n"


def parse_event_report(path: str | Path) -> list[LabelPoint]:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"report not found: {path}")
    out = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#") or line.startswith("timestamp"):
            continue
        parts = line.split("\t")
        if len(parts) != 7:
            raise ParseError(f"{path}:{lineno}: expected 7 tab-separated fields")
        out.append(LabelPoint(int(parts[1]), parts[3], parts[4], parts[5]))
    return out


def build_ground_truth(
    appliances: dict[str, PowerSignal],
    models: list[ApplianceModel],
    offset: int = 0,
) -> list[LabelPoint]:
    """Per-appliance events on submetered test signals, labeled by the model.

    ``offset`` shifts indices when the signals are a slice of a longer
    aggregate (so predictions and truth share an index origin).
    """
    by_id = {m.appliance_id: m for m in models}
    points = []
    for name in sorted(appliances):
        model = by_id.get(name)
        if model is None or not model.transitions:
            continue
        _, events = filter_and_detect(appliances[name])
        for ev, tr in label_training_events(events, model.states):
            points.append(LabelPoint(ev.index + offset, name, tr.from_mode, tr.to_mode))
    points.sort(key=lambda p: (p.index, p.appliance))
    return points


def evaluate_points(
    predicted: list[LabelPoint],
    truth: list[LabelPoint],
    tolerance: int,
) -> tuple[dict[str, ConfusionCounts], float]:
    counts = match_events(predicted, truth, tolerance)
    return counts, macro_average_f(counts)


def format_metrics(counts: dict[str, ConfusionCounts]) -> str:
    lines = ["appliance\ttp\tfp\tfn\ttn\tprecision\trecall\tf_measure"]
    for name in sorted(counts):
        c = counts[name]
        p, r = precision_recall(c)
        lines.append(
            f"{name}\t{c.tp}\t{c.fp}\t{c.fn}\t{c.tn}\t{p:.4f}\t{r:.4f}\t{f_measure(c):.4f}"
        )
    lines.append(f"average_f\t{macro_average_f(counts):.4f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# plot data


def write_plot_data(
    outdir: str | Path,
    raw: PowerSignal,
    filtered: PowerSignal,
    events: list[EventRecord],
    cycles: list[Cycle] | None = None,
) -> list[Path]:
    """Columnar series for external plotting: signal, events, cycles."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    lines = ["time\traw\tfiltered"]
    for i in range(len(raw)):
        lines.append(
            f"{format_number(raw.time_at(i))}\t{format_number(raw.values[i])}"
            f"\t{format_number(filtered.values[i])}"
        )
    p = outdir / "signal.tsv"
    atomic_write_text(p, "\n".join(lines) + "\n")
    written.append(p)

    lines = ["index\ttime\tmagnitude\tpre_level\tpost_level"]
    for ev in events:
        lines.append(
            f"{ev.index}\t{format_number(raw.time_at(ev.index))}"
            f"\t{format_number(ev.magnitude)}"
            f"\t{format_number(ev.pre_level)}\t{format_number(ev.post_level)}"
        )
    p = outdir / "events.tsv"
    atomic_write_text(p, "\n".join(lines) + "\n")
    written.append(p)

    if cycles is not None:
        lines = ["start_event\tend_event\tstart_time\tend_time"]
        for c in cycles:
            t0 = raw.time_at(events[c.start_event].index)
            t1 = raw.time_at(events[c.end_event].post_index)
            lines.append(
                f"{c.start_event}\t{c.end_event}"
                f"\t{format_number(t0)}\t{format_number(t1)}"
            )
        p = outdir / "cycles.tsv"
        atomic_write_text(p, "\n".join(lines) + "\n")
        written.append(p)
    return written
