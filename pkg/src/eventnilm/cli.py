"""Command-line interface.

Subcommands cover each pipeline stage plus dataset generation:

  filter        raw channel -> filtered two-column series
  detect-events raw channel -> event table
  extract-modes raw channel -> learned state table
  train         dataset manifest -> model file
  disaggregate  manifest + model file -> labeled-event report
  evaluate      report + manifest + model file -> metrics table
  synth         generate a ground-truthed synthetic dataset
  plot-data     raw channel -> plot-ready columnar files

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dataset as ds
from . import pipeline
from .classifier import all_off_threshold, segment_cycles
from .config import RunConfig, apply_overrides, read_config
from .errors import NilmError
from .filtering import filter_and_detect
from .model_io import atomic_write_text, format_number, load_models, save_models
from .modes import MIN_CLUSTERS, extract_states
from .signals import resample_step_hold
from .synth import balanced_household, demo_household, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage problems; the contract here says 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--k-clusters", type=int, dest="k_clusters")
    p.add_argument("--merge-ratio", type=float, dest="merge_ratio")
    p.add_argument("--off-threshold", type=float, dest="off_threshold")
    p.add_argument("--all-off-margin", type=float, dest="all_off_margin")
    p.add_argument("--overshoot-floor", type=float, dest="overshoot_floor")
    p.add_argument("--search-budget", type=int, dest="search_budget")
    p.add_argument("--match-tolerance", type=int, dest="match_tolerance")
    p.add_argument("--n-days-variant", action="store_const", const=True, dest="n_days_variant")
    p.add_argument("--seed", type=int, dest="seed")


def _config_from(args) -> RunConfig:
    config = read_config(args.config) if args.config else RunConfig()
    keys = (
        "k_clusters",
        "merge_ratio",
        "off_threshold",
        "all_off_margin",
        "overshoot_floor",
        "search_budget",
        "match_tolerance",
        "n_days_variant",
        "seed",
    )
    return apply_overrides(config, {k: getattr(args, k, None) for k in keys})


def _read_signal(path: str, period: float | None):
    times, watts = ds.read_channel(path)
    if period is None:
        import numpy as np

        diffs = np.diff(np.sort(times))
        diffs = diffs[diffs > 0]
        period = float(np.median(diffs)) if diffs.size else 1.0
    signal, gaps = resample_step_hold(times, watts, period, source_id=Path(path).stem)
    return signal, gaps


def _split_bundle(bundle):
    m = bundle.manifest
    base = bundle.aggregate.start_time
    train_apps = {
        name: ds.slice_days(sig, m.train_days, base)
        for name, sig in bundle.appliances.items()
    }
    test_apps = {
        name: ds.slice_days(sig, m.test_days, base)
        for name, sig in bundle.appliances.items()
    }
    train_agg = ds.slice_days(bundle.aggregate, m.train_days, base)
    test_agg = ds.slice_days(bundle.aggregate, m.test_days, base)
    return train_apps, train_agg, test_apps, test_agg


def cmd_filter(args) -> int:
    signal, _ = _read_signal(args.input, args.period)
    filtered, _ = filter_and_detect(signal)
    lines = [
        f"{format_number(filtered.time_at(i))}\t{format_number(filtered.values[i])}"
        for i in range(len(filtered))
    ]
    atomic_write_text(args.output, "time\tfiltered\n" + "\n".join(lines) + "\n")
    print(f"wrote {len(filtered)} filtered samples to {args.output}")
    return EXIT_OK


def cmd_detect_events(args) -> int:
    signal, _ = _read_signal(args.input, args.period)
    _, events = filter_and_detect(signal)
    lines = ["index\ttime\tmagnitude\tpre_level\tpost_level"]
    for ev in events:
        lines.append(
            f"{ev.index}\t{format_number(signal.time_at(ev.index))}"
            f"\t{format_number(ev.magnitude)}"
            f"\t{format_number(ev.pre_level)}\t{format_number(ev.post_level)}"
        )
    atomic_write_text(args.output, "\n".join(lines) + "\n")
    print(f"wrote {len(events)} events to {args.output}")
    return EXIT_OK


def cmd_extract_modes(args) -> int:
    config = _config_from(args)
    signal, _ = _read_signal(args.input, args.period)
    filtered, _ = filter_and_detect(signal)
    states = extract_states(
        filtered,
        k=config.k_clusters,
        merge_ratio=config.merge_ratio,
        off_threshold=config.off_threshold,
    )
    lines = ["mode\tlow\thigh\tcentroid\tsize"]
    for s in states.states:
        lines.append(
            f"{s.mode}\t{format_number(s.low)}\t{format_number(s.high)}"
            f"\t{format_number(s.centroid)}\t{s.size}"
        )
    atomic_write_text(args.output, "\n".join(lines) + "\n")
    print(f"wrote {len(states.states)} states to {args.output}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config_from(args)
    bundle = ds.load_dataset(ds.read_manifest(args.manifest))
    train_apps, train_agg, _, _ = _split_bundle(bundle)
    result = pipeline.train_models(train_apps, train_agg, config)
    save_models(args.output, result.models)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"trained {len(result.models)} appliance models -> {args.output}")
    return EXIT_OK


def cmd_disaggregate(args) -> int:
    config = _config_from(args)
    bundle = ds.load_dataset(ds.read_manifest(args.manifest))
    _, _, _, test_agg = _split_bundle(bundle)
    models = load_models(args.model)
    labeled, diagnostics = pipeline.disaggregate(test_agg, models, config)
    atomic_write_text(args.output, pipeline.format_event_report(labeled, test_agg))
    if diagnostics.unrefined_cycles:
        print(
            f"note: {len(diagnostics.unrefined_cycles)} cycle(s) left unrefined",
            file=sys.stderr,
        )
    print(f"labeled {len(labeled)} events -> {args.output}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _config_from(args)
    bundle = ds.load_dataset(ds.read_manifest(args.manifest))
    _, _, test_apps, _ = _split_bundle(bundle)
    models = load_models(args.model)
    predicted = pipeline.parse_event_report(args.report)
    truth = pipeline.build_ground_truth(test_apps, models)
    counts, avg = pipeline.evaluate_points(predicted, truth, config.match_tolerance)
    text = pipeline.format_metrics(counts)
    if args.output:
        atomic_write_text(args.output, text)
    print(text, end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    config = _config_from(args)
    household = demo_household() if args.household == "demo" else balanced_household()
    result = generate(household, days=args.days, period=args.period, seed=config.seed)
    split = args.train_days
    if split >= args.days:
        print("error: train day count must leave test days", file=sys.stderr)
        return EXIT_USAGE
    manifest = ds.write_dataset(
        args.output,
        result,
        train_days=(0, split - 1),
        test_days=(split, args.days - 1),
    )
    print(
        f"wrote {len(result.appliances)} channels, {len(result.truth)} truth events"
        f" -> {manifest}"
    )
    return EXIT_OK


def cmd_plot_data(args) -> int:
    signal, _ = _read_signal(args.input, args.period)
    filtered, events = filter_and_detect(signal)
    cycles = None
    if args.model:
        models = load_models(args.model)
        threshold = all_off_threshold(models)
        cycles = segment_cycles(filtered, events, threshold)
    written = pipeline.write_plot_data(args.output, signal, filtered, events, cycles)
    print(f"wrote {', '.join(str(p) for p in written)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="eventnilm",
        description="Event-based load disaggregation from a single power meter",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="replace spikes and overshoots in a channel")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--period", type=float, default=None)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("detect-events", help="detect mode-change events in a channel")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--period", type=float, default=None)
    p.set_defaults(func=cmd_detect_events)

    p = sub.add_parser("extract-modes", help="learn operating states from a channel")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--period", type=float, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract_modes)

    p = sub.add_parser("train", help="train appliance models from a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("disaggregate", help="label the test aggregate's events")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_disaggregate)

    p = sub.add_parser("evaluate", help="score a report against submetered truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--output", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--output", required=True)
    p.add_argument("--days", type=int, default=28)
    p.add_argument("--train-days", type=int, default=21, dest="train_days")
    p.add_argument("--period", type=float, default=20.0)
    p.add_argument("--household", choices=("demo", "balanced"), default="demo")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("plot-data", help="emit plot-ready series for a channel")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--period", type=float, default=None)
    p.add_argument("--model", default=None, help="model file, enables cycle export")
    p.set_defaults(func=cmd_plot_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NilmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort guard for exit code 3
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
