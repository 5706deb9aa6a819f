"""Command-line entry point: ``linkstream {validate,merge,report,temporal,synth}``.

Exit codes: 0 success, 1 bad input, 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .clock import Clock, parse_epoch, parse_offset
from .errors import InputError, InvariantViolation
from .grouping import ROLES, natural_key
from .io import Metadata, atomic_write, dumps, format_contacts, format_metadata, format_occurrences, table_csv
from .metrics import Thresholds
from .report import FORMATS, RunConfig, load_stream, parse_role_filter, run_report, select_period, split_days
from .stream import LinkStream, explode, merge_slots, stream_stats
from .temporal import (
    MEAN_FIELDS,
    SERIES_FIELDS,
    hour_span,
    hourly_activity,
    per_active_decomposition,
    weekly_pattern,
)

log = logging.getLogger("linkstream")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--scheme", action="append", help="grouping scheme (service, category); repeatable")
    g.add_argument("--from", dest="start", help="period start: stream seconds or ISO datetime")
    g.add_argument("--to", dest="end", help="period end: stream seconds or ISO datetime")
    g.add_argument(
        "--role-filter",
        action="append",
        help="PA-ST style role pair (PA or ST alone for temporal); repeatable for report",
    )
    g.add_argument("--utc-offset", default="+02:00", help="local clock offset for days and hours (default +02:00)")
    g.add_argument("--tz", help="IANA zone; rejects spans crossing an offset change")
    g.add_argument("-v", "--verbose", action="store_true")


def _inputs(p: argparse.ArgumentParser, metadata_required: bool) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--occurrences", type=Path, help="slot occurrence file")
    src.add_argument("--contacts", type=Path, help="pre-merged contact file")
    p.add_argument("--metadata", type=Path, required=metadata_required, help="metadata file or per-day directory")
    p.add_argument("--skip-bad", action="store_true", help="collect malformed lines instead of failing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linkstream", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check input files and print a summary")
    _inputs(p, metadata_required=False)
    _common(p)

    p = sub.add_parser("merge", help="merge slot occurrences into a contact file")
    p.add_argument("--occurrences", type=Path, required=True)
    p.add_argument("--metadata", type=Path, help="needed for --scheme or --role-filter")
    p.add_argument("--skip-bad", action="store_true")
    p.add_argument("-o", "--output", type=Path, required=True)
    _common(p)

    p = sub.add_parser("report", help="run every analysis and write a report bundle")
    _inputs(p, metadata_required=True)
    p.add_argument("--roster", type=Path, help="date,node presence file (default: active nodes)")
    p.add_argument("--thresholds", type=Path, help='JSON like {"favoured": 1.0, "strong": 1.5}')
    p.add_argument("--format", action="append", choices=FORMATS, help="output formats (default: all)")
    p.add_argument("--external-only", action="store_true", help="configuration model on external semi-units only")
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    _common(p)

    p = sub.add_parser("temporal", help="hourly activity series as plot-ready TSV")
    _inputs(p, metadata_required=False)
    p.add_argument("--pattern", action="store_true", help="mean per hour of the week instead of chronological")
    p.add_argument("-o", "--output", type=Path, help="TSV path (default: stdout)")
    _common(p)

    p = sub.add_parser("synth", help="generate synthetic occurrences with planted group structure")
    p.add_argument("--config", type=Path, help="JSON generator configuration")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--days", type=int, help="override the configured number of days")
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    _common(p)
    return parser


def _clock(args, epoch: int) -> Clock:
    return Clock(epoch, parse_offset(args.utc_offset), args.tz)


def _filter_stream(stream: LinkStream, args, metadata: Metadata | None) -> LinkStream:
    """Apply --scheme and --role-filter to a stream using fixed metadata."""
    if not args.scheme and not args.role_filter:
        return stream
    if metadata is None:
        raise InputError("--scheme and --role-filter need --metadata")
    if metadata.per_day:
        raise InputError("--scheme and --role-filter on merge/validate need a single metadata file")
    pop = metadata.for_day(None)
    keep_roles = [set(parse_role_filter(r)) for r in args.role_filter or []]

    def keep(c):
        for v in (c.a, c.b):
            if v not in pop:
                raise InputError(f"node {v!r} has no metadata")
        if args.scheme and any(pop.group_or_none(v, s) is None for s in args.scheme for v in (c.a, c.b)):
            return False
        if keep_roles and {pop.role(c.a), pop.role(c.b)} not in keep_roles:
            return False
        return True

    return stream.filter(keep)


def cmd_validate(args) -> int:
    epoch, stream, bad = load_stream(args.occurrences, args.contacts, args.skip_bad)
    clock = _clock(args, epoch)
    stream = select_period(stream, clock, args.start, args.end)
    for err in bad:
        print(f"bad line: {err}", file=sys.stderr)
    out = {"skipped_lines": len(bad)}
    if args.metadata:
        metadata = Metadata(args.metadata)
        stream = _filter_stream(stream, args, metadata)
        days = split_days(stream, clock, metadata)
        out["days"] = len(days)
        for scheme in args.scheme or sorted({s for d in days for s in d.population.schemes()}):
            unclassified = {v for d in days for v in d.stream.nodes if d.population.group_or_none(v, scheme) is None}
            out[f"unclassified_{scheme}"] = len(unclassified)
    elif args.scheme or args.role_filter:
        raise InputError("--scheme and --role-filter need --metadata")
    stats = stream_stats(stream)
    out.update(nodes=len(stream.nodes), pairs=stats.n_pairs, contacts=stats.n_contacts, cumul_length=stats.cumul_length)
    sys.stdout.write(dumps(out))
    return EXIT_INPUT if bad else EXIT_OK


def cmd_merge(args) -> int:
    epoch, stream, bad = load_stream(occurrences=args.occurrences, skip_bad=args.skip_bad)
    for err in bad:
        print(f"bad line: {err}", file=sys.stderr)
    stream = select_period(stream, _clock(args, epoch), args.start, args.end)
    stream = _filter_stream(stream, args, Metadata(args.metadata) if args.metadata else None)
    atomic_write(args.output, format_contacts(stream, epoch))
    print(f"{len(stream)} contacts written to {args.output}", file=sys.stderr)
    return EXIT_OK


def _thresholds(path) -> Thresholds:
    if path is None:
        return Thresholds()
    try:
        return Thresholds.from_json(path)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid thresholds: {exc}") from None


def cmd_report(args) -> int:
    config = RunConfig(
        metadata=args.metadata,
        output_dir=args.out,
        occurrences=args.occurrences,
        contacts=args.contacts,
        roster=args.roster,
        utc_offset=parse_offset(args.utc_offset),
        tz=args.tz,
        schemes=args.scheme,
        thresholds=_thresholds(args.thresholds),
        period=(args.start, args.end) if (args.start or args.end) else None,
        role_filters=[parse_role_filter(r) for r in args.role_filter] if args.role_filter else [("PA", "ST")],
        formats=tuple(args.format) if args.format else FORMATS,
        include_internal=not args.external_only,
        skip_bad=args.skip_bad,
    )
    bundle = run_report(config)
    print(f"{len(bundle.files)} files written to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_temporal(args) -> int:
    role = None
    if args.role_filter:
        if len(args.role_filter) != 1 or args.role_filter[0] not in ROLES:
            raise InputError("temporal takes one --role-filter, PA or ST")
        role = args.role_filter[0]
        if not args.metadata:
            raise InputError("--role-filter needs --metadata")
    epoch, stream, bad = load_stream(args.occurrences, args.contacts, args.skip_bad)
    clock = _clock(args, epoch)
    stream = select_period(stream, clock, args.start, args.end)
    metadata = Metadata(args.metadata) if args.metadata else None
    if args.scheme:
        stream = _filter_stream(stream, args, metadata)
    starts, columns = [], {f: [] for f in (*SERIES_FIELDS, *MEAN_FIELDS)}
    if metadata is not None:
        chunks = [(d.stream, d.population) for d in split_days(stream, clock, metadata)]
    else:
        chunks = [(stream, None)]
    for sub, pop in chunks:
        span = hour_span(sub, clock) if sub.span else None
        if span is None:
            continue
        series = hourly_activity(sub, pop, role, clock, span)
        dec = per_active_decomposition(series)
        starts += list(series.starts)
        for f in SERIES_FIELDS:
            columns[f] += list(series.column(f))
        for f in MEAN_FIELDS:
            columns[f] += list(getattr(dec, f))
    starts = np.array(starts, dtype=np.int64)
    if args.pattern:
        names = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
        means = {f: weekly_pattern(np.array(v, dtype=float), starts, clock) for f, v in columns.items()}
        records = [
            {"hour_of_week": h, "weekday": names[h // 24], "hour": h % 24, **{f: float(means[f][h]) for f in means}}
            for h in range(168)
        ]
        header = ["hour_of_week", "weekday", "hour", *columns]
    else:
        records = [
            {"hour_start": clock.local(int(t)).isoformat(), **{f: columns[f][i] for f in columns}}
            for i, t in enumerate(starts)
        ]
        for r in records:
            for f in MEAN_FIELDS:
                r[f] = float(r[f])
            for f in SERIES_FIELDS:
                r[f] = int(r[f])
        header = ["hour_start", *columns]
    text = table_csv(records, header, delimiter="\t")
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import ClampWarning, SynthConfig, generate

    if args.config is None:
        raise InputError("synth needs --config")
    if args.scheme and args.scheme != ["service"]:
        raise InputError("synthetic groups are written as the service scheme")
    try:
        config = SynthConfig.from_json(args.config.read_text(encoding="utf-8"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{args.config}: {exc}") from None
    overrides = {k: v for k, v in (("seed", args.seed), ("days", args.days)) if v is not None}
    config = replace(config, **overrides)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClampWarning)
        out = generate(config)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    epoch = parse_epoch(config.epoch)
    occurrences = out.occurrences()
    if args.start or args.end or args.role_filter:
        clock = Clock(epoch, config.utc_offset)
        stream = select_period(merge_slots(occurrences), clock, args.start, args.end)
        if args.role_filter:
            pop = out.population
            roles = [set(parse_role_filter(r)) for r in args.role_filter]
            stream = stream.filter(lambda c: {pop.role(c.a), pop.role(c.b)} in roles)
        occurrences = list(explode(stream))
    args.out.mkdir(parents=True, exist_ok=True)
    atomic_write(args.out / "occurrences.csv", format_occurrences(occurrences, epoch))
    atomic_write(args.out / "metadata.csv", format_metadata(out.population))
    atomic_write(args.out / "config.json", config.to_json() + "\n")
    if out.clamped:
        atomic_write(args.out / "clamped.json", dumps(out.clamped))
    groups = sorted({g for _, _, g in out.nodes}, key=natural_key)
    print(f"{len(occurrences)} occurrences, {len(out.nodes)} nodes in {len(groups)} groups -> {args.out}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "merge": cmd_merge,
    "report": cmd_report,
    "temporal": cmd_temporal,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
