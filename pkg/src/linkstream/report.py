"""Report runs: load inputs, compute every analysis, write a bundle.

A bundle is a directory of CSV / JSON / TSV files plus ``manifest.json``
holding SHA-256 digests of the configuration, the inputs and every output.
Nothing in the bundle depends on the wall clock or on the location of the
files, so repeated runs on the same inputs produce identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .clock import DAY, Clock, format_epoch, format_offset
from .errors import InputError, LinkStreamError
from .grouping import (
    PARAMETERS,
    ROLES,
    Population,
    group_semi_counts,
    natural_key,
    role_class_table,
    role_scheme,
)
from .io import (
    Metadata,
    atomic_write,
    contacts_stream,
    dumps,
    matrix_csv,
    matrix_json,
    parse_contacts,
    parse_occurrences,
    parse_roster,
    table_csv,
)
from .metrics import (
    Thresholds,
    affinity_density,
    affinity_deviation,
    classify_relationships,
    correlation,
    introversion_factor,
    ratio,
    scheme_groups,
)
from .nullmodels import full_uniform
from .stream import LinkStream, TimePeriod, merge_slots, partition, restrict, stream_stats
from .temporal import MEAN_FIELDS, SERIES_FIELDS, hour_of_week, hour_span, hourly_activity, per_active_decomposition

log = logging.getLogger(__name__)

FORMATS = ("csv", "json", "tsv")
MATRIX_PARAMETERS = ("pairs", "length")


def parse_role_filter(text: str) -> tuple[str, str]:
    """``"PA-ST"`` -> ``("PA", "ST")``."""
    parts = text.split("-")
    if len(parts) != 2 or any(p not in ROLES for p in parts):
        raise InputError(f"role filter must look like PA-ST, got {text!r}")
    return parts[0], parts[1]


@dataclass
class RunConfig:
    """Everything a report run needs. Exactly one of ``occurrences`` and
    ``contacts`` is set."""

    metadata: Path
    output_dir: Path
    occurrences: Path | None = None
    contacts: Path | None = None
    roster: Path | None = None
    utc_offset: int = 7200
    tz: str | None = None
    schemes: list[str] | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    period: tuple[str, str] | None = None
    role_filters: list[tuple[str, str]] = field(default_factory=lambda: [("PA", "ST")])
    formats: tuple[str, ...] = FORMATS
    include_internal: bool = True
    skip_bad: bool = False

    def __post_init__(self):
        for name in ("metadata", "output_dir", "occurrences", "contacts", "roster"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))
        self.formats = tuple(sorted(set(self.formats)))
        self.role_filters = [tuple(r) for r in self.role_filters]

    def validate(self) -> None:
        if (self.occurrences is None) == (self.contacts is None):
            raise InputError("give exactly one of occurrences or contacts as input")
        for name in ("occurrences", "contacts", "metadata", "roster"):
            path = getattr(self, name)
            if path is not None and not path.exists():
                raise InputError(f"{name} path does not exist: {path}")
        unknown = set(self.formats) - set(FORMATS)
        if unknown:
            raise InputError(f"unknown output formats {sorted(unknown)}; choose from {FORMATS}")
        for rf in self.role_filters:
            if len(rf) != 2 or any(r not in ROLES for r in rf):
                raise InputError(f"invalid role filter {rf}")

    def inputs(self) -> dict[str, Path]:
        out = {}
        for name in ("occurrences", "contacts", "roster"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        out["metadata"] = self.metadata
        return out

    def canonical(self, input_hashes: dict) -> dict:
        """Location-independent description used for the configuration hash."""
        return {
            "inputs": input_hashes,
            "utc_offset": self.utc_offset,
            "tz": self.tz,
            "schemes": self.schemes,
            "thresholds": {"favoured": self.thresholds.favoured, "strong": self.thresholds.strong},
            "period": list(self.period) if self.period else None,
            "role_filters": ["-".join(r) for r in self.role_filters],
            "formats": list(self.formats),
            "include_internal": self.include_internal,
        }


@contextmanager
def analysis(name: str):
    """Prefix errors raised inside with the analysis that produced them."""
    try:
        yield
    except LinkStreamError as exc:
        if not getattr(exc, "analysis", None):
            exc.analysis = name
            exc.args = (f"[{name}] {exc}",) + exc.args[1:]
        raise


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(path.glob("*.csv")):
            h.update(f.name.encode())
            h.update(f.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def load_stream(occurrences=None, contacts=None, skip_bad: bool = False):
    """Read one input file. Returns ``(epoch, stream, bad_lines)``."""
    if (occurrences is None) == (contacts is None):
        raise InputError("give exactly one of occurrences or contacts as input")
    if occurrences is not None:
        parsed = parse_occurrences(occurrences, skip_bad)
        stream = merge_slots(parsed.records)
    else:
        parsed = parse_contacts(contacts, skip_bad)
        stream = contacts_stream(parsed)
    return parsed.epoch, stream, parsed.errors


def select_period(stream: LinkStream, clock: Clock, start: str | None, end: str | None) -> LinkStream:
    """Restrict to ``[start, end]`` given as stream seconds or ISO datetimes."""
    if start is None and end is None:
        return stream
    if stream.span is None:
        return stream
    t_1 = clock.to_stream_time(start) if start is not None else stream.span.t_1
    t_2 = clock.to_stream_time(end) if end is not None else stream.span.t_2
    if t_1 >= t_2:
        raise InputError(f"empty period: from {t_1} is not before to {t_2}")
    return restrict(stream, TimePeriod(t_1, t_2))


@dataclass
class Day:
    day: date
    period: TimePeriod
    stream: LinkStream
    population: Population
    present: frozenset


def split_days(stream: LinkStream, clock: Clock, metadata: Metadata, roster: dict | None = None) -> list[Day]:
    """Cut the stream at local midnights and attach each day's population.

    Days without contacts are kept so that day counts reflect the analysed
    period. Every node in contact on a day must have attributes that day.
    """
    span = hour_span(stream, clock)
    clock.check_span(span)
    days = []
    for period, sub in partition(stream, DAY, clock.origin, span):
        day = clock.day_of(period.t_1)
        pop = metadata.for_day(day)
        missing = sorted((v for v in sub.nodes if v not in pop), key=natural_key)
        if missing:
            shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
            raise InputError(f"{len(missing)} nodes in contact on {day} have no metadata: {shown}")
        if roster is not None:
            if day not in roster:
                raise InputError(f"roster has no entry for {day}")
            present = frozenset(roster[day])
            absent = sorted(sub.nodes - present, key=natural_key)
            if absent:
                raise InputError(f"nodes in contact on {day} are absent from the roster: {', '.join(absent[:5])}")
        else:
            present = sub.nodes
        days.append(Day(day, period, sub, pop, present))
    return days


class Bundle:
    """Collects output files in memory and writes them atomically."""

    def __init__(self, root: Path, formats):
        self.root = Path(root)
        self.formats = set(formats)
        self.files: dict[str, str] = {}

    def add(self, relpath: str, text: str, kind: str | None = None) -> None:
        if kind is not None and kind not in self.formats:
            return
        self.files[relpath] = text

    def table(self, relpath: str, records: list[dict], columns: list[str] | None = None) -> None:
        self.add(f"{relpath}.csv", table_csv(records, columns), "csv")
        self.add(f"{relpath}.json", dumps(records), "json")

    def matrix(self, relpath: str, rows, cols, values, **meta) -> None:
        self.add(f"{relpath}.csv", matrix_csv(rows, cols, values), "csv")
        self.add(f"{relpath}.json", matrix_json(rows, cols, values, **meta), "json")

    def write(self) -> None:
        for rel in sorted(self.files):
            atomic_write(self.root / rel, self.files[rel])


def _fraction(x: Fraction) -> dict:
    return {"exact": f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator), "value": float(x)}


def _summary(stream: LinkStream, days: list[Day], clock: Clock, bad_lines: list) -> dict:
    stats = stream_stats(stream)
    out = {
        "epoch": format_epoch(clock.epoch),
        "utc_offset": format_offset(clock.utc_offset),
        "span": [stream.span.t_1, stream.span.t_2] if stream.span else None,
        "n_nodes": len(stream.nodes),
        "n_pairs": stats.n_pairs,
        "n_contacts": stats.n_contacts,
        "cumul_length": stats.cumul_length,
        "skipped_lines": [str(e) for e in bad_lines],
        "days": [
            dict(zip(("day", "n_pairs", "n_contacts", "cumul_length"), (d.day, *stream_stats(d.stream))))
            | {"active": len(d.stream.nodes), "present": len(d.present)}
            for d in days
        ],
    }
    if len(stream.nodes) >= 2:
        net = full_uniform(stream)
        out["full_uniform"] = {p: _fraction(net.constant[p]) for p in PARAMETERS}
    return out


def _role_sizes(days: list[Day], scheme: str, groups) -> dict:
    """Per group, summed over days, the number of present members of each role."""
    index = {g: i for i, g in enumerate(groups)}
    out = {r: np.zeros(len(groups), dtype=np.int64) for r in (None, *ROLES)}
    for d in days:
        for v in d.present:
            if v not in d.population:
                continue
            g = d.population.group_or_none(v, scheme)
            if g is None:
                continue
            out[None][index[g]] += 1
            out[d.population.role(v)][index[g]] += 1
    return out


def _activity(days: list[Day], scheme: str, groups) -> list[dict]:
    """Group sizes and per-individual semi-unit means, by role, averaged over days."""
    k = len(groups)
    n_days = max(len(days), 1)
    sizes = _role_sizes(days, scheme, groups)
    semi = {(r, p): np.zeros(k, dtype=np.int64) for r in (None, *ROLES) for p in PARAMETERS}
    classes = tuple(f"{r}:{g}" for r in ROLES for g in groups)
    for d in days:
        if not d.stream:
            continue
        counts = group_semi_counts(d.stream, role_scheme(d.population, scheme), f"role:{scheme}", classes)
        for p in PARAMETERS:
            per_class = counts.semi_total(p)
            for ri, r in enumerate(ROLES):
                part = per_class[ri * k:(ri + 1) * k]
                semi[(r, p)] += part
                semi[(None, p)] += part
    rows = []
    for i, g in enumerate(groups):
        row = {"group": g}
        for r in (None, *ROLES):
            suffix = "" if r is None else f"_{r}"
            row[f"members_per_day{suffix}"] = float(sizes[r][i] / n_days)
        for p in PARAMETERS:
            row[f"semi_{p}_per_day"] = float(semi[(None, p)][i] / n_days)
            for r in (None, *ROLES):
                suffix = "" if r is None else f"_{r}"
                row[f"{p}_per_individual{suffix}"] = ratio(int(semi[(r, p)][i]), int(sizes[r][i]))
        rows.append(row)
    return rows


def _role_tables(days: list[Day], scheme: str | None) -> list[dict]:
    records = []
    for p in PARAMETERS:
        for mode in ("global", *ROLES):
            counts = None
            excluded = 0
            for d in days:
                t = role_class_table(d.stream, d.population, p, mode, scheme)
                counts = t.counts if counts is None else counts + t.counts
                excluded += t.excluded
                rows, columns = t.rows, t.columns
            if counts is None:
                continue
            total = counts.sum()
            for i, r in enumerate(rows):
                for j, c in enumerate(columns):
                    records.append({
                        "parameter": p,
                        "mode": mode,
                        "row": r,
                        "column": c,
                        "count": int(counts[i, j]),
                        "fraction": ratio(int(counts[i, j]), int(total)) if total else float("nan"),
                    })
    return records


def _hourly(days: list[Day], clock: Clock) -> list[dict]:
    records = []
    for d in days:
        for role in (None, *ROLES):
            series = hourly_activity(d.stream, d.population, role, clock, d.stream.span)
            dec = per_active_decomposition(series)
            how = hour_of_week(series.starts, clock)
            for h, t in enumerate(series.starts):
                row = {
                    "hour_start": clock.local(int(t)).isoformat(),
                    "hour_of_week": int(how[h]),
                    "role": role or "all",
                }
                for f in SERIES_FIELDS:
                    row[f] = int(series.column(f)[h])
                for f in MEAN_FIELDS:
                    row[f] = float(getattr(dec, f)[h])
                records.append(row)
    order = {"all": 0, "PA": 1, "ST": 2}
    records.sort(key=lambda r: (order[r["role"]], r["hour_start"]))
    return records


def _individual_correlation(days: list[Day]) -> dict:
    """Per-individual totals over the period: contacts vs cumulated length."""
    contacts: dict = {}
    length: dict = {}
    for d in days:
        for c in d.stream:
            for v in (c.a, c.b):
                contacts[v] = contacts.get(v, 0) + 1
                length[v] = length.get(v, 0) + c.length
    nodes = sorted(contacts, key=natural_key)
    a = [contacts[v] for v in nodes]
    b = [length[v] for v in nodes]
    return {"n": len(nodes), "contacts_vs_length": correlation(a, b) if len(nodes) >= 2 else float("nan")}


def _scheme_outputs(bundle: Bundle, days: list[Day], scheme: str, config: RunConfig) -> dict:
    streams = [d.stream for d in days]
    pops = [d.population for d in days]
    present = [d.present for d in days]
    groups = scheme_groups(pops, scheme)
    base = f"{scheme}"
    info = {"groups": list(groups)}

    with analysis(f"{scheme}/activity"):
        activity = _activity(days, scheme, groups)
        bundle.table(f"{base}/activity", activity)

    with analysis(f"{scheme}/introversion"):
        rows = []
        internal_share = {}
        for p in PARAMETERS:
            rep = introversion_factor(streams, pops, scheme, p, present)
            rows += rep.rows()
            total_int = sum(rep.real_int)
            total_units = total_int + sum(rep.real_ext) / 2
            internal_share[p] = ratio(total_int, total_units) if total_units else float("nan")
        bundle.table(f"{base}/introversion", rows)
        info["internal_share"] = internal_share

    with analysis(f"{scheme}/correlation"):
        xs = [r["contacts_per_individual"] for r in activity]
        ys = [r["length_per_individual"] for r in activity]
        keep = [i for i in range(len(xs)) if np.isfinite(xs[i]) and np.isfinite(ys[i])]
        corr = {
            "groups": len(keep),
            "contacts_vs_length_per_individual": correlation([xs[i] for i in keep], [ys[i] for i in keep])
            if len(keep) >= 2
            else float("nan"),
        }
        bundle.add(f"{base}/correlation.json", dumps(corr))

    filters = [None] + [rf for rf in config.role_filters]
    for rf in filters:
        tag = "" if rf is None else "_" + "-".join(rf)
        label = "all" if rf is None else "-".join(rf)
        with analysis(f"{scheme}/density{tag}"):
            for p in MATRIX_PARAMETERS:
                dens = affinity_density(streams, pops, scheme, p, rf, present)
                bundle.matrix(
                    f"{base}/density_{p}{tag}", groups, groups, dens.values,
                    scheme=scheme, parameter=p, role_filter=label, n_days=len(days),
                )
        with analysis(f"{scheme}/deviation{tag}"):
            devs = {}
            for p in MATRIX_PARAMETERS:
                dev = affinity_deviation(streams, pops, scheme, p, rf, config.include_internal)
                devs[p] = dev
                bundle.add(f"{base}/deviation_{p}{tag}.csv", matrix_csv(groups, groups, dev.deviation), "csv")
                bundle.add(
                    f"{base}/deviation_{p}{tag}.json",
                    dumps({
                        "scheme": scheme,
                        "parameter": p,
                        "role_filter": label,
                        "n_days": dev.n_days,
                        "include_internal": config.include_internal,
                        "rows": list(groups),
                        "columns": list(groups),
                        "real_per_day": dev.real,
                        "expected_per_day": dev.expected,
                        "deviation": dev.deviation,
                    }),
                    "json",
                )
        with analysis(f"{scheme}/polarity{tag}"):
            graph = classify_relationships(devs["pairs"], devs["length"], config.thresholds)
            bundle.table(
                f"{base}/polarity{tag}",
                [
                    {
                        "row": r.row,
                        "col": r.col,
                        "label": r.label,
                        "pairs_factor": r.pairs_factor,
                        "length_factor": r.length_factor,
                        "rule": r.rule,
                    }
                    for r in graph.relationships
                ],
                ["row", "col", "label", "pairs_factor", "length_factor", "rule"],
            )

    with analysis(f"{scheme}/role_tables"):
        bundle.table(f"{base}/role_tables", _role_tables(days, scheme))
    return info


def run_report(config: RunConfig) -> Bundle:
    """Run every analysis and write the bundle to ``config.output_dir``."""
    config.validate()
    with analysis("load"):
        input_paths = config.inputs()
        input_hashes = {name: sha256_file(path) for name, path in input_paths.items()}
        epoch, stream, bad_lines = load_stream(config.occurrences, config.contacts, config.skip_bad)
        clock = Clock(epoch, config.utc_offset, config.tz)
        if config.period:
            stream = select_period(stream, clock, *config.period)
        metadata = Metadata(config.metadata)
        roster = parse_roster(config.roster) if config.roster else None
        days = split_days(stream, clock, metadata, roster)
        pops = [d.population for d in days]
        if not pops and not metadata.per_day:
            pops = [metadata.for_day(None)]
        available = sorted({s for p in pops for s in p.schemes()})
        schemes = config.schemes or available
        for s in schemes:
            if s not in available:
                raise InputError(f"scheme {s!r} not found in metadata (have {available})")

    bundle = Bundle(config.output_dir, config.formats)
    with analysis("summary"):
        summary = _summary(stream, days, clock, bad_lines)
        summary["individuals"] = _individual_correlation(days)
    with analysis("role_tables"):
        bundle.table("role_tables", _role_tables(days, None))
    with analysis("hourly"):
        hourly = _hourly(days, clock)
        columns = ["hour_start", "hour_of_week", "role", *SERIES_FIELDS, *MEAN_FIELDS]
        bundle.add("hourly.tsv", table_csv(hourly, columns, delimiter="\t"), "tsv")
    summary["schemes"] = {}
    for scheme in schemes:
        summary["schemes"][scheme] = _scheme_outputs(bundle, days, scheme, config)
    bundle.add("summary.json", dumps(summary))

    manifest = {
        "tool": "linkstream",
        "version": __version__,
        "config_sha256": hashlib.sha256(json.dumps(config.canonical(input_hashes), sort_keys=True).encode()).hexdigest(),
        "inputs": {name: {"file": path.name, "sha256": input_hashes[name]} for name, path in input_paths.items()},
        "outputs": {rel: hashlib.sha256(text.encode()).hexdigest() for rel, text in sorted(bundle.files.items())},
    }
    bundle.add("manifest.json", dumps(manifest))
    bundle.write()
    return bundle
