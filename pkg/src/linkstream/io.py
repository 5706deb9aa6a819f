"""Text file formats: slot occurrences, contacts, node metadata and rosters.

Occurrence and contact files start with a header ``#epoch=<iso8601> slot=30``
followed by one comma-separated record per line. Matrices are written as
CSV with ``inf`` / ``n/a`` sentinels and as JSON with tagged cells.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable

import numpy as np

from .clock import format_epoch, parse_epoch
from .errors import InputError
from .grouping import ROLES, STAFF, NodeAttributes, Population
from .stream import SLOT, Contact, LinkStream, SlotOccurrence

_HEADER_RE = re.compile(r"^#\s*epoch=(\S+)(?:\s+slot=(\d+))?\s*$")


@dataclass
class RecordFile:
    """Parsed occurrence or contact file."""

    epoch: int
    records: list
    errors: list[InputError] = field(default_factory=list)
    source: str = "<input>"


def _open_lines(source) -> tuple[Iterable[str], str]:
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        return path.read_text(encoding="utf-8").splitlines(), str(path)
    return source.read().splitlines(), getattr(source, "name", "<input>")


def _parse_header(lines: list[str], name: str) -> int:
    if not lines:
        raise InputError("empty file, expected a '#epoch=<iso8601> slot=30' header", line=1, source=name)
    m = _HEADER_RE.match(lines[0].strip())
    if not m:
        raise InputError(f"missing header '#epoch=<iso8601> slot=30', got {lines[0]!r}", line=1, source=name)
    if m.group(2) is not None and int(m.group(2)) != SLOT:
        raise InputError(f"unsupported slot length {m.group(2)}s (only {SLOT}s)", line=1, source=name)
    try:
        return parse_epoch(m.group(1))
    except InputError as exc:
        raise InputError(exc.message, line=1, source=name) from None


def _parse_records(source, n_fields: int, build, skip_bad: bool) -> RecordFile:
    lines, name = _open_lines(source)
    lines = list(lines)
    epoch = _parse_header(lines, name)
    records, errors = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        try:
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != n_fields:
                raise InputError(f"expected {n_fields} fields, got {len(parts)}: {text!r}")
            try:
                times = [int(p) for p in parts[2:]]
            except ValueError:
                raise InputError(f"non-integer time in {text!r}") from None
            records.append(build(parts[0], parts[1], *times))
        except InputError as exc:
            err = InputError(exc.message, line=lineno, source=name)
            if not skip_bad:
                raise err from None
            errors.append(err)
    return RecordFile(epoch, records, errors, name)


def parse_occurrences(source, skip_bad: bool = False) -> RecordFile:
    """Read ``node_a,node_b,slot_start`` records.

    Fails on the first bad line unless ``skip_bad``, in which case bad lines
    are collected in ``errors`` with their line numbers.
    """
    return _parse_records(source, 3, SlotOccurrence, skip_bad)


def parse_contacts(source, skip_bad: bool = False) -> RecordFile:
    """Read pre-merged ``node_a,node_b,t_s,t_e`` records."""
    return _parse_records(source, 4, Contact, skip_bad)


def contacts_stream(parsed: RecordFile) -> LinkStream:
    try:
        return LinkStream(tuple(parsed.records))
    except InputError as exc:
        raise InputError(exc.message, source=parsed.source) from None


def atomic_write(path, data: str | bytes) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_occurrences(records: Iterable[SlotOccurrence], epoch: int) -> str:
    out = [f"#epoch={format_epoch(epoch)} slot={SLOT}"]
    for r in sorted(records, key=lambda r: (r.slot_start, r.node_a, r.node_b)):
        out.append(f"{r.node_a},{r.node_b},{r.slot_start}")
    return "\n".join(out) + "\n"


def format_contacts(stream: Iterable[Contact], epoch: int) -> str:
    out = [f"#epoch={format_epoch(epoch)} slot={SLOT}"]
    for c in sorted(stream, key=lambda c: (c.t_s, c.a, c.b, c.t_e)):
        out.append(f"{c.a},{c.b},{c.t_s},{c.t_e}")
    return "\n".join(out) + "\n"


def write_occurrences(path, records: Iterable[SlotOccurrence], epoch: int) -> None:
    atomic_write(path, format_occurrences(records, epoch))


def write_contacts(path, stream: Iterable[Contact], epoch: int) -> None:
    atomic_write(path, format_contacts(stream, epoch))


def parse_metadata(source, require_category: bool = False) -> Population:
    """Read ``node,role,service[,category]`` lines.

    An optional first line starting with ``node,`` is a column header.
    ``require_category`` makes a staff member without category an error.
    """
    lines, name = _open_lines(source)
    attrs: dict[str, NodeAttributes] = {}
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#") or (lineno == 1 and text.lower().startswith("node,")):
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (3, 4) or not all(parts):
            raise InputError(f"expected node,role,service[,category], got {text!r}", line=lineno, source=name)
        node, role = parts[0], parts[1]
        if role not in ROLES:
            raise InputError(f"unknown role {role!r} for node {node!r} (expected PA or ST)", line=lineno, source=name)
        if node in attrs:
            raise InputError(f"duplicate node {node!r}", line=lineno, source=name)
        memberships = {"service": parts[2]}
        if len(parts) == 4:
            if role != STAFF:
                raise InputError(f"patient {node!r} cannot have a category", line=lineno, source=name)
            memberships["category"] = parts[3]
        elif require_category and role == STAFF:
            raise InputError(f"staff {node!r} has no category", line=lineno, source=name)
        attrs[node] = NodeAttributes(node, role, memberships)
    return Population(attrs.values())


def format_metadata(population: Population) -> str:
    out = []
    for a in sorted(population, key=lambda a: a.node):
        fields = [a.node, a.role, a.memberships.get("service", "")]
        if "category" in a.memberships:
            fields.append(a.memberships["category"])
        out.append(",".join(fields))
    return "\n".join(out) + "\n"


def write_metadata(path, population: Population) -> None:
    atomic_write(path, format_metadata(population))


class Metadata:
    """Node attributes, constant or per day.

    ``path`` is either one metadata file used for every day or a directory
    of ``YYYY-MM-DD.csv`` files, one per day.
    """

    def __init__(self, path, require_category: bool = False):
        self.path = Path(path)
        self._fixed: Population | None = None
        self._daily: dict[date, Path] = {}
        self._cache: dict[date, Population] = {}
        self.require_category = require_category
        if self.path.is_dir():
            for f in sorted(self.path.glob("*.csv")):
                try:
                    self._daily[date.fromisoformat(f.stem)] = f
                except ValueError:
                    raise InputError(f"metadata file name {f.name!r} is not YYYY-MM-DD.csv") from None
            if not self._daily:
                raise InputError(f"no YYYY-MM-DD.csv files in {self.path}")
        else:
            self._fixed = parse_metadata(self.path, require_category)

    @property
    def per_day(self) -> bool:
        return self._fixed is None

    def files(self) -> list[Path]:
        return [self.path] if self._fixed is not None else list(self._daily.values())

    def for_day(self, day: date | None) -> Population:
        if self._fixed is not None:
            return self._fixed
        if day not in self._daily:
            raise InputError(f"no metadata file for day {day}")
        if day not in self._cache:
            self._cache[day] = parse_metadata(self._daily[day], self.require_category)
        return self._cache[day]


def parse_roster(source) -> dict[date, set]:
    """Read ``YYYY-MM-DD,node`` presence lines."""
    lines, name = _open_lines(source)
    roster: dict[date, set] = {}
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#") or (lineno == 1 and text.lower().startswith("date,")):
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise InputError(f"expected date,node, got {text!r}", line=lineno, source=name)
        try:
            day = date.fromisoformat(parts[0])
        except ValueError:
            raise InputError(f"invalid date {parts[0]!r}", line=lineno, source=name) from None
        roster.setdefault(day, set()).add(parts[1])
    return roster


def format_cell(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "n/a"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def json_cell(x) -> dict:
    x = float(x)
    if math.isnan(x):
        return {"type": "n/a"}
    if math.isinf(x):
        return {"type": "inf" if x > 0 else "-inf"}
    return {"type": "value", "value": x}


def parse_cell(text: str) -> float:
    if text == "n/a":
        return math.nan
    return float(text)


def matrix_csv(rows: Iterable[str], cols: Iterable[str], values: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(cols)
    w.writerow([""] + cols)
    for label, row in zip(rows, values):
        w.writerow([label] + [format_cell(v) for v in row])
    return buf.getvalue()


def matrix_json(rows, cols, values: np.ndarray, **meta) -> str:
    payload = dict(meta)
    payload["rows"] = list(rows)
    payload["columns"] = list(cols)
    payload["cells"] = [[json_cell(v) for v in row] for row in values]
    return dumps(payload)


def table_csv(records: list[dict], columns: list[str] | None = None, delimiter: str = ",") -> str:
    buf = io.StringIO()
    columns = columns or (list(records[0]) if records else [])
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([format_cell(r[c]) if isinstance(r[c], (float, np.floating)) else r[c] for c in columns])
    return buf.getvalue()


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (date,)):
        return o.isoformat()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _tag_specials(o):
    if isinstance(o, float) and (math.isnan(o) or math.isinf(o)):
        return json_cell(o)
    if isinstance(o, dict):
        return {k: _tag_specials(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_tag_specials(v) for v in o]
    return o


def dumps(payload) -> str:
    """Deterministic JSON; NaN and infinities become tagged cells."""
    payload = json.loads(json.dumps(payload, default=_default, allow_nan=True))
    return json.dumps(_tag_specials(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
