"""Mapping between stream seconds and local calendar days and hours."""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

from .errors import InputError
from .stream import TimePeriod

DAY = 86_400
HOUR = 3_600

_OFFSET_RE = re.compile(r"^([+-])(\d{2}):?(\d{2})$")


def parse_offset(text: str) -> int:
    """``"+02:00"`` -> 7200."""
    if text in ("Z", "z", "UTC"):
        return 0
    m = _OFFSET_RE.match(text.strip())
    if not m:
        raise InputError(f"invalid UTC offset {text!r}, expected e.g. +02:00")
    sign = 1 if m.group(1) == "+" else -1
    return sign * (int(m.group(2)) * 3600 + int(m.group(3)) * 60)


def format_offset(seconds: int) -> str:
    sign = "+" if seconds >= 0 else "-"
    h, m = divmod(abs(seconds) // 60, 60)
    return f"{sign}{h:02d}:{m:02d}"


def parse_epoch(text: str) -> int:
    """ISO-8601 instant to Unix seconds. Naive values are read as UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InputError(f"invalid epoch {text!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_epoch(unix: int) -> str:
    return datetime.fromtimestamp(unix, timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class Clock:
    """Stream time ``t`` is ``epoch + t`` seconds in Unix time.

    Local calendar boundaries use a fixed UTC offset (default +02:00). When
    ``tz`` names an IANA zone, :meth:`check_span` rejects spans that cross a
    change of that zone's offset, since a day must have exactly 24 hours.
    """

    epoch: int = 0
    utc_offset: int = 7200
    tz: str | None = None

    @property
    def origin(self) -> int:
        """A stream time that falls on a local midnight."""
        return (-(self.epoch + self.utc_offset)) % DAY

    def local(self, t: int) -> datetime:
        return datetime.fromtimestamp(self.epoch + t, timezone(timedelta(seconds=self.utc_offset)))

    def day_of(self, t: int) -> date:
        return self.local(t).date()

    def day_start(self, day: date) -> int:
        local_midnight = datetime(day.year, day.month, day.day, tzinfo=timezone(timedelta(seconds=self.utc_offset)))
        return int(local_midnight.timestamp()) - self.epoch

    def day_period(self, day: date) -> TimePeriod:
        start = self.day_start(day)
        return TimePeriod(start, start + DAY)

    def to_stream_time(self, text: str) -> int:
        """Parse an integer or ISO-8601 datetime (local offset if naive) to stream seconds."""
        text = text.strip()
        if re.fullmatch(r"-?\d+", text):
            return int(text)
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise InputError(f"invalid time {text!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone(timedelta(seconds=self.utc_offset)))
        return int(dt.timestamp()) - self.epoch

    def check_span(self, span: TimePeriod | None) -> None:
        if self.tz is None or span is None:
            return
        from zoneinfo import ZoneInfo

        zone = ZoneInfo(self.tz)
        offsets = set()
        for t in range(span.t_1, span.t_2 + HOUR, HOUR):
            moment = datetime.fromtimestamp(self.epoch + min(t, span.t_2), timezone.utc)
            offsets.add(int(moment.astimezone(zone).utcoffset().total_seconds()))
        if len(offsets) > 1:
            raise InputError(
                f"time zone {self.tz} changes offset inside the analysed span "
                f"({', '.join(format_offset(o) for o in sorted(offsets))}); "
                "restrict the period or pass a fixed --utc-offset"
            )
        (offset,) = offsets
        if offset != self.utc_offset:
            raise InputError(
                f"time zone {self.tz} has offset {format_offset(offset)} but the clock uses "
                f"{format_offset(self.utc_offset)}"
            )
