"""Hour-by-hour activity: active individuals and per-active-individual means."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clock import HOUR, Clock
from .grouping import ROLES, Population, unit_weights
from .metrics import correlation
from .stream import LinkStream, TimePeriod, partition, stream_stats

SERIES_FIELDS = (
    "active",
    "n_pairs",
    "n_contacts",
    "cumul_length",
    "semi_pairs",
    "semi_contacts",
    "semi_length",
)
MEAN_FIELDS = (
    "degree",
    "length_per_individual",
    "length_per_pair",
    "contacts_per_individual",
    "length_per_contact",
)


@dataclass
class HourlySeries:
    """Per-hour counts.

    ``n_pairs``, ``n_contacts`` and ``cumul_length`` are plain statistics of
    the hour's restricted stream. ``active`` and the ``semi_*`` columns are
    attributed to ``role`` (every node when ``role`` is None): a unit counts
    once per endpoint of that role, so without a role the semi columns are
    twice the plain ones.
    """

    starts: np.ndarray
    role: str | None
    active: np.ndarray
    n_pairs: np.ndarray
    n_contacts: np.ndarray
    cumul_length: np.ndarray
    semi_pairs: np.ndarray
    semi_contacts: np.ndarray
    semi_length: np.ndarray

    def __len__(self) -> int:
        return len(self.starts)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)


def hour_span(stream: LinkStream, clock: Clock) -> TimePeriod | None:
    """The stream's span widened to whole local clock hours."""
    if stream.span is None:
        return None
    origin = clock.origin
    t_1 = origin + ((stream.span.t_1 - origin) // HOUR) * HOUR
    t_2 = origin - ((origin - stream.span.t_2) // HOUR) * HOUR
    return TimePeriod(t_1, t_2)


def hourly_activity(
    stream: LinkStream,
    population: Population | None = None,
    role: str | None = None,
    clock: Clock = Clock(),
    span: TimePeriod | None = None,
) -> HourlySeries:
    """Activity in each local clock hour of ``span`` (default: the stream's
    span widened to whole hours).

    A contact crossing an hour boundary is clipped into each hour it
    touches, so its endpoints are active in both.
    """
    if role is not None:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if population is None:
            raise ValueError("a role filter needs a population")
    span = span or hour_span(stream, clock)
    clock.check_span(span)
    buckets = partition(stream, HOUR, clock.origin, span) if span else []
    n = len(buckets)
    cols = {f: np.zeros(n, dtype=np.int64) for f in SERIES_FIELDS}
    starts = np.array([p.t_1 for p, _ in buckets], dtype=np.int64)
    for h, (_, sub) in enumerate(buckets):
        stats = stream_stats(sub)
        cols["n_pairs"][h] = stats.n_pairs
        cols["n_contacts"][h] = stats.n_contacts
        cols["cumul_length"][h] = stats.cumul_length
        if role is None:
            cols["active"][h] = len(sub.nodes)
            cols["semi_pairs"][h] = 2 * stats.n_pairs
            cols["semi_contacts"][h] = 2 * stats.n_contacts
            cols["semi_length"][h] = 2 * stats.cumul_length
            continue
        cols["active"][h] = sum(1 for v in sub.nodes if population.role(v) == role)
        for (a, b), w in unit_weights(sub).items():
            m = (population.role(a) == role) + (population.role(b) == role)
            if m:
                cols["semi_pairs"][h] += m
                cols["semi_contacts"][h] += m * w["contacts"]
                cols["semi_length"][h] += m * w["length"]
    return HourlySeries(starts, role, **cols)


@dataclass
class Decomposition:
    """Per-active-individual means for each hour; NaN where undefined."""

    starts: np.ndarray
    role: str | None
    degree: np.ndarray
    length_per_individual: np.ndarray
    length_per_pair: np.ndarray
    contacts_per_individual: np.ndarray
    length_per_contact: np.ndarray


def _div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = num.astype(float)
    den = den.astype(float)
    out = np.full(num.shape, np.nan)
    np.divide(num, den, out=out, where=den > 0)
    return out


def per_active_decomposition(series: HourlySeries, role: str | None = None) -> Decomposition:
    """Degree, length per individual and per pair (degree view); contacts per
    individual and length per contact (contact view).

    Means are ratios of semi-unit totals, e.g. length per pair is the hour's
    semi-length divided by its semi-pairs.
    """
    if role is not None and role != series.role:
        raise ValueError(f"series was built for role {series.role!r}, not {role!r}")
    return Decomposition(
        series.starts,
        series.role,
        degree=_div(series.semi_pairs, series.active),
        length_per_individual=_div(series.semi_length, series.active),
        length_per_pair=_div(series.semi_length, series.semi_pairs),
        contacts_per_individual=_div(series.semi_contacts, series.active),
        length_per_contact=_div(series.semi_length, series.semi_contacts),
    )


def daily_totals(series: HourlySeries, clock: Clock, name: str = "cumul_length") -> dict:
    """Sum of one column per local calendar day."""
    out: dict = {}
    for t, v in zip(series.starts, series.column(name)):
        day = clock.day_of(int(t))
        out[day] = out.get(day, 0) + int(v)
    return out


def hour_of_week(starts: np.ndarray, clock: Clock) -> np.ndarray:
    """0 = Monday 00:00 local, 167 = Sunday 23:00 local."""
    return np.array([clock.local(int(t)).weekday() * 24 + clock.local(int(t)).hour for t in starts], dtype=int)


def weekly_pattern(values: np.ndarray, starts: np.ndarray, clock: Clock) -> np.ndarray:
    """Mean of ``values`` for each of the 168 hours of the week (NaN-aware)."""
    values = np.asarray(values, dtype=float)
    how = hour_of_week(starts, clock)
    out = np.full(168, np.nan)
    for h in range(168):
        sel = values[(how == h) & ~np.isnan(values)]
        if len(sel):
            out[h] = sel.mean()
    return out


def autocorrelation(values, lag: int = 168) -> float:
    """Correlation between the series and itself shifted by ``lag`` hours."""
    x = np.asarray(values, dtype=float)
    if len(x) <= lag + 1:
        return float("nan")
    a, b = x[:-lag], x[lag:]
    keep = ~(np.isnan(a) | np.isnan(b))
    return correlation(a[keep], b[keep])
