"""Introversion factors, affinity densities, deviation matrices and polarity.

Cell values are floats; ``math.inf`` marks an infinite factor (real activity
against a null expectation of zero) and NaN marks an undefined cell (both
zero, or a diagonal that is not reported).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .grouping import (
    PARAMETERS,
    Population,
    check_parameter,
    group_semi_counts,
    natural_key,
    role_scheme,
    unit_weights,
)
from .nullmodels import CONTACT_UNIFORM, FULL_UNIFORM, LENGTH_UNIFORM, expected_cross, full_uniform
from .stream import LinkStream, stream_stats

log = logging.getLogger(__name__)

BASELINES = {"pairs": FULL_UNIFORM, "contacts": CONTACT_UNIFORM, "length": LENGTH_UNIFORM}


def ratio(num, den) -> float:
    """``num / den`` with ``x/0 = inf`` for ``x > 0`` and ``0/0 = nan``."""
    if den == 0:
        return math.inf if num > 0 else math.nan
    if isinstance(num, (int, Fraction)) and isinstance(den, (int, Fraction)):
        return float(Fraction(num) / Fraction(den))
    return float(num) / float(den)


def factor(real: float, baseline: float) -> float:
    """Quotient of a real ratio by its baseline ratio.

    Degenerate baselines (0, inf or undefined) make the factor undefined; an
    infinite real ratio over a finite positive baseline stays infinite.
    """
    if math.isnan(real) or math.isnan(baseline) or baseline == 0 or math.isinf(baseline):
        return math.nan
    if math.isinf(real):
        return math.inf
    return real / baseline


def _as_streams(streams) -> list[LinkStream]:
    return [streams] if isinstance(streams, LinkStream) else list(streams)


def _populations(population, n: int) -> list[Population]:
    """One population per stream; a single population applies to all."""
    if isinstance(population, Population):
        return [population] * n
    pops = list(population)
    if len(pops) != n:
        raise ValueError(f"need one population per stream, got {len(pops)} for {n}")
    return pops


def scheme_groups(population, scheme: str) -> tuple[str, ...]:
    """Groups of ``scheme`` across one population or a sequence of them."""
    if isinstance(population, Population):
        return population.groups(scheme)
    seen = set()
    for pop in population:
        seen.update(pop.groups(scheme))
    return tuple(sorted(seen, key=natural_key))


def _present_sets(streams, present):
    if present is None:
        return [s.nodes for s in streams]
    if isinstance(present, (set, frozenset)):
        return [present] * len(streams)
    present = list(present)
    if len(present) != len(streams):
        raise ValueError("present must give one node set per stream")
    return present


@dataclass
class IntroversionReport:
    scheme: str
    parameter: str
    baseline: str
    groups: tuple[str, ...]
    real_int: list
    real_ext: list
    base_int: list
    base_ext: list

    @property
    def ratio_real(self) -> np.ndarray:
        return np.array([ratio(i, e) for i, e in zip(self.real_int, self.real_ext)])

    @property
    def ratio_baseline(self) -> np.ndarray:
        return np.array([ratio(i, e) for i, e in zip(self.base_int, self.base_ext)])

    @property
    def factor(self) -> np.ndarray:
        return np.array([factor(r, b) for r, b in zip(self.ratio_real, self.ratio_baseline)])

    def rows(self) -> list[dict]:
        return [
            {
                "group": g,
                "parameter": self.parameter,
                "baseline": self.baseline,
                "internal": float(self.real_int[i]),
                "external": float(self.real_ext[i]),
                "ratio_real": float(self.ratio_real[i]),
                "ratio_baseline": float(self.ratio_baseline[i]),
                "factor": float(self.factor[i]),
            }
            for i, g in enumerate(self.groups)
        ]


def introversion_factor(
    streams,
    population: Population | Sequence[Population],
    scheme: str,
    parameter: str,
    present=None,
) -> IntroversionReport:
    """Factor of introversion of every group of ``scheme``.

    ``streams`` is one stream or a sequence of them (typically days); the
    internal and external totals, real and baseline, are summed over the
    sequence before taking ratios. Baselines: full-uniform network for
    pairs, contact-uniform for contacts, length-uniform for length.

    ``present`` (one node set per stream, or one set for all) gives the
    members counted in the full-uniform baseline; it defaults to the nodes
    of each stream.
    """
    check_parameter(parameter)
    streams = _as_streams(streams)
    present = _present_sets(streams, present)
    pops = _populations(population, len(streams))
    groups = scheme_groups(pops, scheme)
    k = len(groups)
    real_int = [0] * k
    real_ext = [0] * k
    base_int = [Fraction(0)] * k
    base_ext = [Fraction(0)] * k
    for stream, nodes, pop in zip(streams, present, pops):
        if not stream:
            continue
        counts = group_semi_counts(stream, pop, scheme, groups)
        internal = counts.internal(parameter)
        external = counts.external(parameter)
        for i in range(k):
            real_int[i] += int(internal[i])
            real_ext[i] += int(external[i])
        if parameter == "pairs":
            if len(stream.nodes) < 2:
                continue
            per_couple = full_uniform(stream).constant["pairs"]
            sizes = _group_sizes(nodes, pop, scheme, groups)
            n_total = sum(sizes)
            for i, n in enumerate(sizes):
                base_int[i] += per_couple * (n * (n - 1) // 2)
                base_ext[i] += per_couple * n * (n_total - n)
        else:
            stats = stream_stats(stream)
            if parameter == "contacts":
                mean = Fraction(stats.n_contacts, stats.n_pairs)
                b_int, b_ext = counts.internal("pairs"), counts.external("pairs")
            else:
                mean = Fraction(stats.cumul_length, stats.n_contacts)
                b_int, b_ext = counts.internal("contacts"), counts.external("contacts")
            for i in range(k):
                base_int[i] += int(b_int[i]) * mean
                base_ext[i] += int(b_ext[i]) * mean
    return IntroversionReport(scheme, parameter, BASELINES[parameter], groups, real_int, real_ext, base_int, base_ext)


def pairs_baseline_ratio(n_group: int, n_total: int) -> float:
    """Int/ext ratio of adjacency pairs in the full-uniform network:
    ``(n_g - 1) / (2 (N - n_g))``."""
    return ratio(Fraction(n_group - 1), Fraction(2 * (n_total - n_group)))


def _group_sizes(nodes, population, scheme, groups, role=None) -> list[int]:
    index = {g: i for i, g in enumerate(groups)}
    sizes = [0] * len(groups)
    for v in nodes:
        g = population.group_or_none(v, scheme)
        if g is None or g not in index:
            continue
        if role is not None and population.role(v) != role:
            continue
        sizes[index[g]] += 1
    return sizes


@dataclass
class AffinityMatrix:
    """Mean over days of ``units(i, j) / (|S_i| |S_j|)``.

    Rows are groups restricted to ``role_filter[0]`` and columns groups
    restricted to ``role_filter[1]`` when a filter is given. ``days_used``
    counts the days each cell was averaged over (days with an empty row or
    column group are skipped for that cell).
    """

    scheme: str
    parameter: str
    role_filter: tuple[str, str] | None
    groups: tuple[str, ...]
    values: np.ndarray
    days_used: np.ndarray


@dataclass
class DeviationMatrix:
    """Real per-day intensity, configuration-model expectation and their ratio.

    ``deviation = sum_days(real) / sum_days(expected)`` per cell.
    """

    scheme: str
    parameter: str
    groups: tuple[str, ...]
    real: np.ndarray
    expected: np.ndarray
    deviation: np.ndarray
    n_days: int
    role_filter: tuple[str, str] | None = None

    @property
    def symmetric(self) -> bool:
        return self.role_filter is None or self.role_filter[0] == self.role_filter[1]


def _role_match(role_filter, r_a, r_b) -> tuple[bool, bool]:
    """Whether (a as row, b as column) and (b as row, a as column) pass the filter."""
    if role_filter is None:
        return True, True
    row, col = role_filter
    return (r_a == row and r_b == col), (r_b == row and r_a == col)


def daily_cross_counts(
    streams,
    population: Population | Sequence[Population],
    scheme: str,
    parameter: str,
    role_filter: tuple[str, str] | None = None,
) -> np.ndarray:
    """Units between distinct groups, one ``k x k`` matrix per stream.

    Unfiltered matrices are symmetric. With ``role_filter=(row, col)`` cell
    ``(i, j)`` holds units between row-role members of ``i`` and col-role
    members of ``j``. The diagonal is zero.
    """
    check_parameter(parameter)
    streams = _as_streams(streams)
    pops = _populations(population, len(streams))
    groups = scheme_groups(pops, scheme)
    index = {g: i for i, g in enumerate(groups)}
    out = np.zeros((len(streams), len(groups), len(groups)), dtype=np.int64)
    for d, (stream, pop) in enumerate(zip(streams, pops)):
        for (a, b), weights in unit_weights(stream).items():
            g_a = pop.group_or_none(a, scheme)
            g_b = pop.group_or_none(b, scheme)
            if g_a is None or g_b is None or g_a == g_b:
                continue
            ab, ba = _role_match(role_filter, pop.role(a), pop.role(b))
            w = weights[parameter]
            if ab:
                out[d, index[g_a], index[g_b]] += w
            if ba:
                out[d, index[g_b], index[g_a]] += w
    return out


def affinity_density(
    streams,
    population: Population | Sequence[Population],
    scheme: str,
    parameter: str,
    role_filter: tuple[str, str] | None = None,
    present=None,
) -> AffinityMatrix:
    """Mean daily density of ``parameter`` between distinct groups.

    Each stream is one day. Group sizes ``|S_i(d)|`` count the nodes of
    ``present`` (default: nodes active in that day's stream).
    """
    streams = _as_streams(streams)
    present = _present_sets(streams, present)
    pops = _populations(population, len(streams))
    groups = scheme_groups(pops, scheme)
    k = len(groups)
    counts = daily_cross_counts(streams, pops, scheme, parameter, role_filter)
    total = np.zeros((k, k))
    used = np.zeros((k, k), dtype=np.int64)
    skipped = 0
    for d, (nodes, pop) in enumerate(zip(present, pops)):
        rows = np.array(_group_sizes(nodes, pop, scheme, groups, role_filter[0] if role_filter else None))
        cols = np.array(_group_sizes(nodes, pop, scheme, groups, role_filter[1] if role_filter else None))
        possible = np.outer(rows, cols)
        ok = possible > 0
        np.fill_diagonal(ok, False)
        skipped += int((~ok).sum()) - k
        total[ok] += counts[d][ok] / possible[ok]
        used[ok] += 1
    if skipped:
        log.debug("affinity %s/%s: %d day-cells skipped for empty groups", scheme, parameter, skipped)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(used > 0, total / np.maximum(used, 1), np.nan)
    np.fill_diagonal(values, np.nan)
    return AffinityMatrix(scheme, parameter, role_filter, groups, values, used)


def deviation_matrix(
    real,
    expected,
    scheme: str = "",
    parameter: str = "",
    groups: Sequence[str] = (),
    role_filter: tuple[str, str] | None = None,
) -> DeviationMatrix:
    """Ratio of summed real to summed expected values, cell by cell.

    ``real`` and ``expected`` are ``(days, k, k)`` or ``(k, k)`` arrays of
    the same shape. A cell is ``inf`` when real > 0 and expected = 0, NaN
    when both are 0 or the expectation itself is undefined.
    """
    real = np.asarray(real, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if real.shape != expected.shape:
        raise ValueError(f"shape mismatch: real {real.shape} vs expected {expected.shape}")
    if real.ndim == 2:
        real = real[None]
        expected = expected[None]
    if real.ndim != 3 or real.shape[1] != real.shape[2]:
        raise ValueError(f"expected square matrices, got shape {real.shape}")
    n_days = real.shape[0]
    sum_real = real.sum(axis=0)
    sum_exp = expected.sum(axis=0)
    dev = np.full(sum_real.shape, np.nan)
    pos = sum_exp > 0
    dev[pos] = sum_real[pos] / sum_exp[pos]
    dev[(sum_exp == 0) & (sum_real > 0)] = np.inf
    dev[np.isnan(sum_exp) | np.isnan(sum_real)] = np.nan
    groups = tuple(groups) or tuple(str(i) for i in range(sum_real.shape[0]))
    return DeviationMatrix(scheme, parameter, groups, sum_real / n_days, sum_exp / n_days, dev, n_days, role_filter)


def daily_expected(
    streams,
    population: Population | Sequence[Population],
    scheme: str,
    parameter: str,
    role_filter: tuple[str, str] | None = None,
    include_internal: bool = True,
) -> np.ndarray:
    """Configuration-model expectations per stream, aligned with :func:`daily_cross_counts`.

    With a role filter the stream is first restricted to contacts between
    the two roles; semi-units are then accounted per role class (e.g.
    ``PA:S1``) and cell ``(i, j)`` is the expectation between class
    ``row:S_i`` and class ``col:S_j``. Days without semi-units contribute
    zeros.
    """
    check_parameter(parameter)
    streams = _as_streams(streams)
    pops = _populations(population, len(streams))
    groups = scheme_groups(pops, scheme)
    k = len(groups)
    out = np.zeros((len(streams), k, k))
    if role_filter is not None:
        roles = set(role_filter)
        class_scheme = f"role:{scheme}"
        classes = tuple(f"{r}:{g}" for r in sorted(roles) for g in groups)
        cidx = {c: i for i, c in enumerate(classes)}
    for d, (stream, population) in enumerate(zip(streams, pops)):
        if role_filter is None:
            counts = group_semi_counts(stream, population, scheme, groups)
            d_i = counts.semi_total(parameter) if include_internal else counts.external(parameter)
            if d_i.sum() == 0:
                continue
            out[d] = expected_cross(d_i)
        else:
            sub = stream.filter(lambda c: {population.role(c.a), population.role(c.b)} == roles)
            counts = group_semi_counts(sub, role_scheme(population, scheme), class_scheme, classes)
            d_i = counts.semi_total(parameter) if include_internal else counts.external(parameter)
            if d_i.sum() == 0:
                continue
            full = np.outer(d_i, d_i) / d_i.sum()
            row, col = role_filter
            for i, g_i in enumerate(groups):
                for j, g_j in enumerate(groups):
                    out[d, i, j] = full[cidx[f"{row}:{g_i}"], cidx[f"{col}:{g_j}"]]
    for d in range(len(streams)):
        np.fill_diagonal(out[d], np.nan)
    return out


def affinity_deviation(
    streams,
    population: Population | Sequence[Population],
    scheme: str,
    parameter: str,
    role_filter: tuple[str, str] | None = None,
    include_internal: bool = True,
) -> DeviationMatrix:
    """Deviation of real cross-group units from the configuration model, over days."""
    streams = _as_streams(streams)
    if not isinstance(population, Population):
        population = list(population)
    real = daily_cross_counts(streams, population, scheme, parameter, role_filter).astype(float)
    expected = daily_expected(streams, population, scheme, parameter, role_filter, include_internal)
    for d in range(len(streams)):
        np.fill_diagonal(real[d], np.nan)
    return deviation_matrix(real, expected, scheme, parameter, scheme_groups(population, scheme), role_filter)


STRONGLY_FAVOURED = "strongly favoured"
CLEARLY_FAVOURED = "clearly favoured"
NEUTRAL = "neutral"
MIXED = "mixed"
CLEARLY_UNFAVOURED = "clearly unfavoured"
STRONGLY_UNFAVOURED = "strongly unfavoured"

LABEL_RANK = {
    STRONGLY_UNFAVOURED: -2,
    CLEARLY_UNFAVOURED: -1,
    NEUTRAL: 0,
    MIXED: 0,
    CLEARLY_FAVOURED: 1,
    STRONGLY_FAVOURED: 2,
}


@dataclass(frozen=True)
class Thresholds:
    favoured: float = 1.0
    strong: float = 1.5

    def __post_init__(self):
        if not (self.favoured > 0 and self.strong > self.favoured):
            raise ValueError(f"need 0 < favoured < strong, got {self.favoured}, {self.strong}")

    @classmethod
    def from_json(cls, path) -> Thresholds:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(**{k: float(v) for k, v in data.items()})


def classify(f_pairs: float, f_length: float, thresholds: Thresholds = Thresholds()) -> str:
    """Polarity label of one relationship from its two deviation factors.

    Unfavoured thresholds are the reciprocals of the favoured ones. ``mixed``
    means the factors lie on both sides of the neutral threshold and at
    least one passes its strong threshold. Undefined factors give ``neutral``.
    """
    if math.isnan(f_pairs) or math.isnan(f_length):
        return NEUTRAL
    hi, strong_hi = thresholds.favoured, thresholds.strong
    lo, strong_lo = 1 / thresholds.favoured, 1 / thresholds.strong
    if f_pairs > hi and f_length > hi:
        if min(f_pairs, f_length) > strong_hi:
            return STRONGLY_FAVOURED
        if max(f_pairs, f_length) > strong_hi:
            return CLEARLY_FAVOURED
        return NEUTRAL
    if f_pairs < lo and f_length < lo:
        if max(f_pairs, f_length) < strong_lo:
            return STRONGLY_UNFAVOURED
        if min(f_pairs, f_length) < strong_lo:
            return CLEARLY_UNFAVOURED
        return NEUTRAL
    straddle = (f_pairs > hi and f_length < lo) or (f_pairs < lo and f_length > hi)
    beyond = max(f_pairs, f_length) > strong_hi or min(f_pairs, f_length) < strong_lo
    if straddle and beyond:
        return MIXED
    return NEUTRAL


@dataclass(frozen=True)
class Relationship:
    row: str
    col: str
    label: str
    pairs_factor: float
    length_factor: float

    @property
    def rule(self) -> str:
        """``mixed`` is this tool's own rule; the other labels follow the published thresholds."""
        return "local" if self.label == MIXED else "published"


@dataclass
class PolarityGraph:
    scheme: str
    thresholds: Thresholds
    role_filter: tuple[str, str] | None
    relationships: list[Relationship] = field(default_factory=list)

    def edges(self, *labels: str) -> list[Relationship]:
        return [r for r in self.relationships if not labels or r.label in labels]

    def label(self, row: str, col: str) -> str:
        for r in self.relationships:
            if (r.row, r.col) == (row, col) or (
                self.role_filter is None and (r.row, r.col) == (col, row)
            ):
                return r.label
        raise KeyError((row, col))


def classify_relationships(
    dev_pairs: DeviationMatrix,
    dev_length: DeviationMatrix,
    thresholds: Thresholds = Thresholds(),
) -> PolarityGraph:
    if dev_pairs.groups != dev_length.groups or dev_pairs.deviation.shape != dev_length.deviation.shape:
        raise ValueError("deviation matrices are not aligned")
    if dev_pairs.role_filter != dev_length.role_filter:
        raise ValueError("deviation matrices use different role filters")
    groups = dev_pairs.groups
    graph = PolarityGraph(dev_pairs.scheme, thresholds, dev_pairs.role_filter)
    symmetric = dev_pairs.symmetric
    for i, g_i in enumerate(groups):
        for j, g_j in enumerate(groups):
            if i == j or (symmetric and j < i):
                continue
            fp = float(dev_pairs.deviation[i, j])
            fl = float(dev_length.deviation[i, j])
            graph.relationships.append(Relationship(g_i, g_j, classify(fp, fl, thresholds), fp, fl))
    return graph


def correlation(series_a, series_b) -> float:
    """Pearson correlation; NaN (with a warning) when either series is constant."""
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("series must be 1-d and of equal length")
    if len(a) < 2:
        log.warning("correlation undefined for fewer than 2 observations")
        return math.nan
    da = a - a.mean()
    db = b - b.mean()
    var_a = float(da @ da)
    var_b = float(db @ db)
    if var_a == 0 or var_b == 0:
        log.warning("correlation undefined: zero variance")
        return math.nan
    r = float(da @ db) / math.sqrt(var_a * var_b)
    return max(-1.0, min(1.0, r))


__all__ = [
    "AffinityMatrix",
    "DeviationMatrix",
    "IntroversionReport",
    "PARAMETERS",
    "PolarityGraph",
    "Relationship",
    "Thresholds",
    "affinity_density",
    "affinity_deviation",
    "classify",
    "classify_relationships",
    "correlation",
    "daily_cross_counts",
    "daily_expected",
    "deviation_matrix",
    "factor",
    "introversion_factor",
    "pairs_baseline_ratio",
    "ratio",
    "scheme_groups",
]
