"""Link streams built from 30-second slot occurrences.

A link stream is a set of contacts ``(a, b, t_s, t_e)``: maximal intervals
during which the unordered pair ``{a, b}`` was seen in consecutive slots.
Times are integer seconds; all slot arithmetic stays integral.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, NamedTuple

from .errors import InputError, InvariantViolation

SLOT = 30

Node = Hashable
Pair = tuple  # canonical (a, b) with a < b


def canonical_pair(a, b) -> Pair:
    if a == b:
        raise InputError(f"self-pair {a!r}")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True, slots=True, order=True)
class SlotOccurrence:
    """One undirected pair observed during the 30 s slot starting at ``slot_start``."""

    node_a: Node
    node_b: Node
    slot_start: int

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise InputError(f"self-pair {self.node_a!r} at slot {self.slot_start}")
        if not isinstance(self.slot_start, int) or isinstance(self.slot_start, bool):
            raise InputError(f"slot_start must be an integer, got {self.slot_start!r}")
        if self.slot_start % SLOT:
            raise InputError(
                f"slot_start {self.slot_start} of pair ({self.node_a!r}, {self.node_b!r}) "
                f"is not aligned to {SLOT}s"
            )
        if self.node_b < self.node_a:
            a, b = self.node_b, self.node_a
            object.__setattr__(self, "node_a", a)
            object.__setattr__(self, "node_b", b)

    @property
    def pair(self) -> Pair:
        return (self.node_a, self.node_b)


@dataclass(frozen=True, slots=True, order=True)
class Contact:
    """Maximal interval ``[t_s, t_e]`` of co-presence of a node pair."""

    a: Node
    b: Node
    t_s: int
    t_e: int

    def __post_init__(self):
        if self.a == self.b:
            raise InputError(f"self-pair {self.a!r}")
        if not self.t_s < self.t_e:
            raise InputError(f"contact ({self.a!r}, {self.b!r}) has t_s={self.t_s} >= t_e={self.t_e}")
        if self.b < self.a:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def pair(self) -> Pair:
        return (self.a, self.b)

    @property
    def length(self) -> int:
        return self.t_e - self.t_s


@dataclass(frozen=True, slots=True)
class TimePeriod:
    """Closed time period ``[t_1, t_2]`` with ``t_1 < t_2``."""

    t_1: int
    t_2: int

    def __post_init__(self):
        if not self.t_1 < self.t_2:
            raise InputError(f"invalid time period [{self.t_1}, {self.t_2}]")

    @property
    def duration(self) -> int:
        return self.t_2 - self.t_1

    def __contains__(self, other: TimePeriod) -> bool:
        return self.t_1 <= other.t_1 and other.t_2 <= self.t_2


class StreamStats(NamedTuple):
    n_pairs: int
    n_contacts: int
    cumul_length: int


class PairWeight(NamedTuple):
    n_contacts: int
    cumul_length: int


@dataclass(frozen=True, eq=False)
class LinkStream:
    """Immutable collection of contacts.

    Contacts are kept sorted by ``(a, b, t_s)``. The constructor checks that
    contacts of the same pair neither overlap nor touch; touching contacts
    would have been a single contact. Use :func:`merge_contacts` to coalesce
    arbitrary intervals first.
    """

    contacts: tuple[Contact, ...]
    span: TimePeriod | None = None
    _by_pair: dict = field(init=False, repr=False)
    _nodes: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        contacts = tuple(sorted(self.contacts))
        object.__setattr__(self, "contacts", contacts)
        by_pair: dict[Pair, list[Contact]] = defaultdict(list)
        for c in contacts:
            previous = by_pair[c.pair]
            if previous and c.t_s <= previous[-1].t_e:
                raise InputError(
                    f"contacts {previous[-1]} and {c} of the same pair overlap or touch"
                )
            previous.append(c)
        object.__setattr__(self, "_by_pair", {p: tuple(cs) for p, cs in by_pair.items()})
        object.__setattr__(self, "_nodes", frozenset(n for p in by_pair for n in p))
        if self.span is None and contacts:
            span = TimePeriod(min(c.t_s for c in contacts), max(c.t_e for c in contacts))
            object.__setattr__(self, "span", span)
        elif self.span is not None and contacts:
            if min(c.t_s for c in contacts) < self.span.t_1 or max(c.t_e for c in contacts) > self.span.t_2:
                raise InputError(f"contacts extend beyond the declared span {self.span}")

    @classmethod
    def empty(cls, span: TimePeriod | None = None) -> LinkStream:
        return cls((), span)

    def __len__(self) -> int:
        return len(self.contacts)

    def __iter__(self) -> Iterator[Contact]:
        return iter(self.contacts)

    def __bool__(self) -> bool:
        return bool(self.contacts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinkStream):
            return NotImplemented
        return self.contacts == other.contacts and self.span == other.span

    def __hash__(self):
        return hash((self.contacts, self.span))

    def __repr__(self) -> str:
        return f"LinkStream({len(self.contacts)} contacts, {len(self._by_pair)} pairs, span={self.span})"

    @property
    def nodes(self) -> frozenset:
        """V(L): every node involved in at least one contact."""
        return self._nodes

    @property
    def pairs(self) -> frozenset:
        """E(L): the adjacency pairs."""
        return frozenset(self._by_pair)

    def contacts_of(self, pair) -> tuple[Contact, ...]:
        return self._by_pair.get(canonical_pair(*pair), ())

    def by_pair(self) -> dict[Pair, tuple[Contact, ...]]:
        return dict(self._by_pair)

    def check(self) -> None:
        """Recompute derived sets and compare them with the cached ones."""
        nodes = set()
        pairs = set()
        for c in self.contacts:
            nodes.update(c.pair)
            pairs.add(c.pair)
            if c.a >= c.b or c.t_s >= c.t_e:
                raise InvariantViolation(f"malformed contact {c}")
        if nodes != self._nodes or pairs != set(self._by_pair):
            raise InvariantViolation("cached node or pair sets are stale")

    def filter(self, keep) -> LinkStream:
        """Sub-stream of the contacts for which ``keep(contact)`` is true."""
        return LinkStream(tuple(c for c in self.contacts if keep(c)), self.span)


def merge_slots(occurrences: Iterable[SlotOccurrence], span: TimePeriod | None = None) -> LinkStream:
    """Group consecutive slot occurrences of each pair into contacts.

    Duplicate occurrences collapse. A run of slots ``s, s+30, ..., s+30k``
    becomes the contact ``(a, b, s, s+30(k+1))``.
    """
    slots: dict[Pair, set[int]] = defaultdict(set)
    for occ in occurrences:
        if not isinstance(occ, SlotOccurrence):
            raise InputError(f"expected a SlotOccurrence, got {occ!r}")
        slots[occ.pair].add(occ.slot_start)
    contacts = []
    for (a, b), times in slots.items():
        ordered = sorted(times)
        start = prev = ordered[0]
        for t in ordered[1:]:
            if t != prev + SLOT:
                contacts.append(Contact(a, b, start, prev + SLOT))
                start = t
            prev = t
        contacts.append(Contact(a, b, start, prev + SLOT))
    return LinkStream(tuple(contacts), span)


def merge_contacts(contacts: Iterable[Contact], span: TimePeriod | None = None) -> LinkStream:
    """Coalesce overlapping or touching intervals of the same pair."""
    by_pair: dict[Pair, list[Contact]] = defaultdict(list)
    for c in contacts:
        by_pair[c.pair].append(c)
    merged = []
    for (a, b), cs in by_pair.items():
        cs.sort(key=lambda c: c.t_s)
        start, end = cs[0].t_s, cs[0].t_e
        for c in cs[1:]:
            if c.t_s <= end:
                end = max(end, c.t_e)
            else:
                merged.append(Contact(a, b, start, end))
                start, end = c.t_s, c.t_e
        merged.append(Contact(a, b, start, end))
    return LinkStream(tuple(merged), span)


def explode(stream: LinkStream) -> Iterator[SlotOccurrence]:
    """Decompose every contact back into its 30 s slot occurrences."""
    for c in stream:
        if c.t_s % SLOT or c.t_e % SLOT:
            raise InputError(f"contact {c} is not slot aligned")
        for t in range(c.t_s, c.t_e, SLOT):
            yield SlotOccurrence(c.a, c.b, t)


def _clip(c: Contact, t_1: int, t_2: int) -> Contact | None:
    s = max(c.t_s, t_1)
    e = min(c.t_e, t_2)
    if s < e:
        if s == c.t_s and e == c.t_e:
            return c
        return Contact(c.a, c.b, s, e)
    return None


def _clip_span(span: TimePeriod | None, period: TimePeriod) -> TimePeriod | None:
    # no span (an empty stream) or no overlap: the result has no span either
    if span is None:
        return None
    t_1, t_2 = max(span.t_1, period.t_1), min(span.t_2, period.t_2)
    return TimePeriod(t_1, t_2) if t_1 < t_2 else None


def restrict(stream: LinkStream, period: TimePeriod) -> LinkStream:
    """Restriction of ``stream`` to ``period``.

    Each contact is intersected with the period; empty (zero-length)
    intersections are dropped.
    """
    kept = []
    for c in stream:
        clipped = _clip(c, period.t_1, period.t_2)
        if clipped is not None:
            kept.append(clipped)
    return LinkStream(tuple(kept), _clip_span(stream.span, period))


def stream_stats(stream: LinkStream) -> StreamStats:
    return StreamStats(len(stream.pairs), len(stream), sum(c.length for c in stream))


def aggregate(stream: LinkStream) -> dict[Pair, PairWeight]:
    """Aggregated network: each adjacency pair with its contact count and cumulated length."""
    return {
        pair: PairWeight(len(cs), sum(c.length for c in cs))
        for pair, cs in stream.by_pair().items()
    }


def partition(
    stream: LinkStream,
    bucket: int,
    origin: int = 0,
    span: TimePeriod | None = None,
) -> list[tuple[TimePeriod, LinkStream]]:
    """Tile ``span`` (default: the stream's span) with buckets of ``bucket`` seconds.

    Bucket ``k`` covers ``[origin + k*bucket, origin + (k+1)*bucket]`` and
    holds the restriction of the stream to it. Buckets are effectively
    half-open: a contact that ends exactly on a boundary produces a
    zero-length piece in the later bucket, which restriction drops.
    """
    if bucket <= 0:
        raise InputError(f"bucket length must be positive, got {bucket}")
    span = span or stream.span
    if span is None:
        return []
    k_first = (span.t_1 - origin) // bucket
    k_last = -((origin - span.t_2) // bucket) - 1  # ceil((t_2 - origin) / bucket) - 1
    spans = {}
    for k in range(k_first, k_last + 1):
        period = TimePeriod(origin + k * bucket, origin + (k + 1) * bucket)
        spans[k] = (period, _clip_span(span, period))
    pieces: dict[int, list[Contact]] = defaultdict(list)
    for c in stream:
        lo = max(k_first, (c.t_s - origin) // bucket)
        hi = min(k_last, (c.t_e - 1 - origin) // bucket)
        for k in range(lo, hi + 1):
            bucket_span = spans[k][1]
            if bucket_span is None:
                continue
            clipped = _clip(c, bucket_span.t_1, bucket_span.t_2)
            if clipped is not None:
                pieces[k].append(clipped)
    return [
        (period, LinkStream(tuple(pieces.get(k, ())), bucket_span))
        for k, (period, bucket_span) in spans.items()
    ]


__all__ = [
    "SLOT",
    "Contact",
    "LinkStream",
    "PairWeight",
    "SlotOccurrence",
    "StreamStats",
    "TimePeriod",
    "aggregate",
    "canonical_pair",
    "explode",
    "merge_contacts",
    "merge_slots",
    "partition",
    "restrict",
    "stream_stats",
]
