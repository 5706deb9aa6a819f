"""Reference networks used as denominators of introversion and deviation factors.

Three uniform networks spread the totals of a stream over node pairs:

* full-uniform: complete graph on V(L), every couple gets the same share of
  adjacency pairs, contacts and cumulated length;
* contact-uniform: real adjacency pairs, each with the mean number of
  contacts per pair;
* length-uniform: real adjacency pairs and real contact counts, every
  contact lasting the mean contact length.

Values are exact :class:`fractions.Fraction` so conservation holds exactly.

The group-level configuration model matches semi-units at random; the
expected number of units between groups ``i`` and ``j`` is
``|D_i| |D_j| / |D|``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InputError, InvariantViolation
from .grouping import PARAMETERS, GroupSemiCounts, check_parameter
from .stream import LinkStream, aggregate, canonical_pair, stream_stats

FULL_UNIFORM = "full-uniform"
CONTACT_UNIFORM = "contact-uniform"
LENGTH_UNIFORM = "length-uniform"


@dataclass(frozen=True)
class UniformNetwork:
    """A uniformised aggregated network.

    For the full-uniform network ``pairs`` is ``None`` (the carrier is the
    complete graph on ``nodes``) and ``constant`` holds the per-couple
    values. Otherwise ``per_pair`` maps each real adjacency pair to its
    values; a parameter the definition leaves unset is absent.
    """

    kind: str
    nodes: frozenset
    constant: dict | None = None
    per_pair: dict | None = None

    @property
    def n_couples(self) -> int:
        if self.per_pair is not None:
            return len(self.per_pair)
        n = len(self.nodes)
        return n * (n - 1) // 2

    def value(self, pair, parameter: str) -> Fraction:
        check_parameter(parameter)
        a, b = canonical_pair(*pair)
        if self.per_pair is None:
            if a in self.nodes and b in self.nodes:
                return self.constant[parameter]
            return Fraction(0)
        values = self.per_pair.get((a, b))
        if values is None:
            return Fraction(0)
        return values[parameter]

    def total(self, parameter: str) -> Fraction:
        check_parameter(parameter)
        if self.per_pair is None:
            return self.constant[parameter] * self.n_couples
        return sum((v[parameter] for v in self.per_pair.values()), Fraction(0))

    def parameters(self) -> tuple[str, ...]:
        if self.per_pair is None:
            return tuple(self.constant)
        first = next(iter(self.per_pair.values()), {})
        return tuple(p for p in PARAMETERS if p in first)


def _check_conservation(net: UniformNetwork, stream: LinkStream, parameters) -> None:
    stats = stream_stats(stream)
    real = {"pairs": stats.n_pairs, "contacts": stats.n_contacts, "length": stats.cumul_length}
    for p in parameters:
        if net.total(p) != real[p]:
            raise InvariantViolation(f"{net.kind} network does not conserve {p}: {net.total(p)} != {real[p]}")


def full_uniform(stream: LinkStream) -> UniformNetwork:
    """Complete graph on V(L) with ``2X / (|V|(|V|-1))`` on every couple."""
    n = len(stream.nodes)
    if n < 2:
        raise InputError(f"full-uniform network needs at least 2 nodes, stream has {n}")
    stats = stream_stats(stream)
    couples = n * (n - 1) // 2
    constant = {
        "pairs": Fraction(stats.n_pairs, couples),
        "contacts": Fraction(stats.n_contacts, couples),
        "length": Fraction(stats.cumul_length, couples),
    }
    net = UniformNetwork(FULL_UNIFORM, stream.nodes, constant=constant)
    _check_conservation(net, stream, PARAMETERS)
    return net


def contact_uniform(stream: LinkStream) -> UniformNetwork:
    """Real adjacency pairs, each with ``#cont(L) / #pairs(L)`` contacts."""
    stats = stream_stats(stream)
    if stats.n_pairs == 0:
        raise InputError("contact-uniform network of an empty stream is undefined")
    mean = Fraction(stats.n_contacts, stats.n_pairs)
    per_pair = {pair: {"pairs": Fraction(1), "contacts": mean} for pair in stream.pairs}
    net = UniformNetwork(CONTACT_UNIFORM, stream.nodes, per_pair=per_pair)
    _check_conservation(net, stream, ("pairs", "contacts"))
    return net


def length_uniform(stream: LinkStream) -> UniformNetwork:
    """Real pairs and contact counts; every contact lasts the mean contact length."""
    stats = stream_stats(stream)
    if stats.n_contacts == 0:
        raise InputError("length-uniform network of an empty stream is undefined")
    mean_length = Fraction(stats.cumul_length, stats.n_contacts)
    per_pair = {
        pair: {"pairs": Fraction(1), "contacts": Fraction(w.n_contacts), "length": w.n_contacts * mean_length}
        for pair, w in aggregate(stream).items()
    }
    net = UniformNetwork(LENGTH_UNIFORM, stream.nodes, per_pair=per_pair)
    _check_conservation(net, stream, PARAMETERS)
    return net


@dataclass(frozen=True)
class ConfigExpectation:
    """Expected units between distinct groups under random semi-unit matching.

    ``matrix[i, j] = semi_totals[i] * semi_totals[j] / semi_totals.sum()``
    for ``i != j``; the diagonal is NaN (not reported).
    """

    scheme: str
    parameter: str
    groups: tuple[str, ...]
    semi_totals: np.ndarray
    matrix: np.ndarray


def expected_cross(semi_totals) -> np.ndarray:
    d = np.asarray(semi_totals, dtype=float)
    if d.ndim != 1:
        raise ValueError("semi_totals must be a vector")
    if (d < 0).any():
        raise ValueError("semi-unit totals must be non-negative")
    total = d.sum()
    if total <= 0:
        raise InputError("configuration model needs a positive total of semi-units")
    m = np.outer(d, d) / total
    np.fill_diagonal(m, np.nan)
    return m


def config_expectation(
    counts: GroupSemiCounts,
    parameter: str,
    include_internal: bool = True,
) -> ConfigExpectation:
    """Configuration-model expectation for ``parameter`` (``pairs`` or ``length``;
    ``contacts`` works the same way).

    By default a group's semi-units include those of its internal units.
    ``include_internal=False`` uses external semi-units only.
    """
    check_parameter(parameter)
    d = counts.semi_total(parameter) if include_internal else counts.external(parameter)
    return ConfigExpectation(counts.scheme, parameter, counts.groups, d, expected_cross(d))


def config_monte_carlo(
    semi_totals,
    samples: int,
    seed: int,
    shards: int = 1,
    batch: int = 2_000,
) -> np.ndarray:
    """Mean unit counts from uniform random perfect matchings of all semi-units.

    Off-diagonal cell ``(i, j)`` is the mean number of matched pairs between
    groups ``i`` and ``j``; the diagonal holds mean internal matches.
    Samples are split across ``shards`` independent seeded sub-streams whose
    tallies are summed, so the result depends only on ``(seed, shards)``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    d = np.asarray(semi_totals, dtype=np.int64)
    if (d < 0).any():
        raise ValueError("semi-unit totals must be non-negative")
    n = int(d.sum())
    if n % 2:
        raise ValueError(f"cannot build a perfect matching of an odd number ({n}) of semi-units")
    k = len(d)
    labels = np.repeat(np.arange(k), d)
    tally = np.zeros(k * k, dtype=np.int64)
    if n == 0:
        return np.zeros((k, k))
    shard_sizes = [samples // shards + (1 if s < samples % shards else 0) for s in range(shards)]
    for child, size in zip(np.random.SeedSequence(seed).spawn(shards), shard_sizes):
        rng = np.random.default_rng(child)
        done = 0
        while done < size:
            b = min(batch, size - done)
            perm = rng.permuted(np.broadcast_to(labels, (b, n)), axis=1)
            idx = perm[:, 0::2] * k + perm[:, 1::2]
            tally += np.bincount(idx.ravel(), minlength=k * k)
            done += b
    t = tally.reshape(k, k)
    out = (t + t.T).astype(float)
    np.fill_diagonal(out, np.diag(t))
    return out / samples
