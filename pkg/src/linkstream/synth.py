"""Seeded synthetic slot-occurrence data with planted group structure.

Each node pair is a two-state chain over 30 s slots. An inactive pair
switches on with probability ``base * affinity * hour_mod * role_mod``; an
active pair stays on with the persistence probability, so contact lengths
are geometric with mean ``30 / (1 - persistence)`` seconds.

The uniform draw for ``(slot, pair)`` is the SplitMix64 output at counter
``slot * n_pairs + pair`` under the seed, so the data do not depend on the
order in which slots are generated.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
from numba import njit

from .clock import HOUR, parse_epoch
from .errors import InputError
from .grouping import PATIENT, STAFF, NodeAttributes, Population
from .stream import SLOT, Contact, LinkStream, SlotOccurrence

_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


class ClampWarning(UserWarning):
    """A composed activation probability exceeded 1 and was clamped."""


def seed_offset(seed: int) -> int:
    """Scrambled 64-bit start state, so nearby seeds give unrelated streams."""
    z = (seed * _GAMMA + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def splitmix64(counters: np.ndarray, seed: int) -> np.ndarray:
    """SplitMix64 outputs for the given counters (uint64 array)."""
    z = counters.astype(np.uint64) * np.uint64(_GAMMA) + np.uint64(seed_offset(seed))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniforms(counters: np.ndarray, seed: int) -> np.ndarray:
    """Doubles in [0, 1) from the top 53 bits of :func:`splitmix64`."""
    return (splitmix64(counters, seed) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass
class GroupSpec:
    name: str
    patients: int = 0
    staff: int = 0

    def __post_init__(self):
        if self.patients < 0 or self.staff < 0:
            raise InputError(f"group {self.name}: sizes must be non-negative")


@dataclass
class SynthConfig:
    seed: int
    days: int
    groups: list[GroupSpec]
    base_rate: float
    persistence: float = 0.8
    affinity: dict = field(default_factory=dict)
    hourly_profile: list[float] = field(default_factory=lambda: [1.0] * 24)
    role_modulation: dict = field(default_factory=dict)
    epoch: str = "2009-07-06T00:00:00+02:00"
    utc_offset: int = 7200

    def __post_init__(self):
        self.groups = [g if isinstance(g, GroupSpec) else GroupSpec(**g) for g in self.groups]
        self.affinity = {
            tuple(k.split("|")) if isinstance(k, str) else tuple(k): float(v) for k, v in self.affinity.items()
        }
        if self.days < 1:
            raise InputError("days must be >= 1")
        if not 0 <= self.persistence < 1:
            raise InputError("persistence must be in [0, 1)")
        if self.base_rate < 0 or any(v < 0 for v in self.affinity.values()):
            raise InputError("rates and multipliers must be non-negative")
        if len(self.hourly_profile) != 24 or any(v < 0 for v in self.hourly_profile):
            raise InputError("hourly_profile needs 24 non-negative multipliers")
        for role, profile in self.role_modulation.items():
            if role not in (PATIENT, STAFF):
                raise InputError(f"unknown role {role!r} in role_modulation")
            if len(profile) != 24 or any(v < 0 for v in profile):
                raise InputError(f"role_modulation[{role}] needs 24 non-negative multipliers")
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise InputError("group names must be unique")

    def affinity_of(self, g: str, h: str) -> float:
        return self.affinity.get((g, h), self.affinity.get((h, g), 1.0))

    def to_json(self) -> str:
        data = asdict(self)
        data["affinity"] = {f"{g}|{h}": v for (g, h), v in self.affinity.items()}
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> SynthConfig:
        return cls(**json.loads(text))


def node_ids(config: SynthConfig) -> list[tuple[str, str, str]]:
    """``(node, role, group)`` for every synthetic node, sorted by node id."""
    out = []
    for g in config.groups:
        out += [(f"{g.name}-pa{k:03d}", PATIENT, g.name) for k in range(g.patients)]
        out += [(f"{g.name}-st{k:03d}", STAFF, g.name) for k in range(g.staff)]
    return sorted(out)


@dataclass
class SynthOutput:
    """Generated data: ``(slot_start, pair index)`` arrays plus node metadata."""

    config: SynthConfig
    nodes: list[tuple[str, str, str]]
    pairs: np.ndarray  # (n_pairs, 2) indices into nodes
    slot_starts: np.ndarray
    pair_index: np.ndarray
    clamped: list = field(default_factory=list)

    @property
    def population(self) -> Population:
        return Population(NodeAttributes(n, r, {"service": g}) for n, r, g in self.nodes)

    def occurrences(self) -> list[SlotOccurrence]:
        ids = [n for n, _, _ in self.nodes]
        return [
            SlotOccurrence(ids[self.pairs[p, 0]], ids[self.pairs[p, 1]], int(t))
            for t, p in zip(self.slot_starts, self.pair_index)
        ]

    def stream(self) -> LinkStream:
        """Merged contacts, built directly from the occurrence arrays."""
        if len(self.slot_starts) == 0:
            return LinkStream(())
        order = np.lexsort((self.slot_starts, self.pair_index))
        p = self.pair_index[order]
        t = self.slot_starts[order]
        fresh = np.ones(len(t), dtype=bool)
        fresh[1:] = (p[1:] != p[:-1]) | (t[1:] != t[:-1] + SLOT)
        first = np.flatnonzero(fresh)
        last = np.append(first[1:], len(t)) - 1
        ids = [n for n, _, _ in self.nodes]
        a, b = self.pairs[p[first], 0], self.pairs[p[first], 1]
        contacts = tuple(
            Contact(ids[i], ids[j], int(s), int(e) + SLOT) for i, j, s, e in zip(a, b, t[first], t[last])
        )
        return LinkStream(contacts)

    def __len__(self) -> int:
        return len(self.slot_starts)


def _activation_table(config: SynthConfig, nodes, pairs) -> tuple[np.ndarray, list]:
    """(24, n_pairs) switch-on probabilities, clamped to 1."""
    roles = [r for _, r, _ in nodes]
    groups = [g for _, _, g in nodes]
    hourly = np.asarray(config.hourly_profile, dtype=float)
    role_mod = {r: np.asarray(config.role_modulation.get(r, [1.0] * 24), dtype=float) for r in (PATIENT, STAFF)}
    table = np.empty((24, len(pairs)))
    for p, (i, j) in enumerate(pairs):
        aff = config.affinity_of(groups[i], groups[j])
        table[:, p] = config.base_rate * aff * hourly * role_mod[roles[i]] * role_mod[roles[j]]
    clamped = []
    over = table > 1
    if over.any():
        for h, p in zip(*np.nonzero(over)):
            i, j = pairs[p]
            clamped.append({"hour": int(h), "pair": (nodes[i][0], nodes[j][0]), "probability": float(table[h, p])})
        warnings.warn(f"{len(clamped)} activation probabilities above 1 were clamped", ClampWarning, stacklevel=3)
        table = np.minimum(table, 1.0)
    return table, clamped


@njit(cache=True)
def _mix(counter, seed_term):
    z = counter * np.uint64(0x9E3779B97F4A7C15) + seed_term
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _simulate(seed_term, n_slots, n_pairs, slot_hours, thresholds, stay_threshold):
    # u = m / 2**53 with m the top 53 bits; u < q  <=>  m < ceil(q * 2**53)
    state = np.zeros(n_pairs, dtype=np.bool_)
    scratch = np.empty(n_pairs, dtype=np.int64)
    cap = 1024
    out_slot = np.empty(cap, dtype=np.int64)
    out_pair = np.empty(cap, dtype=np.int64)
    n = 0
    for s in range(n_slots):
        row = thresholds[slot_hours[s]]
        base = np.uint64(s) * np.uint64(n_pairs)
        k = 0
        for p in range(n_pairs):
            m = _mix(base + np.uint64(p), seed_term) >> np.uint64(11)
            limit = stay_threshold if state[p] else row[p]
            on = m < limit
            state[p] = on
            scratch[k] = p
            k += on
        if k:
            if n + k > cap:
                cap = max(2 * cap, n + k)
                grown_slot = np.empty(cap, dtype=np.int64)
                grown_pair = np.empty(cap, dtype=np.int64)
                grown_slot[:n] = out_slot[:n]
                grown_pair[:n] = out_pair[:n]
                out_slot = grown_slot
                out_pair = grown_pair
            out_slot[n:n + k] = s
            out_pair[n:n + k] = scratch[:k]
            n += k
    return out_slot[:n], out_pair[:n]


def _integer_threshold(q):
    return np.ceil(np.asarray(q, dtype=float) * float(1 << 53)).astype(np.uint64)


def _simulate_reference(seed, n_slots, n_pairs, slot_hours, table, stay, block_cells=1 << 22):
    """Vectorised numpy version of :func:`_simulate`, kept as a cross-check."""
    state = np.zeros(n_pairs, dtype=bool)
    block = max(1, block_cells // max(n_pairs, 1))
    pair_counter = np.arange(n_pairs, dtype=np.uint64)
    slots, idx = [], []
    for s0 in range(0, n_slots, block):
        s1 = min(n_slots, s0 + block)
        counters = np.arange(s0, s1, dtype=np.uint64)[:, None] * np.uint64(n_pairs) + pair_counter
        u = uniforms(counters, seed)
        for s in range(s0, s1):
            row = u[s - s0]
            state = np.where(state, row < stay, row < table[slot_hours[s]])
            on = np.flatnonzero(state)
            slots.append(np.full(len(on), s, dtype=np.int64))
            idx.append(on.astype(np.int64))
    if not slots:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(slots), np.concatenate(idx)


def generate(config: SynthConfig, reference: bool = False) -> SynthOutput:
    """Simulate ``config.days`` days of 30 s slots starting at stream time 0
    (the configured epoch). ``reference=True`` uses the slow numpy path."""
    nodes = node_ids(config)
    pairs = np.array(list(combinations(range(len(nodes)), 2)), dtype=np.int64).reshape(-1, 2)
    n_pairs = len(pairs)
    n_slots = config.days * 86_400 // SLOT
    table, clamped = _activation_table(config, nodes, pairs)
    epoch = parse_epoch(config.epoch)
    times = np.arange(n_slots, dtype=np.int64) * SLOT
    slot_hours = ((epoch + config.utc_offset + times) // HOUR) % 24
    if n_pairs == 0 or config.base_rate == 0:
        empty = np.zeros(0, dtype=np.int64)
        return SynthOutput(config, nodes, pairs, empty, empty.copy(), clamped)
    if reference:
        slot_idx, pair_index = _simulate_reference(
            config.seed, n_slots, n_pairs, slot_hours, table, config.persistence
        )
    else:
        seed_term = np.uint64(seed_offset(config.seed))
        slot_idx, pair_index = _simulate(
            seed_term,
            n_slots,
            n_pairs,
            slot_hours,
            np.ascontiguousarray(_integer_threshold(table)),
            _integer_threshold(config.persistence)[()],
        )
    return SynthOutput(config, nodes, pairs, slot_idx * SLOT, pair_index, clamped)
