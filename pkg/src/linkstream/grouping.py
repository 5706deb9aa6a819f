"""Node roles, group memberships and semi-unit accounting per group.

Every statistic is expressed in *semi-units*: a pair, contact or second of
contact between ``u`` and ``v`` gives one semi-unit to ``u`` and one to
``v``. An internal unit therefore adds two semi-units to its group, an
external unit one to each endpoint's group.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import InputError, MissingMembershipError
from .stream import LinkStream, aggregate

log = logging.getLogger(__name__)

PATIENT = "PA"
STAFF = "ST"
ROLES = (PATIENT, STAFF)
PARAMETERS = ("pairs", "contacts", "length")
ROLE_CLASSES = ("PA-PA", "PA-ST", "ST-ST")


def natural_key(label) -> tuple:
    """Sort key putting ``S2`` before ``S10``."""
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", str(label)))


def check_parameter(parameter: str) -> None:
    if parameter not in PARAMETERS:
        raise ValueError(f"unknown parameter {parameter!r}; expected one of {PARAMETERS}")


@dataclass(frozen=True)
class NodeAttributes:
    node: str
    role: str
    memberships: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.role not in ROLES:
            raise InputError(f"node {self.node!r}: unknown role {self.role!r}")
        if self.role == PATIENT and "category" in self.memberships:
            raise InputError(f"node {self.node!r}: patients carry no category")


class Population:
    """Attributes of every known node, keyed by node id."""

    def __init__(self, attributes: Iterable[NodeAttributes] = ()):
        self._attrs: dict = {}
        for a in attributes:
            if a.node in self._attrs:
                raise InputError(f"duplicate node {a.node!r}")
            self._attrs[a.node] = a

    @classmethod
    def from_mapping(cls, roles: Mapping, **schemes: Mapping) -> Population:
        """Build from ``{node: role}`` plus one ``{node: group}`` mapping per scheme."""
        return cls(
            NodeAttributes(n, r, {s: m[n] for s, m in schemes.items() if n in m})
            for n, r in roles.items()
        )

    def __contains__(self, node) -> bool:
        return node in self._attrs

    def __iter__(self):
        return iter(self._attrs.values())

    def __len__(self) -> int:
        return len(self._attrs)

    def __eq__(self, other):
        return isinstance(other, Population) and self._attrs == other._attrs

    def __getitem__(self, node) -> NodeAttributes:
        try:
            return self._attrs[node]
        except KeyError:
            raise InputError(f"node {node!r} has no attributes") from None

    def role(self, node) -> str:
        return self[node].role

    def group(self, node, scheme: str) -> str:
        attrs = self._attrs.get(node)
        if attrs is None or scheme not in attrs.memberships:
            raise MissingMembershipError(node, scheme)
        return attrs.memberships[scheme]

    def group_or_none(self, node, scheme: str):
        attrs = self._attrs.get(node)
        return None if attrs is None else attrs.memberships.get(scheme)

    def schemes(self) -> list[str]:
        return sorted({s for a in self._attrs.values() for s in a.memberships})

    def groups(self, scheme: str) -> tuple[str, ...]:
        labels = {a.memberships[scheme] for a in self._attrs.values() if scheme in a.memberships}
        return tuple(sorted(labels, key=natural_key))


def classify_pair(pair, population: Population, scheme: str) -> tuple[str, str, bool]:
    """Groups of both endpoints, canonically ordered, and whether they coincide."""
    a, b = pair
    g_a = population.group(a, scheme)
    g_b = population.group(b, scheme)
    if natural_key(g_b) < natural_key(g_a):
        g_a, g_b = g_b, g_a
    return g_a, g_b, g_a == g_b


def unit_weights(stream: LinkStream) -> dict:
    """Per adjacency pair, its weight for each parameter."""
    return {
        pair: {"pairs": 1, "contacts": w.n_contacts, "length": w.cumul_length}
        for pair, w in aggregate(stream).items()
    }


@dataclass
class GroupSemiCounts:
    """Group mixing counts for one grouping scheme.

    ``mixing[parameter]`` is a symmetric ``k x k`` integer matrix whose
    diagonal holds internal units and whose off-diagonal cell ``(i, j)``
    holds the units between groups ``i`` and ``j`` (each unordered unit is
    stored once in each of the two mirrored cells).
    """

    scheme: str
    groups: tuple[str, ...]
    mixing: dict[str, np.ndarray]
    excluded: dict[str, int]

    def index(self, group: str) -> int:
        return self.groups.index(group)

    def internal(self, parameter: str) -> np.ndarray:
        return np.diag(self.mixing[parameter]).copy()

    def external(self, parameter: str) -> np.ndarray:
        m = self.mixing[parameter]
        return m.sum(axis=1) - np.diag(m)

    def semi_total(self, parameter: str) -> np.ndarray:
        """``|D_i|`` (pairs) or ``|E_i|`` (length): ``2*int + ext`` per group."""
        m = self.mixing[parameter]
        return m.sum(axis=1) + np.diag(m)

    def total(self, parameter: str) -> int:
        """Units with both endpoints classified."""
        m = self.mixing[parameter]
        return int(np.triu(m).sum())

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "groups": list(self.groups),
            "excluded": dict(self.excluded),
            "parameters": {
                p: {
                    "internal": self.internal(p).tolist(),
                    "external": self.external(p).tolist(),
                    "semi_total": self.semi_total(p).tolist(),
                }
                for p in PARAMETERS
            },
        }


def group_semi_counts(
    stream: LinkStream,
    population: Population,
    scheme: str,
    groups: tuple[str, ...] | None = None,
    on_missing: str = "exclude",
) -> GroupSemiCounts:
    """Count internal and external units of each group for all three parameters.

    Units touching a node without a membership under ``scheme`` are left out
    and tallied in ``excluded`` (``on_missing="raise"`` turns them into an
    error instead). ``groups`` fixes the row order; by default every group of
    the scheme in ``population`` is used, in natural order.
    """
    groups = tuple(groups) if groups is not None else population.groups(scheme)
    index = {g: i for i, g in enumerate(groups)}
    k = len(groups)
    mixing = {p: np.zeros((k, k), dtype=np.int64) for p in PARAMETERS}
    excluded = dict.fromkeys(PARAMETERS, 0)
    for pair, weights in unit_weights(stream).items():
        g_a = population.group_or_none(pair[0], scheme)
        g_b = population.group_or_none(pair[1], scheme)
        if g_a is None or g_b is None:
            if on_missing == "raise":
                classify_pair(pair, population, scheme)
            for p in PARAMETERS:
                excluded[p] += weights[p]
            continue
        try:
            i, j = index[g_a], index[g_b]
        except KeyError as exc:
            raise InputError(f"group {exc.args[0]!r} is not among {groups}") from None
        for p in PARAMETERS:
            mixing[p][i, j] += weights[p]
            if i != j:
                mixing[p][j, i] += weights[p]
    if excluded["contacts"]:
        log.info("scheme %s: excluded %d contacts with unclassified endpoints", scheme, excluded["contacts"])
    return GroupSemiCounts(scheme, groups, mixing, excluded)


@dataclass
class RoleClassTable:
    """Distribution of one parameter over role classes.

    ``counts`` has one row per entry of ``rows`` (``("all",)`` or
    ``("ext", "int")``) and one column per entry of ``columns``;
    ``fractions`` is ``counts`` divided by the grand total.
    """

    parameter: str
    mode: str
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    counts: np.ndarray
    excluded: int = 0

    @property
    def total(self):
        return self.counts.sum()

    @property
    def fractions(self) -> np.ndarray:
        total = self.total
        if total == 0:
            return np.full(self.counts.shape, np.nan)
        return self.counts / total

    def column_totals(self) -> np.ndarray:
        return self.fractions.sum(axis=0)

    def as_dict(self) -> dict:
        fr = self.fractions
        return {
            "parameter": self.parameter,
            "mode": self.mode,
            "columns": list(self.columns),
            "rows": {r: dict(zip(self.columns, fr[i].tolist())) for i, r in enumerate(self.rows)},
            "all": dict(zip(self.columns, self.column_totals().tolist())),
            "excluded": self.excluded,
        }


def role_class_table(
    stream: LinkStream,
    population: Population,
    parameter: str,
    mode: str = "global",
    scheme: str | None = None,
) -> RoleClassTable:
    """PA/ST distribution of ``parameter``.

    ``mode="global"`` counts unordered units per class PA-PA, PA-ST, ST-ST.
    ``mode="PA"`` / ``"ST"`` is centred on that role: semi-units attached to
    nodes of the role, split by the partner's role, so a PA-ST unit counts
    in both centred tables. With ``scheme`` the rows split external and
    internal units; units with an endpoint outside the scheme are excluded.
    """
    check_parameter(parameter)
    if mode == "global":
        columns = ROLE_CLASSES
    elif mode in ROLES:
        columns = ROLES
    else:
        raise ValueError(f"mode must be 'global', 'PA' or 'ST', got {mode!r}")
    rows = ("ext", "int") if scheme else ("all",)
    counts = np.zeros((len(rows), len(columns)), dtype=np.int64)
    excluded = 0
    for pair, weights in unit_weights(stream).items():
        w = weights[parameter]
        r_a, r_b = population.role(pair[0]), population.role(pair[1])
        row = 0
        if scheme:
            g_a = population.group_or_none(pair[0], scheme)
            g_b = population.group_or_none(pair[1], scheme)
            if g_a is None or g_b is None:
                excluded += w
                continue
            row = int(g_a == g_b)
        if mode == "global":
            counts[row, ROLE_CLASSES.index("-".join(sorted((r_a, r_b))))] += w
        else:
            if r_a == mode:
                counts[row, ROLES.index(r_b)] += w
            if r_b == mode:
                counts[row, ROLES.index(r_a)] += w
    return RoleClassTable(parameter, mode, rows, columns, counts, excluded)


def role_scheme(population: Population, scheme: str) -> Population:
    """Copy of ``population`` with an extra scheme ``"<role>:<scheme>"`` whose
    groups are role classes such as ``PA:S1`` or ``ST:S7``."""
    name = f"role:{scheme}"
    out = []
    for a in population:
        memberships = dict(a.memberships)
        if scheme in a.memberships:
            memberships[name] = f"{a.role}:{a.memberships[scheme]}"
        out.append(NodeAttributes(a.node, a.role, memberships))
    return Population(out)
