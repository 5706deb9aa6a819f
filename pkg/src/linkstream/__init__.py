"""Link-stream analysis of face-to-face contact data in structured populations."""

__version__ = "0.1.0"

from .clock import Clock
from .errors import InputError, InvariantViolation, LinkStreamError, MissingMembershipError
from .grouping import (
    PATIENT,
    STAFF,
    GroupSemiCounts,
    NodeAttributes,
    Population,
    RoleClassTable,
    classify_pair,
    group_semi_counts,
    role_class_table,
)
from .metrics import (
    Thresholds,
    affinity_density,
    affinity_deviation,
    classify,
    classify_relationships,
    correlation,
    deviation_matrix,
    introversion_factor,
)
from .nullmodels import (
    ConfigExpectation,
    UniformNetwork,
    config_expectation,
    config_monte_carlo,
    contact_uniform,
    full_uniform,
    length_uniform,
)
from .stream import (
    Contact,
    LinkStream,
    SlotOccurrence,
    TimePeriod,
    aggregate,
    merge_slots,
    partition,
    restrict,
    stream_stats,
)
from .temporal import hourly_activity, per_active_decomposition

__all__ = [
    "Clock",
    "ConfigExpectation",
    "Contact",
    "GroupSemiCounts",
    "InputError",
    "InvariantViolation",
    "LinkStream",
    "LinkStreamError",
    "MissingMembershipError",
    "NodeAttributes",
    "PATIENT",
    "Population",
    "RoleClassTable",
    "STAFF",
    "SlotOccurrence",
    "Thresholds",
    "TimePeriod",
    "UniformNetwork",
    "affinity_density",
    "affinity_deviation",
    "aggregate",
    "classify",
    "classify_pair",
    "classify_relationships",
    "config_expectation",
    "config_monte_carlo",
    "contact_uniform",
    "correlation",
    "deviation_matrix",
    "full_uniform",
    "group_semi_counts",
    "hourly_activity",
    "introversion_factor",
    "length_uniform",
    "merge_slots",
    "partition",
    "per_active_decomposition",
    "restrict",
    "role_class_table",
    "stream_stats",
]
