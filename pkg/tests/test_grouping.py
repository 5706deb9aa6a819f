import random

import numpy as np
import pytest

from linkstream.errors import InputError, MissingMembershipError
from linkstream.grouping import (
    PARAMETERS,
    NodeAttributes,
    Population,
    classify_pair,
    group_semi_counts,
    natural_key,
    role_class_table,
    role_scheme,
)
from linkstream.stream import restrict, stream_stats
from tests.conftest import random_population, random_stream
from tests.oracles import semi_counts_by_counter


def test_natural_key_orders_numbers():
    assert sorted(["S10", "S2", "S1"], key=natural_key) == ["S1", "S2", "S10"]


class TestAttributes:
    def test_patient_without_category(self):
        with pytest.raises(InputError):
            NodeAttributes("p1", "PA", {"service": "S1", "category": "C1"})

    def test_unknown_role(self):
        with pytest.raises(InputError):
            NodeAttributes("x", "DOC", {})

    def test_duplicate_node(self):
        with pytest.raises(InputError, match="duplicate"):
            Population([NodeAttributes("a", "PA"), NodeAttributes("a", "ST")])

    def test_groups_and_lookup(self):
        pop = Population.from_mapping({"a": "PA", "b": "ST"}, service={"a": "S10", "b": "S2"})
        assert pop.groups("service") == ("S2", "S10")
        assert pop.group("a", "service") == "S10"
        assert pop.group_or_none("a", "category") is None
        with pytest.raises(MissingMembershipError):
            pop.group("a", "category")


class TestClassifyPair:
    pop = Population.from_mapping({"a": "PA", "b": "PA", "c": "ST", "d": "ST"}, service={"a": "S1", "b": "S1", "c": "S7"})

    def test_internal(self):
        assert classify_pair(("a", "b"), self.pop, "service") == ("S1", "S1", True)

    def test_external(self):
        assert classify_pair(("c", "a"), self.pop, "service") == ("S1", "S7", False)

    def test_missing(self):
        with pytest.raises(MissingMembershipError, match="'d'.*service"):
            classify_pair(("a", "d"), self.pop, "service")


class TestSemiCounts:
    def test_three_node_hand_enumeration(self, three_node_stream, three_node_period):
        s = restrict(three_node_stream, three_node_period)
        pop = Population.from_mapping({"a": "PA", "b": "ST", "c": "PA"}, service={"a": "G1", "b": "G1", "c": "G2"})
        counts = group_semi_counts(s, pop, "service")
        assert counts.groups == ("G1", "G2")
        assert counts.internal("pairs").tolist() == [1, 0]
        assert counts.external("pairs").tolist() == [1, 1]
        assert counts.semi_total("pairs").tolist() == [3, 1]
        assert counts.semi_total("pairs").sum() == 4

    def test_single_group_has_no_external(self):
        s = random_stream(random.Random(1))
        pop = Population(NodeAttributes(v, "PA", {"service": "all"}) for v in s.nodes)
        counts = group_semi_counts(s, pop, "service")
        for p in PARAMETERS:
            assert counts.external(p).tolist() == [0]

    def test_matches_counter_oracle(self):
        rng = random.Random(2)
        for _ in range(40):
            s = random_stream(rng)
            pop = random_population(rng, s.nodes, n_groups=4)
            counts = group_semi_counts(s, pop, "service")
            group_of = {v: pop.group(v, "service") for v in s.nodes}
            internal, external = semi_counts_by_counter(s.contacts, group_of)
            stats = stream_stats(s)
            totals = dict(zip(("pairs", "contacts", "length"), stats))
            for p in PARAMETERS:
                for i, g in enumerate(counts.groups):
                    assert counts.internal(p)[i] == internal[g][p]
                    assert counts.external(p)[i] == external[g][p]
                assert counts.semi_total(p).sum() == 2 * totals[p]
                assert counts.internal(p).sum() + counts.external(p).sum() / 2 == totals[p]

    def test_unclassified_excluded_and_counted(self, three_node_stream):
        pop = Population.from_mapping({"a": "PA", "b": "ST", "c": "ST"}, service={"a": "S1", "b": "S1"})
        counts = group_semi_counts(three_node_stream, pop, "service")
        assert counts.excluded["contacts"] == 4
        assert counts.internal("contacts").tolist() == [3]
        with pytest.raises(MissingMembershipError):
            group_semi_counts(three_node_stream, pop, "service", on_missing="raise")


class TestRoleTables:
    def test_three_node_global_length(self, three_node_stream, three_node_period):
        s = restrict(three_node_stream, three_node_period)
        pop = Population.from_mapping({"a": "PA", "b": "ST", "c": "PA"})
        t = role_class_table(s, pop, "length")
        assert t.columns == ("PA-PA", "PA-ST", "ST-ST")
        assert t.fractions.tolist() == [[0.0, 1.0, 0.0]]

    def test_all_patients(self):
        s = random_stream(random.Random(3))
        pop = Population(NodeAttributes(v, "PA") for v in s.nodes)
        t = role_class_table(s, pop, "pairs")
        assert t.fractions.tolist() == [[1.0, 0.0, 0.0]]

    def test_matches_classification_oracle(self):
        rng = random.Random(4)
        for _ in range(30):
            s = random_stream(rng)
            if not s:
                continue
            pop = random_population(rng, s.nodes)
            for p, idx in (("pairs", 0), ("contacts", 1), ("length", 2)):
                oracle = {"PA-PA": 0, "PA-ST": 0, "ST-ST": 0}
                centred = {"PA": {"PA": 0, "ST": 0}, "ST": {"PA": 0, "ST": 0}}
                split = {"int": {"PA-PA": 0, "PA-ST": 0, "ST-ST": 0}, "ext": {"PA-PA": 0, "PA-ST": 0, "ST-ST": 0}}
                for (a, b), cs in s.by_pair().items():
                    w = (1, len(cs), sum(c.length for c in cs))[idx]
                    ra, rb = pop.role(a), pop.role(b)
                    key = "-".join(sorted((ra, rb)))
                    oracle[key] += w
                    centred[ra][rb] += w
                    centred[rb][ra] += w
                    side = "int" if pop.group(a, "service") == pop.group(b, "service") else "ext"
                    split[side][key] += w
                t = role_class_table(s, pop, p)
                assert t.counts[0].tolist() == [oracle[k] for k in t.columns]
                assert abs(t.fractions.sum() - 1) < 1e-9
                for mode in ("PA", "ST"):
                    c = role_class_table(s, pop, p, mode)
                    assert c.counts[0].tolist() == [centred[mode]["PA"], centred[mode]["ST"]]
                t2 = role_class_table(s, pop, p, scheme="service")
                assert t2.rows == ("ext", "int")
                assert t2.counts[0].tolist() == [split["ext"][k] for k in t2.columns]
                assert t2.counts[1].tolist() == [split["int"][k] for k in t2.columns]

    def test_invariant_under_group_relabelling(self):
        rng = random.Random(5)
        s = random_stream(rng)
        pop = random_population(rng, s.nodes)
        relabelled = Population(
            NodeAttributes(a.node, a.role, {"service": "X" + a.memberships["service"]}) for a in pop
        )
        for p in PARAMETERS:
            assert np.array_equal(role_class_table(s, pop, p).counts, role_class_table(s, relabelled, p).counts)

    def test_bad_mode(self, three_node_stream):
        pop = Population.from_mapping({"a": "PA", "b": "ST", "c": "PA"})
        with pytest.raises(ValueError):
            role_class_table(three_node_stream, pop, "pairs", mode="doctor")


def test_role_scheme_classes():
    pop = Population.from_mapping({"a": "PA", "b": "ST"}, service={"a": "S1", "b": "S1"})
    rs = role_scheme(pop, "service")
    assert rs.group("a", "role:service") == "PA:S1"
    assert rs.group("b", "role:service") == "ST:S1"
