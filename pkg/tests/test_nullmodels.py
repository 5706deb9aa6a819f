import random
from fractions import Fraction

import numpy as np
import pytest

from linkstream.errors import InputError
from linkstream.grouping import PARAMETERS, NodeAttributes, Population, group_semi_counts
from linkstream.nullmodels import (
    config_expectation,
    config_monte_carlo,
    contact_uniform,
    expected_cross,
    full_uniform,
    length_uniform,
)
from linkstream.stream import Contact, LinkStream, aggregate, restrict, stream_stats
from tests.conftest import random_population, random_stream


class TestFullUniform:
    def test_three_node(self, three_node_stream, three_node_period):
        net = full_uniform(restrict(three_node_stream, three_node_period))
        assert net.constant == {"pairs": Fraction(2, 3), "contacts": Fraction(1), "length": Fraction(70)}
        assert net.n_couples == 3
        assert net.value(("c", "a"), "length") == 70

    def test_two_nodes(self):
        net = full_uniform(LinkStream((Contact("a", "b", 0, 30),)))
        assert net.constant == {"pairs": 1, "contacts": 1, "length": 30}

    def test_too_few_nodes(self):
        with pytest.raises(InputError):
            full_uniform(LinkStream.empty())

    def test_outside_nodes_get_zero(self, three_node_stream):
        assert full_uniform(three_node_stream).value(("a", "z"), "pairs") == 0


class TestContactUniform:
    def test_three_node(self, three_node_stream, three_node_period):
        net = contact_uniform(restrict(three_node_stream, three_node_period))
        assert net.value(("a", "b"), "contacts") == Fraction(3, 2)
        assert net.value(("b", "c"), "contacts") == Fraction(3, 2)
        assert net.value(("a", "c"), "contacts") == 0
        assert "length" not in net.parameters()

    def test_fixed_point(self):
        s = LinkStream(
            (Contact("a", "b", 0, 30), Contact("a", "b", 90, 150), Contact("b", "c", 0, 60), Contact("b", "c", 120, 150))
        )
        net = contact_uniform(s)
        for pair, w in aggregate(s).items():
            assert net.value(pair, "contacts") == w.n_contacts

    def test_empty(self):
        with pytest.raises(InputError):
            contact_uniform(LinkStream.empty())


class TestLengthUniform:
    def test_three_node(self, three_node_stream, three_node_period):
        net = length_uniform(restrict(three_node_stream, three_node_period))
        assert net.value(("a", "b"), "length") == 140
        assert net.value(("b", "c"), "length") == 70

    def test_fixed_point(self):
        s = LinkStream((Contact("a", "b", 0, 60), Contact("a", "b", 120, 180), Contact("a", "c", 0, 60)))
        net = length_uniform(s)
        for pair, w in aggregate(s).items():
            assert net.value(pair, "length") == w.cumul_length

    def test_empty(self):
        with pytest.raises(InputError):
            length_uniform(LinkStream.empty())


def test_conservation_on_random_streams():
    rng = random.Random(21)
    for _ in range(30):
        s = random_stream(rng)
        if len(s.nodes) < 2:
            continue
        stats = dict(zip(PARAMETERS, stream_stats(s)))
        for p in PARAMETERS:
            assert full_uniform(s).total(p) == stats[p]
        cu = contact_uniform(s)
        assert cu.total("pairs") == stats["pairs"] and cu.total("contacts") == stats["contacts"]
        lu = length_uniform(s)
        assert lu.total("length") == stats["length"]
        for pair, w in aggregate(s).items():
            assert lu.value(pair, "contacts") == w.n_contacts


class TestConfigExpectation:
    def test_three_equal_groups(self):
        m = expected_cross([100, 100, 100])
        off = ~np.eye(3, dtype=bool)
        assert np.allclose(m[off], 100 * 100 / 300)
        assert np.isnan(np.diag(m)).all()

    def test_two_groups_of_four(self):
        assert expected_cross([4, 4])[0, 1] == 2.0

    def test_empty_group_row_is_zero(self):
        m = expected_cross([0, 10, 20])
        assert m[0, 1] == 0 and m[0, 2] == 0 and m[1, 0] == 0

    def test_zero_total(self):
        with pytest.raises(InputError):
            expected_cross([0, 0])

    def test_symmetric_and_homogeneous(self):
        d = np.array([3, 17, 40, 8])
        m = expected_cross(d)
        assert np.allclose(m, m.T, equal_nan=True)
        assert np.allclose(expected_cross(5 * d), 5 * m, equal_nan=True)
        off = ~np.eye(4, dtype=bool)
        assert np.isclose(m[off].sum(), (d.sum() ** 2 - (d**2).sum()) / d.sum())

    def test_from_counts_includes_internal_by_default(self, three_node_stream):
        pop = Population.from_mapping({"a": "PA", "b": "ST", "c": "PA"}, service={"a": "G1", "b": "G1", "c": "G2"})
        counts = group_semi_counts(three_node_stream, pop, "service")
        with_int = config_expectation(counts, "pairs")
        assert with_int.semi_totals.tolist() == [4, 2]
        assert with_int.matrix[0, 1] == pytest.approx(4 * 2 / 6)
        ext_only = config_expectation(counts, "pairs", include_internal=False)
        assert ext_only.semi_totals.tolist() == [2, 2]


class TestMonteCarlo:
    def test_converges_to_unit_corrected_formula(self):
        m = config_monte_carlo([100, 100, 100], samples=100_000, seed=3)
        target = 100 * 100 / 299
        off = ~np.eye(3, dtype=bool)
        assert np.all(np.abs(m[off] / target - 1) < 0.02)
        assert np.all(np.abs(m[off] / expected_cross([100, 100, 100])[off] - 1) < 0.02)

    def test_single_group(self):
        m = config_monte_carlo([10], samples=50, seed=0)
        assert m.shape == (1, 1) and m[0, 0] == 5

    def test_deterministic(self):
        a = config_monte_carlo([6, 8, 10], samples=500, seed=9, shards=3)
        b = config_monte_carlo([6, 8, 10], samples=500, seed=9, shards=3)
        assert np.array_equal(a, b)

    def test_conservation_of_matched_pairs(self):
        m = config_monte_carlo([6, 8, 10], samples=300, seed=1)
        assert np.isclose(np.triu(m).sum(), 12)

    def test_odd_total_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            config_monte_carlo([3, 4], samples=10, seed=0)

    def test_small_case_exact_distribution(self):
        # two groups of two semi-units: 3 matchings, 2 of them cross with 2 pairs each
        m = config_monte_carlo([2, 2], samples=60_000, seed=5)
        assert m[0, 1] == pytest.approx(4 / 3, rel=0.02)


def test_random_grouping_semi_totals_feed_expectation():
    rng = random.Random(22)
    s = random_stream(rng)
    pop = random_population(rng, s.nodes, n_groups=4)
    counts = group_semi_counts(s, pop, "service")
    exp = config_expectation(counts, "length")
    assert exp.semi_totals.sum() == 2 * stream_stats(s).cumul_length
    assert (exp.matrix[~np.eye(len(exp.groups), dtype=bool)] >= 0).all()


def test_population_helpers_ignore_unknown(three_node_stream):
    pop = Population([NodeAttributes("a", "PA", {"service": "S"})])
    counts = group_semi_counts(three_node_stream, pop, "service")
    assert counts.total("pairs") == 0
