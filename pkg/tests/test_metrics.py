import logging
import math
import random

import numpy as np
import pytest

from linkstream.clock import DAY, Clock, parse_epoch
from linkstream.grouping import NodeAttributes, Population
from linkstream.metrics import (
    CLEARLY_FAVOURED,
    CLEARLY_UNFAVOURED,
    LABEL_RANK,
    MIXED,
    NEUTRAL,
    STRONGLY_FAVOURED,
    STRONGLY_UNFAVOURED,
    Thresholds,
    affinity_density,
    affinity_deviation,
    classify,
    classify_relationships,
    correlation,
    daily_cross_counts,
    daily_expected,
    deviation_matrix,
    factor,
    introversion_factor,
    pairs_baseline_ratio,
    ratio,
)
from linkstream.nullmodels import expected_cross, full_uniform
from linkstream.stream import Contact, LinkStream, partition, restrict
from tests.conftest import random_population, random_stream
from tests.oracles import full_uniform_int_ext, pearson


def three_node_groups():
    return Population.from_mapping({"a": "PA", "b": "ST", "c": "PA"}, service={"a": "G1", "b": "G1", "c": "G2"})


class TestRatio:
    def test_special_values(self):
        assert ratio(1, 0) == math.inf
        assert math.isnan(ratio(0, 0))
        assert ratio(1, 4) == 0.25

    def test_factor_degenerate_baseline(self):
        assert math.isnan(factor(1.0, 0.0))
        assert math.isnan(factor(math.inf, math.inf))
        assert factor(math.inf, 0.5) == math.inf


class TestIntroversion:
    def test_three_node_pairs(self, three_node_stream, three_node_period):
        rep = introversion_factor(restrict(three_node_stream, three_node_period), three_node_groups(), "service", "pairs")
        assert rep.groups == ("G1", "G2")
        assert rep.ratio_real[0] == 1.0
        assert rep.ratio_baseline[0] == 0.5
        assert rep.factor[0] == 2.0
        # a singleton group has a zero baseline: undefined
        assert math.isnan(rep.factor[1])

    def test_only_internal_is_infinite(self):
        s = LinkStream((Contact("a", "b", 0, 60), Contact("c", "d", 0, 30)))
        pop = Population.from_mapping(dict.fromkeys("abcd", "PA"), service={"a": "S1", "b": "S1", "c": "S2", "d": "S2"})
        rep = introversion_factor(s, pop, "service", "pairs")
        assert rep.factor.tolist() == [math.inf, math.inf]

    def test_whole_population_group_undefined(self):
        s = LinkStream((Contact("a", "b", 0, 60),))
        pop = Population.from_mapping({"a": "PA", "b": "PA"}, service={"a": "S1", "b": "S1"})
        assert math.isnan(introversion_factor(s, pop, "service", "pairs").factor[0])

    def test_contacts_fixed_point(self):
        s = LinkStream(
            (
                Contact("a", "b", 0, 30), Contact("a", "b", 90, 120),
                Contact("a", "c", 0, 60), Contact("a", "c", 300, 330),
                Contact("c", "d", 0, 30), Contact("c", "d", 600, 660),
            )
        )
        pop = Population.from_mapping(dict.fromkeys("abcd", "ST"), service={"a": "S1", "b": "S1", "c": "S2", "d": "S2"})
        rep = introversion_factor(s, pop, "service", "contacts")
        assert rep.factor.tolist() == [1.0, 1.0]

    def test_pairs_baseline_closed_form_against_construction(self):
        rng = random.Random(31)
        for _ in range(30):
            s = random_stream(rng)
            if len(s.nodes) < 3:
                continue
            pop = random_population(rng, s.nodes, n_groups=4)
            rep = introversion_factor(s, pop, "service", "pairs")
            group_of = {v: pop.group(v, "service") for v in s.nodes}
            per_couple = full_uniform(s).constant["pairs"]
            b_int, b_ext = full_uniform_int_ext(s.nodes, group_of, per_couple)
            n_total = len(s.nodes)
            for i, g in enumerate(rep.groups):
                n_g = sum(1 for v in s.nodes if group_of[v] == g)
                assert rep.base_int[i] == b_int[g] and rep.base_ext[i] == b_ext[g]
                assert rep.ratio_baseline[i] == pytest.approx(pairs_baseline_ratio(n_g, n_total), nan_ok=True) or (
                    math.isnan(rep.ratio_baseline[i]) and math.isnan(pairs_baseline_ratio(n_g, n_total))
                )

    def test_scale_invariance_for_length(self):
        s = LinkStream((Contact("a", "b", 0, 60), Contact("a", "c", 0, 90), Contact("c", "d", 0, 30)))
        stretched = LinkStream(tuple(Contact(c.a, c.b, 3 * c.t_s, 3 * c.t_e) for c in s))
        pop = Population.from_mapping(dict.fromkeys("abcd", "PA"), service={"a": "S1", "b": "S1", "c": "S2", "d": "S2"})
        f1 = introversion_factor(s, pop, "service", "length").factor
        f2 = introversion_factor(stretched, pop, "service", "length").factor
        assert np.allclose(f1, f2)

    def test_ratio_of_sums_over_days(self):
        day1 = LinkStream((Contact("a", "b", 0, 30), Contact("a", "c", 0, 30)))
        day2 = LinkStream((Contact("a", "b", 100, 130),))
        pop = Population.from_mapping(dict.fromkeys("abc", "PA"), service={"a": "S1", "b": "S1", "c": "S2"})
        rep = introversion_factor([day1, day2], pop, "service", "pairs")
        assert rep.real_int[0] == 2 and rep.real_ext[0] == 1


class TestAffinityDensity:
    def test_toy_half_density(self):
        s = LinkStream((Contact("i1", "j1", 0, 30), Contact("i1", "j2", 0, 30), Contact("i2", "j3", 0, 30)))
        pop = Population.from_mapping(
            dict.fromkeys(["i1", "i2", "j1", "j2", "j3"], "PA"),
            service={"i1": "Si", "i2": "Si", "j1": "Sj", "j2": "Sj", "j3": "Sj"},
        )
        m = affinity_density(s, pop, "service", "pairs")
        assert m.values[0, 1] == 0.5 and m.values[1, 0] == 0.5
        assert np.isnan(m.values[0, 0])

    def test_no_cross_contacts(self):
        s = LinkStream((Contact("a", "b", 0, 30), Contact("c", "d", 0, 30)))
        pop = Population.from_mapping(dict.fromkeys("abcd", "PA"), service={"a": "S1", "b": "S1", "c": "S2", "d": "S2"})
        assert affinity_density(s, pop, "service", "length").values[0, 1] == 0

    def test_role_filter_annihilates_staff_only(self):
        s = LinkStream((Contact("a", "c", 0, 30), Contact("b", "d", 0, 60), Contact("a", "b", 0, 30)))
        pop = Population.from_mapping(
            {"a": "ST", "b": "PA", "c": "ST", "d": "PA"}, service={"a": "S1", "b": "S1", "c": "S2", "d": "S2"}
        )
        s_staff = s.filter(lambda c: c.pair == ("a", "c"))
        m = affinity_density(s_staff, pop, "service", "pairs", role_filter=("PA", "ST"), present={"a", "b", "c", "d"})
        assert np.nan_to_num(m.values).sum() == 0

    def test_role_filter_asymmetric(self):
        s = LinkStream((Contact("p1", "s2", 0, 30),))
        pop = Population.from_mapping(
            {"p1": "PA", "s1": "ST", "p2": "PA", "s2": "ST"},
            service={"p1": "S1", "s1": "S1", "p2": "S2", "s2": "S2"},
        )
        m = affinity_density(s, pop, "service", "pairs", ("PA", "ST"), present={"p1", "s1", "p2", "s2"})
        assert m.values[0, 1] == 1.0 and m.values[1, 0] == 0.0

    def test_empty_group_day_skipped(self, caplog):
        d1 = LinkStream((Contact("a", "c", 0, 30),))
        d2 = LinkStream((Contact("a", "b", 0, 30),))
        pop = Population.from_mapping(dict.fromkeys("abc", "PA"), service={"a": "S1", "b": "S1", "c": "S2"})
        with caplog.at_level(logging.DEBUG):
            m = affinity_density([d1, d2], pop, "service", "pairs")
        # S2 absent on day 2, so the S1-S2 cell averages day 1 only
        assert m.values[0, 1] == 1.0
        assert m.days_used[0, 1] == 1

    def test_unfiltered_symmetric(self):
        rng = random.Random(32)
        s = random_stream(rng)
        pop = random_population(rng, s.nodes, 4)
        m = affinity_density(s, pop, "service", "length")
        assert np.array_equal(np.nan_to_num(m.values), np.nan_to_num(m.values.T))


class TestDeviation:
    def test_identity(self):
        x = np.random.default_rng(0).uniform(0.1, 5, size=(4, 3, 3))
        dev = deviation_matrix(x, x)
        assert np.allclose(dev.deviation, 1.0)

    def test_infinite_and_undefined(self):
        real = np.array([[0.0, 2.0], [0.0, 0.0]])
        exp = np.array([[0.0, 0.0], [0.0, 0.0]])
        dev = deviation_matrix(real, exp)
        assert dev.deviation[0, 1] == math.inf
        assert math.isnan(dev.deviation[1, 0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            deviation_matrix(np.ones((2, 2)), np.ones((3, 3)))

    def test_ratio_of_sums(self):
        real = np.array([[[0, 1], [1, 0]], [[0, 3], [3, 0]]], dtype=float)
        exp = np.array([[[0, 2], [2, 0]], [[0, 2], [2, 0]]], dtype=float)
        dev = deviation_matrix(real, exp)
        assert dev.deviation[0, 1] == 1.0
        assert dev.real[0, 1] == 2.0 and dev.expected[0, 1] == 2.0

    def test_expected_matches_formula_and_is_symmetric(self):
        rng = random.Random(33)
        s = random_stream(rng)
        pop = random_population(rng, s.nodes, 4)
        if len(pop.groups("service")) < 2:
            pop = Population(
                NodeAttributes(v, "PA", {"service": "S1" if i % 2 else "S2"}) for i, v in enumerate(sorted(s.nodes))
            )
        exp = daily_expected(s, pop, "service", "pairs")[0]
        from linkstream.grouping import group_semi_counts

        d = group_semi_counts(s, pop, "service").semi_total("pairs")
        assert np.allclose(exp, expected_cross(d), equal_nan=True)
        dev = affinity_deviation(s, pop, "service", "length")
        assert np.array_equal(np.nan_to_num(dev.deviation, posinf=-1), np.nan_to_num(dev.deviation.T, posinf=-1))

    def test_role_filtered_real_counts(self):
        s = LinkStream((Contact("p1", "s2", 0, 30), Contact("s1", "s2", 0, 60)))
        pop = Population.from_mapping(
            {"p1": "PA", "s1": "ST", "p2": "PA", "s2": "ST"},
            service={"p1": "S1", "s1": "S1", "p2": "S2", "s2": "S2"},
        )
        real = daily_cross_counts(s, pop, "service", "length", ("PA", "ST"))[0]
        assert real.tolist() == [[0, 30], [0, 0]]
        dev = affinity_deviation(s, pop, "service", "length", ("PA", "ST"))
        # only the PA-ST contact is kept: semi-units PA:S1 = 30, ST:S2 = 30 -> expected 30*30/60
        assert dev.expected[0, 1] == 15.0
        assert dev.deviation[0, 1] == 2.0
        assert not dev.symmetric

    def test_per_day_populations(self):
        # node b moves from S1 to S2 between days
        d1 = LinkStream((Contact("a", "b", 0, 30),))
        d2 = LinkStream((Contact("a", "b", 100, 130),))
        pop1 = Population.from_mapping({"a": "PA", "b": "PA", "c": "PA"}, service={"a": "S1", "b": "S1", "c": "S2"})
        pop2 = Population.from_mapping({"a": "PA", "b": "PA", "c": "PA"}, service={"a": "S1", "b": "S2", "c": "S2"})
        real = daily_cross_counts([d1, d2], [pop1, pop2], "service", "pairs")
        assert real[:, 0, 1].tolist() == [0, 1]
        rep = introversion_factor([d1, d2], [pop1, pop2], "service", "pairs")
        assert rep.real_int == [1, 0] and rep.real_ext == [1, 1]


class TestClassify:
    @pytest.mark.parametrize(
        "fp,fl,label",
        [
            (2.0, 1.2, CLEARLY_FAVOURED),
            (1.8, 1.8, STRONGLY_FAVOURED),
            (0.5, 0.5, STRONGLY_UNFAVOURED),
            (0.9, 0.6, CLEARLY_UNFAVOURED),
            (1.2, 1.3, NEUTRAL),
            (0.9, 0.95, NEUTRAL),
            (2.0, 0.8, MIXED),
            (1.2, 0.5, MIXED),
            (1.2, 0.8, NEUTRAL),
            (math.nan, 3.0, NEUTRAL),
            (math.inf, math.inf, STRONGLY_FAVOURED),
            (0.0, 0.0, STRONGLY_UNFAVOURED),
        ],
    )
    def test_rules(self, fp, fl, label):
        assert classify(fp, fl) == label

    def test_custom_thresholds(self):
        assert classify(1.8, 1.8, Thresholds(1.0, 2.0)) == NEUTRAL
        with pytest.raises(ValueError):
            Thresholds(1.5, 1.0)

    def test_thresholds_from_json(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text('{"favoured": 1.1, "strong": 2}')
        assert Thresholds.from_json(p) == Thresholds(1.1, 2.0)

    def test_monotone(self):
        rng = np.random.default_rng(1)
        grid = np.exp(rng.uniform(-1.5, 1.5, size=(400, 3)))
        for fp, fl, bump in grid:
            for up in ((fp * (1 + bump), fl), (fp, fl * (1 + bump))):
                assert LABEL_RANK[classify(*up)] >= LABEL_RANK[classify(fp, fl)]

    def test_relationships_and_rule_tag(self):
        groups = ("S1", "S2", "S3")
        dp = deviation_matrix(np.array([[0, 2, 0.5], [2, 0, 1], [0.5, 1, 0]]), np.ones((3, 3)), "service", "pairs", groups)
        dl = deviation_matrix(np.array([[0, 2, 2], [2, 0, 1], [2, 1, 0]]), np.ones((3, 3)), "service", "length", groups)
        graph = classify_relationships(dp, dl)
        assert [(r.row, r.col) for r in graph.relationships] == [("S1", "S2"), ("S1", "S3"), ("S2", "S3")]
        assert graph.label("S2", "S1") == STRONGLY_FAVOURED
        assert graph.label("S1", "S3") == MIXED
        assert [r.rule for r in graph.edges(MIXED)] == ["local"]
        assert graph.edges(STRONGLY_FAVOURED)[0].rule == "published"

    def test_misaligned(self):
        a = deviation_matrix(np.ones((2, 2)), np.ones((2, 2)), groups=("a", "b"))
        b = deviation_matrix(np.ones((2, 2)), np.ones((2, 2)), groups=("a", "c"))
        with pytest.raises(ValueError):
            classify_relationships(a, b)


class TestCorrelation:
    def test_perfect(self):
        a = [1.0, 2.0, 5.0, 7.0]
        assert correlation(a, [2 * x for x in a]) == pytest.approx(1.0)
        assert correlation(a, [-x for x in a]) == pytest.approx(-1.0)

    def test_matches_textbook_formula(self):
        rng = random.Random(34)
        a = [rng.random() for _ in range(50)]
        b = [x + rng.gauss(0, 0.3) for x in a]
        assert correlation(a, b) == pytest.approx(pearson(a, b), rel=1e-12)

    def test_zero_variance(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert math.isnan(correlation([1, 1, 1], [1, 2, 3]))
        assert "zero variance" in caplog.text


@pytest.mark.slow
def test_planted_affinity_favoured_in_most_seeds():
    from linkstream.synth import GroupSpec, SynthConfig, generate

    hits = 0
    for seed in range(100):
        cfg = SynthConfig(
            seed=seed,
            days=7,
            groups=[GroupSpec(f"G{i}", 5, 5) for i in range(1, 9)],
            base_rate=0.0001,
            affinity={"G1|G2": 3},
        )
        out = generate(cfg)
        clock = Clock(parse_epoch(cfg.epoch), cfg.utc_offset)
        days = [s for _, s in partition(out.stream(), DAY, clock.origin)]
        dp = affinity_deviation(days, out.population, "service", "pairs")
        dl = affinity_deviation(days, out.population, "service", "length")
        hits += dp.deviation[0, 1] > 1.5 and dl.deviation[0, 1] > 1.5
    assert hits >= 95
