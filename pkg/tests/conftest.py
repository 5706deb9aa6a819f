import random

import pytest

from linkstream.grouping import NodeAttributes, Population
from linkstream.stream import Contact, LinkStream, SlotOccurrence, TimePeriod, merge_slots

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture
def three_node_stream():
    """Three nodes, seven contacts; restricting to [300, 600] keeps 3 contacts on 2 pairs."""
    return LinkStream(
        (
            Contact("a", "b", 0, 90),
            Contact("a", "b", 270, 360),
            Contact("a", "b", 480, 540),
            Contact("b", "c", 390, 480),
            Contact("b", "c", 600, 690),
            Contact("a", "c", 0, 60),
            Contact("a", "c", 660, 720),
        )
    )


@pytest.fixture
def three_node_period():
    return TimePeriod(300, 600)


def random_occurrences(rng: random.Random, n_nodes=10, n_slots=2000, n_occ=None, origin=0):
    nodes = [f"n{i}" for i in range(rng.randint(2, n_nodes))]
    n_occ = n_occ if n_occ is not None else rng.randint(0, 600)
    span = rng.randint(1, n_slots)
    out = []
    for _ in range(n_occ):
        a, b = rng.sample(nodes, 2)
        out.append(SlotOccurrence(a, b, origin + 30 * rng.randrange(span)))
    return out


def random_stream(rng: random.Random, **kw) -> LinkStream:
    return merge_slots(random_occurrences(rng, **kw))


def random_population(rng: random.Random, nodes, n_groups=3, scheme="service") -> Population:
    groups = [f"S{i + 1}" for i in range(rng.randint(1, n_groups))]
    return Population(
        NodeAttributes(v, rng.choice(("PA", "ST")), {scheme: rng.choice(groups)}) for v in sorted(nodes)
    )


@pytest.fixture
def rng():
    return random.Random(12345)
