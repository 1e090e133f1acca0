import random

import pytest

from equitransit.network import DemandProfile, DesignProblem, PriorityProfile, RoadNetwork
from equitransit.oracle import random_instance

CYCLE_ARCS = [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 2.0), (2, 1, 1.0), (3, 2, 1.0), (1, 3, 2.0)]


def cycle_network() -> RoadNetwork:
    """3-node bidirectional cycle; arcs 0..2 run 1->2->3->1, arcs 3..5 the reverse."""
    return RoadNetwork.from_arcs(CYCLE_ARCS)


def cycle_problem(budget: float = 4.0, demand: dict | None = None, p: float = 0.5, alpha: float = 2.0) -> DesignProblem:
    net = cycle_network()
    return DesignProblem(net, DemandProfile(net.pairs, demand or {(1, 3): 10}),
                         PriorityProfile.uniform(net.pairs, p), alpha, budget)


def two_node_problem(budget: float = 7.0) -> DesignProblem:
    net = RoadNetwork.from_arcs([("o", "d", 3.0), ("d", "o", 4.0)])
    return DesignProblem(net, DemandProfile(net.pairs, {("o", "d"): 2, ("d", "o"): 3}),
                         PriorityProfile({("o", "d"): 0.8, ("d", "o"): 0.3}), 2.0, budget)


def seeded_instance(seed, nodes=4, arcs=8, budget=None, symmetric=False) -> DesignProblem:
    return random_instance(random.Random(seed), nodes, arcs, budget=budget, symmetric=symmetric)


@pytest.fixture
def cycle():
    return cycle_problem()


ACCEPTANCE: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
