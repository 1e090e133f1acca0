"""Exhaustive ground truth for tiny instances.

Arc subsets are enumerated by bitmask; those that balance in- and out-degree
at every node and fit the budget are the feasible designs.  Each is
scored with shortest paths on its own arcs, never with solver variables, so the
optimum found here is independent of the MILP.
"""

from __future__ import annotations

import random
from collections.abc import Callable, Iterator
from dataclasses import dataclass

import numpy as np

from equitransit.network import (
    DemandProfile,
    DesignProblem,
    PriorityProfile,
    RoadNetwork,
    UtilityProfile,
)

CHUNK = 1 << 14


class EnumerationCapError(ValueError):
    """Instance is too large for brute force."""


@dataclass(frozen=True)
class EnumerationBudget:
    max_arcs: int = 12
    max_nodes: int = 6
    max_subsets: int = 1 << 20

    def __post_init__(self) -> None:
        if min(self.max_arcs, self.max_nodes, self.max_subsets) <= 0:
            raise ValueError("enumeration caps must be positive")


def _check_caps(network: RoadNetwork, caps: EnumerationBudget) -> None:
    m, n = len(network.arcs), len(network.nodes)
    if m > caps.max_arcs:
        raise EnumerationCapError(f"{m} arcs exceeds the cap of {caps.max_arcs}")
    if n > caps.max_nodes:
        raise EnumerationCapError(f"{n} nodes exceeds the cap of {caps.max_nodes}")


def enumerate_feasible(
    network: RoadNetwork, budget: float, caps: EnumerationBudget = EnumerationBudget()
) -> Iterator[frozenset[int]]:
    """Yield every circulation within budget, in increasing bitmask order.

    Arcs are decided from the highest index down (exclude before include), so
    leaves come out in bitmask order.  A branch is cut as soon as its cost
    exceeds the budget or a node whose arcs are all decided is unbalanced.
    """
    _check_caps(network, caps)
    m = len(network.arcs)
    n = len(network.nodes)
    costs = [arc.cost for arc in network.arcs]
    ends = [(network.index[arc.tail], network.index[arc.head]) for arc in network.arcs]
    lowest = [m] * n
    for a, (t, h) in enumerate(ends):
        lowest[t] = min(lowest[t], a)
        lowest[h] = min(lowest[h], a)
    closes: list[list[int]] = [[] for _ in range(m)]
    for v in range(n):
        if lowest[v] < m:
            closes[lowest[v]].append(v)
    balance = [0] * n
    chosen: list[int] = []
    yielded = 0
    limit = budget + 1e-9

    def visit(a: int, spent: float) -> Iterator[frozenset[int]]:
        nonlocal yielded
        if a < 0:
            yielded += 1
            if yielded > caps.max_subsets:
                raise EnumerationCapError(f"more than {caps.max_subsets} feasible subsets")
            yield frozenset(chosen)
            return
        t, h = ends[a]
        for take in (False, True):
            if take:
                if spent + costs[a] > limit:
                    continue
                balance[t] += 1
                balance[h] -= 1
                chosen.append(a)
            if all(balance[v] == 0 for v in closes[a]):
                yield from visit(a - 1, spent + (costs[a] if take else 0.0))
            if take:
                balance[t] -= 1
                balance[h] += 1
                chosen.pop()

    yield from visit(m - 1, 0.0)


def scan_feasible(network: RoadNetwork, budget: float, max_arcs: int = 20) -> list[frozenset[int]]:
    """Unpruned scan of all 2^m subsets with direct degree counting (cross-check)."""
    m = len(network.arcs)
    if m > max_arcs:
        raise EnumerationCapError(f"{m} arcs exceeds the scan cap of {max_arcs}")
    costs = np.array([arc.cost for arc in network.arcs])
    incidence = np.zeros((m, len(network.nodes)), dtype=np.int64)
    for a, arc in enumerate(network.arcs):
        incidence[a, network.index[arc.tail]] += 1
        incidence[a, network.index[arc.head]] -= 1
    shifts = np.arange(m, dtype=np.int64)
    total = 1 << m
    found = []
    for start in range(0, total, CHUNK):
        masks = np.arange(start, min(start + CHUNK, total), dtype=np.int64)
        bits = (masks[:, None] >> shifts) & 1
        ok = bits @ costs <= budget + 1e-9
        ok &= ~(bits @ incidence).any(axis=1)
        found.extend(frozenset(a for a in range(m) if (int(mask) >> a) & 1) for mask in masks[ok])
    return found


class SubsetEvaluator:
    """Utility profile of an arc subset via dense Floyd-Warshall.

    Deliberately a separate code path from the Dijkstra evaluator in
    :mod:`equitransit.network`; the two are cross-checked in the tests.
    """

    def __init__(self, problem: DesignProblem):
        net = problem.network
        self.problem = problem
        self.n = len(net.nodes)
        self.tails = np.array([net.index[a.tail] for a in net.arcs])
        self.heads = np.array([net.index[a.head] for a in net.arcs])
        self.lengths = np.array([a.length for a in net.arcs])
        self.rows = np.array([net.index[o] for o, _ in problem.pairs])
        self.cols = np.array([net.index[d] for _, d in problem.pairs])
        self.star = problem.shortest[self.rows, self.cols]
        self.alpha = problem.alpha

    def distances(self, subset: frozenset[int]) -> np.ndarray:
        dist = np.full((self.n, self.n), np.inf)
        np.fill_diagonal(dist, 0.0)
        if subset:
            idx = np.fromiter(subset, dtype=np.int64)
            np.minimum.at(dist, (self.tails[idx], self.heads[idx]), self.lengths[idx])
        for k in range(self.n):
            np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :], out=dist)
        return dist

    def __call__(self, subset: frozenset[int]) -> UtilityProfile:
        ratio = self.distances(subset)[self.rows, self.cols] / self.star
        ratio = np.maximum(ratio, 1.0)
        u = np.where(ratio < self.alpha, (self.alpha - ratio) / (self.alpha - 1.0), 0.0)
        return UtilityProfile(dict(zip(self.problem.pairs, u.tolist())))


def brute_force_optimum(
    problem: DesignProblem,
    welfare: Callable[[UtilityProfile], float],
    caps: EnumerationBudget = EnumerationBudget(),
    admissible: Callable[[UtilityProfile], bool] | None = None,
) -> tuple[float, frozenset[int]]:
    """Best welfare over all feasible designs (first in enumeration order on ties).

    ``admissible`` optionally filters designs by their utility profile, e.g. to
    impose frozen floors.
    """
    best_value = -np.inf
    best: frozenset[int] | None = None
    evaluate = SubsetEvaluator(problem)
    for subset in enumerate_feasible(problem.network, problem.budget, caps):
        u = evaluate(subset)
        if admissible is not None and not admissible(u):
            continue
        value = welfare(u)
        if value > best_value + 1e-12:
            best_value, best = value, subset
    if best is None:
        raise ValueError("no admissible design")
    return float(best_value), best


def random_instance(
    rng: random.Random,
    nodes: int = 4,
    arcs: int = 8,
    alpha: float = 2.0,
    budget: float | None = None,
    symmetric: bool = False,
) -> DesignProblem:
    """Strongly connected random instance: a Hamiltonian cycle plus random chords.

    With ``symmetric`` every link is two-way (``arcs`` must then be even), so
    the full arc set is a circulation and the full-service budget exists.
    """
    if not nodes <= arcs <= nodes * (nodes - 1):
        raise ValueError("arc count must lie between nodes and nodes*(nodes-1)")
    order = list(range(nodes))
    rng.shuffle(order)
    if symmetric:
        if arcs % 2 or arcs < 2 * (nodes - 1):
            raise ValueError("a symmetric instance needs an even arc count of at least 2*(nodes-1)")
        edges = {tuple(sorted((order[i], order[i + 1]))) for i in range(nodes - 1)}
        candidates = sorted((i, j) for i in range(nodes) for j in range(i + 1, nodes) if (i, j) not in edges)
        edges.update(rng.sample(candidates, arcs // 2 - len(edges)))
        links = {(i, j) for i, j in edges} | {(j, i) for i, j in edges}
    else:
        links = {(order[i], order[(i + 1) % nodes]) for i in range(nodes)}
        candidates = sorted((i, j) for i in range(nodes) for j in range(nodes) if i != j and (i, j) not in links)
        links.update(rng.sample(candidates, arcs - nodes))
    rows = [(i, j, round(rng.uniform(1.0, 10.0), 3), round(rng.uniform(1.0, 10.0), 3)) for i, j in sorted(links)]
    network = RoadNetwork.from_arcs(rows, nodes=range(nodes))
    pairs = network.pairs
    demand = DemandProfile(pairs, {pair: rng.randint(1, 20) for pair in pairs})
    priority = PriorityProfile({pair: round(rng.uniform(0.05, 0.95), 4) for pair in pairs})
    if budget is None:
        budget = round(rng.uniform(0.0, network.total_cost()), 3)
    return DesignProblem(network, demand, priority, alpha, budget)
