"""Core domain types, the passenger utility function and welfare evaluators.

Everything here is solver-free: a design is judged by shortest paths on the
installed arcs, which makes these functions the reference against which the
MILP output is certified.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Hashable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from equitransit import graphs

NodeId = Hashable
Pair = tuple[NodeId, NodeId]

TOL = 1e-9


class ValidationError(ValueError):
    """Raised when input data violates a model invariant."""


@dataclass(frozen=True)
class Node:
    id: NodeId
    lat: float = 0.0
    lon: float = 0.0
    label: str = ""


@dataclass(frozen=True)
class Arc:
    tail: NodeId
    head: NodeId
    length: float
    cost: float


@dataclass(frozen=True)
class RoadNetwork:
    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate node ids")
        known = set(ids)
        seen: set[tuple[NodeId, NodeId]] = set()
        for a, arc in enumerate(self.arcs):
            if arc.tail not in known or arc.head not in known:
                raise ValidationError(f"arc {a} references an unknown node")
            if arc.tail == arc.head:
                raise ValidationError(f"arc {a} is a self-loop at {arc.tail!r}")
            if (arc.tail, arc.head) in seen:
                raise ValidationError(f"parallel arc {arc.tail!r}->{arc.head!r}")
            seen.add((arc.tail, arc.head))
            for name in ("length", "cost"):
                value = getattr(arc, name)
                if not math.isfinite(value) or value < 0:
                    raise ValidationError(f"arc {a} has invalid {name} {value!r}")
        if not graphs.is_strongly_connected(self):
            raise ValidationError("network is not strongly connected")

    @classmethod
    def from_arcs(
        cls,
        arcs: Iterable[tuple[NodeId, NodeId, float] | tuple[NodeId, NodeId, float, float]],
        nodes: Iterable[NodeId] | None = None,
    ) -> RoadNetwork:
        """Build from ``(tail, head, length[, cost])`` tuples; cost defaults to length."""
        built = []
        for item in arcs:
            tail, head, length = item[0], item[1], float(item[2])
            cost = float(item[3]) if len(item) > 3 else length
            built.append(Arc(tail, head, length, cost))
        if nodes is None:
            order: dict[NodeId, None] = {}
            for arc in built:
                order.setdefault(arc.tail)
                order.setdefault(arc.head)
            nodes = order
        return cls(tuple(Node(v) for v in nodes), tuple(built))

    @cached_property
    def index(self) -> dict[NodeId, int]:
        return {node.id: i for i, node in enumerate(self.nodes)}

    @cached_property
    def node_ids(self) -> tuple[NodeId, ...]:
        return tuple(node.id for node in self.nodes)

    @cached_property
    def pairs(self) -> tuple[Pair, ...]:
        """The OD set, ordered by (origin position, destination position)."""
        ids = self.node_ids
        return tuple((o, d) for o in ids for d in ids if o != d)

    @cached_property
    def arc_lookup(self) -> dict[tuple[NodeId, NodeId], int]:
        return {(arc.tail, arc.head): a for a, arc in enumerate(self.arcs)}

    def total_cost(self, arc_ids: Iterable[int] | None = None) -> float:
        ids = range(len(self.arcs)) if arc_ids is None else arc_ids
        return float(sum(self.arcs[a].cost for a in ids))


class _PairMap(Mapping):
    """Read-only mapping over the full OD set of a network."""

    _values: dict

    def __getitem__(self, pair: Pair):
        return self._values[pair]

    def __iter__(self) -> Iterator[Pair]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self._values!r})"


class DemandProfile(_PairMap):
    """Riders per OD pair; pairs absent from ``counts`` have zero demand."""

    def __init__(self, pairs: Iterable[Pair], counts: Mapping[Pair, int] | None = None):
        pairs = tuple(pairs)
        counts = dict(counts or {})
        known = set(pairs)
        for pair, value in counts.items():
            if pair not in known:
                raise ValidationError(f"demand for {pair!r} is outside the OD set")
            if value < 0 or int(value) != value:
                raise ValidationError(f"demand for {pair!r} must be a nonnegative integer, got {value!r}")
        self._values = {pair: int(counts.get(pair, 0)) for pair in pairs}

    def total(self) -> int:
        return sum(self._values.values())


class PriorityProfile(_PairMap):
    """Per-pair priority in (0, 1) plus the priority group label (1 = highest)."""

    def __init__(self, priorities: Mapping[Pair, float], group_of: Mapping[Pair, int] | None = None):
        self._values = {pair: float(p) for pair, p in priorities.items()}
        for pair, p in self._values.items():
            if not 0.0 < p < 1.0:
                raise ValidationError(f"priority for {pair!r} must lie strictly inside (0, 1), got {p}")
        if group_of is None:
            group_of = {pair: 1 for pair in self._values}
        if set(group_of) != set(self._values):
            raise ValidationError("group labels must cover exactly the prioritized pairs")
        self.group_of: dict[Pair, int] = {pair: int(group_of[pair]) for pair in self._values}

    @classmethod
    def uniform(cls, pairs: Iterable[Pair], value: float = 0.5) -> PriorityProfile:
        pairs = tuple(pairs)
        return cls({pair: value for pair in pairs}, {pair: 1 for pair in pairs})

    @property
    def groups(self) -> int:
        return max(self.group_of.values(), default=0)


class UtilityProfile(_PairMap):
    def __init__(self, utilities: Mapping[Pair, float]):
        values = {}
        for pair, u in utilities.items():
            u = float(u)
            if not -TOL <= u <= 1.0 + TOL:
                raise ValidationError(f"utility for {pair!r} outside [0, 1]: {u}")
            values[pair] = min(max(u, 0.0), 1.0)
        self._values = values

    def mean(self, pairs: Iterable[Pair] | None = None) -> float:
        selected = list(self._values) if pairs is None else list(pairs)
        if not selected:
            return float("nan")
        return float(np.mean([self._values[pair] for pair in selected]))


@dataclass(frozen=True)
class DesignProblem:
    network: RoadNetwork
    demand: DemandProfile
    priority: PriorityProfile
    alpha: float = 2.0
    budget: float = 0.0
    shortest: np.ndarray = field(default=None, repr=False, compare=False)
    od_pairs: tuple[Pair, ...] | None = None

    def __post_init__(self) -> None:
        if not self.alpha > 1.0:
            raise ValidationError(f"alpha must exceed 1, got {self.alpha}")
        if not (math.isfinite(self.budget) and self.budget >= 0):
            raise ValidationError(f"budget must be a nonnegative real, got {self.budget}")
        if self.od_pairs is not None:
            object.__setattr__(self, "od_pairs", tuple(self.od_pairs))
            if not self.od_pairs or not set(self.od_pairs) <= set(self.network.pairs):
                raise ValidationError("od_pairs must be a nonempty subset of the network's OD set")
        pairs = set(self.pairs)
        if set(self.demand) != pairs:
            raise ValidationError("demand profile does not cover the network's OD set")
        if set(self.priority) != pairs:
            raise ValidationError("priority profile does not cover the network's OD set")
        computed = graphs.all_pairs_shortest(self.network)
        if self.shortest is None:
            object.__setattr__(self, "shortest", computed)
        elif self.shortest.shape != computed.shape or not np.allclose(
            self.shortest, computed, rtol=0.0, atol=TOL
        ):
            raise ValidationError("shortest path matrix is inconsistent with the network")
        for o, d in self.pairs:
            if self.shortest_length((o, d)) <= 0.0:
                raise ValidationError(
                    f"pair {(o, d)!r} has zero shortest length; merge coincident nodes upstream"
                )
        self.shortest.setflags(write=False)

    @property
    def pairs(self) -> tuple[Pair, ...]:
        return self.network.pairs if self.od_pairs is None else self.od_pairs

    def shortest_length(self, pair: Pair) -> float:
        idx = self.network.index
        return float(self.shortest[idx[pair[0]], idx[pair[1]]])

    def with_budget(self, budget: float) -> DesignProblem:
        return dataclasses.replace(self, budget=budget)

    def with_priority(self, priority: PriorityProfile) -> DesignProblem:
        return dataclasses.replace(self, priority=priority)


def utility(path_length: float, shortest_length: float, alpha: float) -> float:
    """Piecewise-linear level of service of a trip relative to its shortest path.

    1 at the shortest length, falling linearly to 0 at ``alpha`` times it and
    staying 0 beyond (``inf`` means unreachable).
    """
    if not shortest_length > 0:
        raise ValueError(f"shortest_length must be positive, got {shortest_length}")
    if not alpha > 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if math.isnan(path_length):
        raise ValueError("path_length is NaN")
    ratio = path_length / shortest_length
    if ratio < 1.0:
        if ratio < 1.0 - TOL:
            raise ValueError(f"path_length {path_length} is shorter than the shortest path {shortest_length}")
        ratio = 1.0
    if ratio >= alpha:
        return 0.0
    return (alpha - ratio) / (alpha - 1.0)


def installed_distances(problem: DesignProblem, installed: Iterable[int]) -> np.ndarray:
    return graphs.all_pairs_shortest(problem.network, restrict=installed)


def evaluate_utility_profile(problem: DesignProblem, installed: Iterable[int]) -> UtilityProfile:
    installed = set(installed)
    if not installed <= set(range(len(problem.network.arcs))):
        raise ValidationError("installed set contains unknown arc ids")
    dist = installed_distances(problem, installed)
    idx = problem.network.index
    return UtilityProfile(
        {
            (o, d): utility(dist[idx[o], idx[d]], problem.shortest_length((o, d)), problem.alpha)
            for o, d in problem.pairs
        }
    )


def _check_pairs(*profiles: Mapping) -> None:
    first = set(profiles[0])
    for other in profiles[1:]:
        if set(other) != first:
            raise ValidationError("profiles are defined over different OD sets")


def welfare_utilitarian(u: Mapping[Pair, float], b: Mapping[Pair, int], p: Mapping[Pair, float]) -> float:
    _check_pairs(u, b, p)
    return float(sum(b[pair] * p[pair] * u[pair] for pair in u))


def welfare_maxmin(
    u: Mapping[Pair, float], p: Mapping[Pair, float], restrict: Iterable[Pair] | None = None
) -> float:
    _check_pairs(u, p)
    pairs = list(u) if restrict is None else list(restrict)
    if not pairs:
        raise ValidationError("max-min welfare needs a nonempty set of pairs")
    missing = [pair for pair in pairs if pair not in u]
    if missing:
        raise ValidationError(f"restriction contains unknown pairs: {missing[:3]!r}")
    return float(min((1.0 - p[pair]) * u[pair] for pair in pairs))


def welfare_tradeoff(
    u: Mapping[Pair, float],
    b: Mapping[Pair, int],
    p: Mapping[Pair, float],
    gamma: float,
    restrict: Iterable[Pair] | None = None,
) -> float:
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    total = welfare_utilitarian(u, b, p)
    if gamma == 1.0:
        return total
    return gamma * total + (1.0 - gamma) * welfare_maxmin(u, p, restrict)
