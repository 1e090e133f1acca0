"""Tract/OD CSV loading, centroid network construction and problem config."""

from __future__ import annotations

import csv
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli

from equitransit import graphs
from equitransit.network import (
    Arc,
    DemandProfile,
    DesignProblem,
    Node,
    PriorityProfile,
    RoadNetwork,
    ValidationError,
)

EARTH_RADIUS_KM = 6371.0088
COINCIDENT_KM = 1e-3

TRACT_COLUMNS = ("tract_id", "lat", "lon", "median_income", "vehicle_rate")
OD_COLUMNS = ("origin", "destination", "count")


@dataclass(frozen=True)
class TractRecord:
    tract_id: str
    lat: float
    lon: float
    median_income: float
    vehicle_rate: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"tract {self.tract_id}: latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"tract {self.tract_id}: longitude {self.lon} out of range")
        if not (math.isfinite(self.median_income) and self.median_income > 0):
            raise ValidationError(f"tract {self.tract_id}: median income must be positive")
        if not 0.0 <= self.vehicle_rate <= 1.0:
            raise ValidationError(f"tract {self.tract_id}: vehicle rate must lie in [0, 1]")


@dataclass(frozen=True)
class OdRecord:
    origin: str
    destination: str
    count: int


def great_circle_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Haversine distance on a sphere of mean Earth radius."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def _reader(path: Path, columns: Sequence[str]) -> Iterable[tuple[int, dict[str, str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [name.strip() for name in (reader.fieldnames or [])]
        missing = [c for c in columns if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {missing}; expected header {','.join(columns)}")
        reader.fieldnames = header
        for row in reader:
            yield reader.line_num, row


def load_tracts(path: str | Path) -> list[TractRecord]:
    path = Path(path)
    records: list[TractRecord] = []
    seen: set[str] = set()
    for line, row in _reader(path, TRACT_COLUMNS):
        try:
            rec = TractRecord(
                tract_id=row["tract_id"].strip(),
                lat=float(row["lat"]),
                lon=float(row["lon"]),
                median_income=float(row["median_income"]),
                vehicle_rate=float(row["vehicle_rate"]),
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line}: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{line}: cannot parse row ({exc})") from exc
        if rec.tract_id in seen:
            raise ValidationError(f"{path}:{line}: duplicate tract_id {rec.tract_id!r}")
        seen.add(rec.tract_id)
        records.append(rec)
    if not records:
        raise ValidationError(f"{path}: no tracts")
    for i, a in enumerate(records):
        for b in records[i + 1:]:
            if great_circle_km(a.lat, a.lon, b.lat, b.lon) < COINCIDENT_KM:
                raise ValidationError(
                    f"tracts {a.tract_id!r} and {b.tract_id!r} have coincident centroids; "
                    "merge them into one tract before loading"
                )
    return records


def load_od(path: str | Path, tract_ids: Iterable[str], pairs: Iterable[tuple[str, str]] | None = None) -> DemandProfile:
    """Aggregate OD rows into a demand profile over all ordered tract pairs."""
    path = Path(path)
    ids = list(tract_ids)
    known = set(ids)
    counts: dict[tuple[str, str], int] = {}
    for line, row in _reader(path, OD_COLUMNS):
        o, d = row["origin"].strip(), row["destination"].strip()
        try:
            raw = float(row["count"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{line}: cannot parse count {row['count']!r}") from exc
        if raw != int(raw):
            raise ValidationError(f"{path}:{line}: count must be an integer, got {row['count']!r}")
        count = int(raw)
        for tract in (o, d):
            if tract not in known:
                raise ValidationError(f"{path}:{line}: unknown tract {tract!r}")
        if o == d:
            raise ValidationError(f"{path}:{line}: origin equals destination ({o!r})")
        if count < 0:
            raise ValidationError(f"{path}:{line}: negative count {count}")
        counts[o, d] = counts.get((o, d), 0) + count
    if pairs is None:
        pairs = [(o, d) for o in ids for d in ids if o != d]
    return DemandProfile(pairs, counts)


Metric = Callable[[TractRecord, TractRecord], float]


def great_circle_metric(a: TractRecord, b: TractRecord) -> float:
    return great_circle_km(a.lat, a.lon, b.lat, b.lon)


def parse_cost_rule(rule: str) -> Callable[[float], float]:
    """``identity`` or ``scale:<factor>``."""
    rule = rule.strip()
    if rule == "identity":
        return lambda length: length
    if rule.startswith("scale:"):
        factor = float(rule.split(":", 1)[1])
        if not (math.isfinite(factor) and factor >= 0):
            raise ValidationError(f"cost scale must be a nonnegative number, got {factor}")
        return lambda length: factor * length
    raise ValidationError(f"unknown cost rule {rule!r}; use 'identity' or 'scale:<factor>'")


def _knn_pairs(tracts: Sequence[TractRecord], metric: Metric, k: int) -> set[tuple[int, int]]:
    n = len(tracts)
    dist = [[metric(tracts[i], tracts[j]) if i != j else 0.0 for j in range(n)] for i in range(n)]
    chosen: set[tuple[int, int]] = set()
    for i in range(n):
        nearest = sorted((j for j in range(n) if j != i), key=lambda j: (dist[i][j], j))[:k]
        for j in nearest:
            chosen.add((i, j))
            chosen.add((j, i))
    # join components through their closest node pair until connected
    while True:
        comp = list(range(n))

        def find(v: int) -> int:
            while comp[v] != v:
                comp[v] = comp[comp[v]]
                v = comp[v]
            return v

        for i, j in chosen:
            comp[find(i)] = find(j)
        roots = {find(v) for v in range(n)}
        if len(roots) == 1:
            return chosen
        best = min(
            ((dist[i][j], i, j) for i in range(n) for j in range(n) if find(i) != find(j)),
        )
        chosen.add((best[1], best[2]))
        chosen.add((best[2], best[1]))


def build_network(
    tracts: Sequence[TractRecord],
    metric: Metric = great_circle_metric,
    cost_rule: Callable[[float], float] | str = "identity",
    topology: str = "complete",
) -> RoadNetwork:
    """Centroid network: one node per tract, arcs per ``topology``.

    ``complete`` links every ordered pair; ``knn:<k>`` keeps each node's k
    nearest neighbours in both directions and bridges disconnected pieces.
    """
    if len(tracts) < 2:
        raise ValidationError("need at least two tracts to build a network")
    if isinstance(cost_rule, str):
        cost_rule = parse_cost_rule(cost_rule)
    n = len(tracts)
    if topology == "complete":
        links = [(i, j) for i in range(n) for j in range(n) if i != j]
    elif topology.startswith("knn:"):
        k = int(topology.split(":", 1)[1])
        if k < 1:
            raise ValidationError("knn topology needs k >= 1")
        links = sorted(_knn_pairs(tracts, metric, k))
    else:
        raise ValidationError(f"unknown topology {topology!r}; use 'complete' or 'knn:<k>'")
    nodes = tuple(Node(t.tract_id, t.lat, t.lon, t.tract_id) for t in tracts)
    arcs = []
    for i, j in links:
        length = float(metric(tracts[i], tracts[j]))
        arcs.append(Arc(tracts[i].tract_id, tracts[j].tract_id, length, float(cost_rule(length))))
    return RoadNetwork(nodes, tuple(arcs))


@dataclass(frozen=True)
class ProblemConfig:
    alpha: float = 2.0
    k: int = 5
    bins: int = 10
    epsilon: float = 0.01
    p_floor: float = 0.05
    p_ceil: float = 0.95
    gamma: float = 0.01
    gap: float = 1e-4
    time_limit: float = 600.0
    seed: int = 0
    budget_fractions: tuple[float, ...] = field(default_factory=lambda: tuple((i + 1) / 20 for i in range(20)))
    cost_rule: str = "identity"
    topology: str = "complete"
    od_pairs: str = "all"
    grid_step: float = 0.05
    backend: str = "highs"

    def __post_init__(self) -> None:
        object.__setattr__(self, "budget_fractions", tuple(float(f) for f in self.budget_fractions))
        if self.od_pairs not in ("all", "positive"):
            raise ValidationError("od_pairs must be 'all' or 'positive'")
        if not self.alpha > 1:
            raise ValidationError("alpha must exceed 1")

    def updated(self, **overrides) -> ProblemConfig:
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_config(path: str | Path | None) -> ProblemConfig:
    """Read ``key = value`` TOML; unknown keys are rejected."""
    if path is None:
        return ProblemConfig()
    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
    names = {f.name for f in fields(ProblemConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValidationError(f"{path}: unknown config key(s) {unknown}")
    return ProblemConfig(**data)


def assemble_problem(
    tracts: Sequence[TractRecord],
    demand_path: str | Path,
    priority: PriorityProfile | Mapping[str, float] | None,
    config: ProblemConfig = ProblemConfig(),
    budget: float = 0.0,
) -> DesignProblem:
    """Network + demand + priorities -> :class:`DesignProblem`.

    ``priority`` may be a per-tract mapping (pairs take the origin's value) or a
    ready profile; ``None`` means uniform 0.5.
    """
    from equitransit.priority import od_priorities

    network = build_network(tracts, cost_rule=config.cost_rule, topology=config.topology)
    ids = [t.tract_id for t in tracts]
    demand = load_od(demand_path, ids)
    od_pairs = None
    if config.od_pairs == "positive":
        od_pairs = tuple(pair for pair in network.pairs if demand[pair] > 0)
        demand = DemandProfile(od_pairs, {pair: demand[pair] for pair in od_pairs})
    pairs = od_pairs if od_pairs is not None else network.pairs
    if priority is None:
        profile = PriorityProfile.uniform(pairs)
    elif isinstance(priority, PriorityProfile):
        profile = PriorityProfile({p: priority[p] for p in pairs}, {p: priority.group_of[p] for p in pairs})
    else:
        profile = od_priorities(priority, pairs, config.k)
    shortest = graphs.all_pairs_shortest(network)
    return DesignProblem(network, demand, profile, config.alpha, budget, shortest, od_pairs)
