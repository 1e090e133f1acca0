"""Need-based priority scores from tract income and vehicle ownership."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from equitransit.network import Pair, PriorityProfile

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class TractAttributes:
    median_income: float
    vehicle_rate: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.median_income) and self.median_income > 0):
            raise ValueError(f"median income must be positive, got {self.median_income}")
        if not 0.0 <= self.vehicle_rate <= 1.0:
            raise ValueError(f"vehicle rate must lie in [0, 1], got {self.vehicle_rate}")


@dataclass(frozen=True)
class ScoringConfig:
    bins: int = 10
    epsilon: float = 0.01
    p_floor: float = 0.05
    p_ceil: float = 0.95
    k: int = 5

    def __post_init__(self) -> None:
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        if not 0.0 < self.epsilon < 1.0 / self.bins:
            raise ValueError(f"epsilon must lie in (0, 1/bins), got {self.epsilon}")
        if not 0.0 < self.p_floor < self.p_ceil < 1.0:
            raise ValueError("need 0 < p_floor < p_ceil < 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")


def bin_index(values: Sequence[float], bins: int) -> list[int]:
    """Equal-width bin (1..bins) of each value over the observed range."""
    lo, hi = min(values), max(values)
    if hi == lo:
        return [1] * len(values)
    width = hi - lo
    return [min(int((v - lo) / width * bins), bins - 1) + 1 for v in values]


def bin_scores(values: Sequence[float], bins: int = 10, epsilon: float = 0.01) -> list[float]:
    """Score each value by its bin: bin j scores j/bins, the top bin 1 - epsilon."""
    values = list(values)
    if not values:
        raise ValueError("cannot bin an empty list")
    if not all(math.isfinite(v) for v in values):
        raise ValueError("values must be finite")
    return [1.0 - epsilon if j == bins else j / bins for j in bin_index(values, bins)]


def raw_scores(attrs: Mapping[str, TractAttributes], config: ScoringConfig = ScoringConfig()) -> dict[str, float]:
    """Income score plus vehicle-ownership score per tract.

    Summed as bin numerators over ``bins`` so that e.g. bins 1 and 2 give
    exactly 0.3 rather than 0.1 + 0.2.
    """
    tracts = list(attrs)
    top = config.bins * (1.0 - config.epsilon)

    def numerators(values: list[float]) -> list[float]:
        return [top if j == config.bins else float(j) for j in bin_index(values, config.bins)]

    income = numerators([attrs[t].median_income for t in tracts])
    cars = numerators([attrs[t].vehicle_rate for t in tracts])
    return {t: (i + c) / config.bins for t, i, c in zip(tracts, income, cars)}


def tract_priority(attrs: Mapping[str, TractAttributes], config: ScoringConfig = ScoringConfig()) -> dict[str, float]:
    """Priority per tract: the lowest income-plus-ownership score gets the highest priority.

    Raw scores are divided by their maximum, inverted, and mapped affinely
    from [0, 1] onto ``[p_floor, p_ceil]``.
    """
    if not attrs:
        raise ValueError("need at least one tract")
    if len(attrs) == 1:
        return {t: (config.p_floor + config.p_ceil) / 2 for t in attrs}
    raw = raw_scores(attrs, config)
    top = max(raw.values())
    span = config.p_ceil - config.p_floor
    return {t: config.p_floor + span * (1.0 - r / top) for t, r in raw.items()}


def assign_groups(priorities: Mapping[Pair, float], k: int = 5) -> dict[Pair, int]:
    """Split ``[min p, max p]`` into k equal intervals; group 1 holds the highest priorities.

    A value on an interval boundary joins the higher-priority group.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not priorities:
        return {}
    lo, hi = min(priorities.values()), max(priorities.values())
    if hi == lo or k == 1:
        return {pair: 1 for pair in priorities}
    groups = {}
    for pair, p in priorities.items():
        position = (hi - p) / (hi - lo) * k
        groups[pair] = min(max(math.ceil(position - BOUNDARY_TOL), 1), k)
    return groups


def od_priorities(
    tract_priorities: Mapping, pairs: Iterable[Pair], k: int = 5
) -> PriorityProfile:
    """Each OD pair takes its origin's priority; groups are binned over the pair priorities."""
    values = {}
    for o, d in pairs:
        if o not in tract_priorities:
            raise KeyError(f"no priority for tract {o!r}")
        values[(o, d)] = float(tract_priorities[o])
    return PriorityProfile(values, assign_groups(values, k))
