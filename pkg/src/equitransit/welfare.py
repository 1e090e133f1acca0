"""Utilitarian, trade-off and leximax optimization over the design MILP."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from equitransit.milp import (
    MilpBackend,
    NetworkDesign,
    SolverConfig,
    build_model,
    solve,
)
from equitransit.network import DesignProblem, Pair

log = logging.getLogger(__name__)

KINDS = ("utilitarian", "tradeoff", "leximax")
RAWLSIAN_GAMMA = 0.01


@dataclass(frozen=True)
class WelfareSpec:
    kind: str = "utilitarian"
    gamma: float = RAWLSIAN_GAMMA
    active_pairs: tuple[Pair, ...] | None = None
    tie_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.active_pairs is not None:
            object.__setattr__(self, "active_pairs", tuple(self.active_pairs))
            if self.kind != "utilitarian" and not self.active_pairs:
                raise ValueError("active_pairs must be nonempty for max-min objectives")
        if self.tie_tolerance < 0:
            raise ValueError("tie_tolerance must be nonnegative")

    @classmethod
    def utilitarian(cls) -> WelfareSpec:
        return cls("utilitarian", 1.0)

    @classmethod
    def rawlsian(cls, gamma: float = RAWLSIAN_GAMMA) -> WelfareSpec:
        return cls("tradeoff", gamma)


def solve_utilitarian(
    problem: DesignProblem,
    config: SolverConfig | None = None,
    warm_start: NetworkDesign | None = None,
    backend: MilpBackend | None = None,
) -> NetworkDesign:
    return solve(build_model(problem, WelfareSpec.utilitarian()), config, warm_start, backend)


def solve_tradeoff(
    problem: DesignProblem,
    gamma: float = RAWLSIAN_GAMMA,
    config: SolverConfig | None = None,
    warm_start: NetworkDesign | None = None,
    backend: MilpBackend | None = None,
    floors: Mapping[Pair, float] | None = None,
    active_pairs: Iterable[Pair] | None = None,
) -> NetworkDesign:
    spec = WelfareSpec("tradeoff", gamma, None if active_pairs is None else tuple(active_pairs))
    return solve(build_model(problem, spec, floors), config, warm_start, backend)


def solve_spec(
    problem: DesignProblem,
    spec: WelfareSpec,
    config: SolverConfig | None = None,
    warm_start: NetworkDesign | None = None,
    backend: MilpBackend | None = None,
) -> NetworkDesign:
    """Single solve for a utilitarian or trade-off spec."""
    if spec.kind == "leximax":
        raise ValueError("leximax needs solve_leximax; it is a sequence of solves")
    return solve(build_model(problem, spec), config, warm_start, backend)


def select_floor_pair(
    u: Mapping[Pair, float],
    p: Mapping[Pair, float],
    remaining: Iterable[Pair],
    tol: float = 1e-6,
    order: Iterable[Pair] | None = None,
) -> Pair:
    """The pair holding the priority-adjusted floor ``min (1 - p) u``.

    Pairs within ``tol`` of the minimum tie; the tie goes to the higher
    priority, then to the earliest pair in ``order`` (default: ``remaining``).
    """
    remaining = list(remaining)
    if not remaining:
        raise ValueError("no remaining pairs to select from")
    rank = {pair: i for i, pair in enumerate(order if order is not None else remaining)}
    values = {pair: (1.0 - p[pair]) * u[pair] for pair in remaining}
    low = min(values.values())
    tied = [pair for pair in remaining if values[pair] <= low + tol]
    return min(tied, key=lambda pair: (-p[pair], rank.get(pair, len(rank))))


@dataclass(frozen=True)
class LeximaxStep:
    iteration: int
    removed_pair: Pair
    frozen_utility: float
    floor: float
    objective: float
    avg_u_remaining: float
    avg_u_all: float
    design: NetworkDesign = field(repr=False)


@dataclass
class LeximaxTrace:
    steps: list[LeximaxStep] = field(default_factory=list)
    completed: bool = False
    error: str | None = None

    @property
    def floors(self) -> dict[Pair, float]:
        return {step.removed_pair: step.frozen_utility for step in self.steps}

    def __len__(self) -> int:
        return len(self.steps)


def solve_leximax(
    problem: DesignProblem,
    gamma: float = RAWLSIAN_GAMMA,
    max_iterations: int | None = None,
    config: SolverConfig | None = None,
    backend: MilpBackend | None = None,
    tie_tolerance: float = 1e-6,
    warm_start: NetworkDesign | None = None,
) -> LeximaxTrace:
    """Iteratively raise the floor: solve, freeze the worst pair's utility, drop it, repeat.

    ``avg_u_remaining`` is the mean utility over the pairs still in the min
    term when the iteration was solved.  A solver failure ends the loop and the
    partial trace is returned with ``error`` set.
    """
    pairs = problem.pairs
    max_iterations = len(pairs) if max_iterations is None else max_iterations
    if not 1 <= max_iterations <= len(pairs):
        raise ValueError(f"max_iterations must lie in [1, {len(pairs)}], got {max_iterations}")
    trace = LeximaxTrace()
    remaining = list(pairs)
    floors: dict[Pair, float] = {}
    previous = warm_start
    for k in range(1, max_iterations + 1):
        spec = WelfareSpec("tradeoff", gamma, tuple(remaining), tie_tolerance)
        try:
            design = solve(build_model(problem, spec, floors), config, previous, backend)
        except Exception as exc:  # noqa: BLE001 - partial trace is the contract
            log.error("leximax iteration %d failed: %s", k, exc)
            trace.error = f"iteration {k}: {exc}"
            return trace
        u = design.utilities
        chosen = select_floor_pair(u, problem.priority, remaining, tie_tolerance, order=pairs)
        trace.steps.append(
            LeximaxStep(
                iteration=k,
                removed_pair=chosen,
                frozen_utility=u[chosen],
                floor=(1.0 - problem.priority[chosen]) * u[chosen],
                objective=design.objective,
                avg_u_remaining=u.mean(remaining),
                avg_u_all=u.mean(),
                design=design,
            )
        )
        floors[chosen] = u[chosen]
        remaining.remove(chosen)
        previous = design
    trace.completed = True
    return trace
