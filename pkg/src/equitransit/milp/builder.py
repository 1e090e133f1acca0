"""Build the network-design MILP, solve it, and turn solutions into designs."""

from __future__ import annotations

import logging
import math
import re
import time
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from equitransit import graphs
from equitransit.milp.backends import MilpBackend, SolverConfig, SolverError, get_backend
from equitransit.milp.model import INF, MilpModel
from equitransit.network import (
    DesignProblem,
    Pair,
    UtilityProfile,
    ValidationError,
    utility,
    welfare_maxmin,
    welfare_utilitarian,
)

if TYPE_CHECKING:
    from equitransit.welfare import WelfareSpec

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6
SERVED_TOL = 1e-6
# Floors are relaxed by this much so a design that set the floor stays feasible
# despite round-off in the engine; well inside FEAS_TOL.
FLOOR_SLACK = 1e-8


class WarmStartError(ValueError):
    """A warm start violates the model it is injected into."""


@dataclass(frozen=True)
class NetworkDesign:
    installed: frozenset[int]
    served: frozenset[Pair]
    paths: Mapping[Pair, tuple[int, ...]]
    lengths: Mapping[Pair, float]
    utilities: UtilityProfile
    objective: float
    gap: float
    wall_time: float
    cost: float
    floor: float | None = None
    bound: float = math.nan
    status: str = "optimal"
    solver_utilities: Mapping[Pair, float] = field(default_factory=dict, repr=False)


def _tag(value) -> str:
    return re.sub(r"[^A-Za-z0-9]", "_", str(value))


def _pair_tag(pair: Pair) -> str:
    return f"{_tag(pair[0])}_{_tag(pair[1])}"


def _add_design_space(model: MilpModel, problem: DesignProblem) -> None:
    """Variables and constraints shared by every welfare objective."""
    net = problem.network
    alpha = problem.alpha
    arcs = net.arcs
    out_arcs: dict = {v: [] for v in net.node_ids}
    in_arcs: dict = {v: [] for v in net.node_ids}
    for a, arc in enumerate(arcs):
        out_arcs[arc.tail].append(a)
        in_arcs[arc.head].append(a)

    x = {a: model.add_binary("x", a, f"x_{a}") for a in range(len(arcs))}
    y, ell, u = {}, {}, {}
    for pair in problem.pairs:
        y[pair] = model.add_binary("y", pair, f"y_{_pair_tag(pair)}")
    f = {}
    for pair in problem.pairs:
        for a in range(len(arcs)):
            f[a, pair] = model.add_binary("f", (a, pair), f"f_{a}_{_pair_tag(pair)}")
    for pair in problem.pairs:
        ell[pair] = model.add_var("l", pair, f"l_{_pair_tag(pair)}", 0.0, INF)
    for pair in problem.pairs:
        u[pair] = model.add_var("u", pair, f"u_{_pair_tag(pair)}", 0.0, 1.0)

    model.add_constraint({x[a]: arcs[a].cost for a in x}, ub=problem.budget, name="budget")
    for v in net.node_ids:
        coeffs: dict[int, float] = {}
        for a in out_arcs[v]:
            coeffs[x[a]] = coeffs.get(x[a], 0.0) + 1.0
        for a in in_arcs[v]:
            coeffs[x[a]] = coeffs.get(x[a], 0.0) - 1.0
        model.add_constraint(coeffs, 0.0, 0.0, name=f"mass_{_tag(v)}")
    for pair in problem.pairs:
        o, d = pair
        for v in net.node_ids:
            coeffs = {}
            for a in out_arcs[v]:
                coeffs[f[a, pair]] = 1.0
            for a in in_arcs[v]:
                coeffs[f[a, pair]] = -1.0
            rhs = (v == o) - (v == d)
            if rhs:
                coeffs[y[pair]] = -float(rhs)
            model.add_constraint(coeffs, 0.0, 0.0, name=f"flow_{_pair_tag(pair)}_{_tag(v)}")
    for pair in problem.pairs:
        for a in range(len(arcs)):
            model.add_constraint({f[a, pair]: 1.0, x[a]: -1.0}, ub=0.0,
                                 name=f"inst_{a}_{_pair_tag(pair)}")
    for pair in problem.pairs:
        coeffs = {ell[pair]: 1.0}
        for a in range(len(arcs)):
            coeffs[f[a, pair]] = -arcs[a].length
        model.add_constraint(coeffs, 0.0, 0.0, name=f"len_{_pair_tag(pair)}")
    for pair in problem.pairs:
        star = problem.shortest_length(pair)
        model.add_constraint({ell[pair]: 1.0, y[pair]: -alpha * star}, ub=0.0,
                             name=f"detour_{_pair_tag(pair)}")
    for pair in problem.pairs:
        star = problem.shortest_length(pair)
        model.add_constraint(
            {u[pair]: 1.0, ell[pair]: 1.0 / (star * (alpha - 1.0)), y[pair]: -alpha / (alpha - 1.0)},
            0.0, 0.0, name=f"util_{_pair_tag(pair)}",
        )


def build_model(
    problem: DesignProblem,
    spec: WelfareSpec | None = None,
    floors: Mapping[Pair, float] | None = None,
    *,
    pure_floor: bool = False,
) -> MilpModel:
    """Assemble the design MILP for ``spec`` (utilitarian when ``None``).

    Max-min style specs get an epigraph variable ``z`` bounded by
    ``(1 - p) * u`` over the active pairs.  ``floors`` adds ``u >= t`` rows.
    With ``pure_floor`` the objective is ``z`` alone (used to locate the
    smallest budget with a positive floor).
    """
    kind = "utilitarian" if spec is None else spec.kind
    floors = dict(floors or {})
    pairs = set(problem.pairs)
    for pair, t in floors.items():
        if pair not in pairs:
            raise ValueError(f"floor for unknown pair {pair!r}")
        if not -FEAS_TOL <= t <= 1.0:
            raise ValueError(f"floor for {pair!r} must lie in [0, 1], got {t}")

    model = MilpModel()
    _add_design_space(model, problem)
    u = model.groups["u"]
    b, p = problem.demand, problem.priority

    objective = {u[pair]: float(b[pair] * p[pair]) for pair in problem.pairs}
    active: tuple[Pair, ...] = ()
    gamma = 1.0
    if kind != "utilitarian" or pure_floor:
        active = tuple(problem.pairs) if spec is None or spec.active_pairs is None else tuple(spec.active_pairs)
        if not active:
            raise ValueError("max-min objective needs a nonempty active OD set")
        unknown = [pair for pair in active if pair not in pairs]
        if unknown:
            raise ValueError(f"active set contains unknown pairs {unknown[:3]!r}")
        gamma = 1.0 if spec is None else spec.gamma
        z = model.add_var("z", None, "z", 0.0, 1.0)
        for pair in active:
            model.add_constraint({z: 1.0, u[pair]: -(1.0 - p[pair])}, ub=0.0, name=f"epi_{_pair_tag(pair)}")
        if pure_floor:
            objective = {z: 1.0}
        else:
            objective = {col: gamma * c for col, c in objective.items()}
            objective[z] = 1.0 - gamma
    for pair, t in sorted(floors.items(), key=lambda item: problem.pairs.index(item[0])):
        model.add_constraint({u[pair]: 1.0}, lb=max(0.0, t - FLOOR_SLACK), name=f"floor_{_pair_tag(pair)}")
    model.set_objective(objective, maximize=True)
    model.context.update(problem=problem, kind=kind, gamma=gamma, active=active,
                         floors=floors, pure_floor=pure_floor)
    return model


def _objective_of(model: MilpModel, utilities: Mapping[Pair, float]) -> tuple[float, float | None]:
    ctx = model.context
    problem: DesignProblem = ctx["problem"]
    total = welfare_utilitarian(utilities, problem.demand, problem.priority)
    if not ctx["active"]:
        return total, None
    floor = welfare_maxmin(utilities, problem.priority, ctx["active"])
    if ctx["pure_floor"]:
        return floor, floor
    gamma = ctx["gamma"]
    return gamma * total + (1.0 - gamma) * floor, floor


def design_from_installed(
    problem: DesignProblem, installed: Iterable[int]
) -> tuple[dict[Pair, tuple[int, ...]], dict[Pair, float], dict[Pair, float]]:
    """Shortest installed-subgraph path, length and utility for every pair.

    Pairs whose utility does not exceed the service tolerance are unserved:
    no path, infinite length, utility 0.
    """
    net = problem.network
    adj = graphs._adjacency(net, installed)
    paths: dict[Pair, tuple[int, ...]] = {}
    lengths: dict[Pair, float] = {}
    utils: dict[Pair, float] = {}
    by_origin: dict = {}
    for pair in problem.pairs:
        by_origin.setdefault(pair[0], []).append(pair)
    for o, group in by_origin.items():
        dist, pred = graphs.dijkstra(net, net.index[o], adj)
        for pair in group:
            d = pair[1]
            value = utility(float(dist[net.index[d]]), problem.shortest_length(pair), problem.alpha)
            if value > SERVED_TOL:
                path = graphs.shortest_path_arcs(pred, net, net.index[o], net.index[d])
                paths[pair] = tuple(path)
                lengths[pair] = float(dist[net.index[d]])
                utils[pair] = value
            else:
                lengths[pair] = math.inf
                utils[pair] = 0.0
    return paths, lengths, utils


def design_start(model: MilpModel, design: NetworkDesign) -> np.ndarray:
    """Variable assignment reproducing ``design`` inside ``model``."""
    problem: DesignProblem = model.context["problem"]
    values = np.zeros(model.num_vars)
    g = model.groups
    for a in design.installed:
        values[g["x"][a]] = 1.0
    for pair in problem.pairs:
        if pair in design.served:
            values[g["y"][pair]] = 1.0
            for a in design.paths[pair]:
                values[g["f"][a, pair]] = 1.0
            values[g["l"][pair]] = design.lengths[pair]
            values[g["u"][pair]] = design.utilities[pair]
    if "z" in g:
        values[g["z"][None]] = min(1.0, welfare_maxmin(design.utilities, problem.priority, model.context["active"]))
    return values


def check_warm_start(model: MilpModel, design: NetworkDesign, tol: float = FEAS_TOL) -> np.ndarray:
    start = design_start(model, design)
    bad = model.violations(start, tol)
    if bad:
        raise WarmStartError(f"warm start violates {len(bad)} constraint(s), e.g. {bad[:5]}")
    return start


def solve(
    model: MilpModel,
    config: SolverConfig | None = None,
    warm_start: NetworkDesign | None = None,
    backend: MilpBackend | None = None,
) -> NetworkDesign:
    """Optimize ``model`` and return a certified design.

    The returned design uses, for each pair, the shortest path through the
    installed arcs (pairs at or beyond the detour limit become unserved).  This
    never lowers any utility, so it keeps every constraint and the objective
    bound valid; the engine's own utilities are kept in ``solver_utilities``.
    """
    config = config or SolverConfig()
    backend = backend or get_backend("highs")
    problem: DesignProblem = model.context["problem"]
    start = check_warm_start(model, warm_start) if warm_start is not None else None

    t0 = time.perf_counter()
    result = backend.optimize(model, config, start)
    if result.status == "infeasible":
        raise SolverError("model reported infeasible; the all-zero design should always be feasible")
    if result.values is None:
        raise SolverError(f"no incumbent found within {config.time_limit}s")
    values = result.values
    g = model.groups

    installed = frozenset(a for a, col in g["x"].items() if values[col] > 0.5)
    raw: dict[Pair, float] = {}
    for pair in problem.pairs:
        served = values[g["y"][pair]] > 0.5
        limit = problem.alpha * problem.shortest_length(pair)
        if served and values[g["l"][pair]] >= limit - FEAS_TOL:
            served = False
        raw[pair] = float(min(max(values[g["u"][pair]], 0.0), 1.0)) if served else 0.0

    paths, lengths, utils = design_from_installed(problem, installed)
    profile = UtilityProfile(utils)
    objective, floor = _objective_of(model, profile)
    bound = result.bound if math.isfinite(result.bound) else math.inf
    slack = max(0.0, bound - objective)
    gap = 0.0 if slack <= 1e-9 else slack / max(abs(objective), 1e-9)
    if gap > config.gap + 1e-12:
        log.warning("solve finished with gap %.3g above the target %.3g (%s)", gap, config.gap, result.status)
    return NetworkDesign(
        installed=installed,
        served=frozenset(paths),
        paths=paths,
        lengths=lengths,
        utilities=profile,
        objective=objective,
        gap=gap,
        wall_time=time.perf_counter() - t0,
        cost=problem.network.total_cost(installed),
        floor=floor,
        bound=bound,
        status=result.status,
        solver_utilities=raw,
    )


def certify_design(problem: DesignProblem, design: NetworkDesign, tol: float = FEAS_TOL) -> list[str]:
    """Check a design against the model's constraints; returns problems found."""
    from equitransit.network import evaluate_utility_profile

    issues = []
    net = problem.network
    if not graphs.is_circulation(net, design.installed):
        issues.append("installed arcs are not a circulation")
    if design.cost > problem.budget + tol:
        issues.append(f"cost {design.cost} exceeds budget {problem.budget}")
    reference = evaluate_utility_profile(problem, design.installed)
    for pair in problem.pairs:
        star = problem.shortest_length(pair)
        if pair in design.served:
            path = design.paths[pair]
            node = pair[0]
            for a in path:
                arc = net.arcs[a]
                if a not in design.installed or arc.tail != node:
                    issues.append(f"{pair}: path is not a walk over installed arcs")
                    break
                node = arc.head
            if node != pair[1]:
                issues.append(f"{pair}: path does not end at the destination")
            length = sum(net.arcs[a].length for a in path)
            if abs(length - design.lengths[pair]) > tol:
                issues.append(f"{pair}: reported length differs from path length")
            if length > problem.alpha * star + tol:
                issues.append(f"{pair}: path exceeds the detour limit")
            if abs(design.utilities[pair] - utility(length, star, problem.alpha)) > tol:
                issues.append(f"{pair}: utility does not match its path")
        elif design.utilities[pair] != 0.0:
            issues.append(f"{pair}: unserved pair with nonzero utility")
        if abs(reference[pair] - design.utilities[pair]) > tol:
            issues.append(f"{pair}: utility differs from the installed-subgraph shortest path")
    return issues


def full_service_model(problem: DesignProblem) -> MilpModel:
    """Minimum-cost circulation routing every pair along one of its shortest paths."""
    net = problem.network
    arcs = net.arcs
    model = MilpModel()
    x = {a: model.add_binary("x", a, f"x_{a}") for a in range(len(arcs))}
    f = {}
    for pair in problem.pairs:
        for a in range(len(arcs)):
            f[a, pair] = model.add_binary("f", (a, pair), f"f_{a}_{_pair_tag(pair)}")
    for v in net.node_ids:
        coeffs: dict[int, float] = {}
        for a, arc in enumerate(arcs):
            if arc.tail == v:
                coeffs[x[a]] = 1.0
            elif arc.head == v:
                coeffs[x[a]] = -1.0
        model.add_constraint(coeffs, 0.0, 0.0, name=f"mass_{_tag(v)}")
    for pair in problem.pairs:
        o, d = pair
        for v in net.node_ids:
            coeffs = {}
            for a, arc in enumerate(arcs):
                if arc.tail == v:
                    coeffs[f[a, pair]] = 1.0
                elif arc.head == v:
                    coeffs[f[a, pair]] = -1.0
            rhs = float((v == o) - (v == d))
            model.add_constraint(coeffs, rhs, rhs, name=f"flow_{_pair_tag(pair)}_{_tag(v)}")
        for a in range(len(arcs)):
            model.add_constraint({f[a, pair]: 1.0, x[a]: -1.0}, ub=0.0, name=f"inst_{a}_{_pair_tag(pair)}")
        star = problem.shortest_length(pair)
        model.add_constraint({f[a, pair]: arcs[a].length for a in range(len(arcs))},
                             ub=star * (1.0 + 1e-9) + 1e-9, name=f"short_{_pair_tag(pair)}")
    model.set_objective({x[a]: arcs[a].cost for a in x}, maximize=False)
    model.context.update(problem=problem)
    return model


def min_cost_full_service(
    problem: DesignProblem, config: SolverConfig | None = None, backend: MilpBackend | None = None
) -> float:
    """Smallest budget at which every pair can travel along a shortest path."""
    config = config or SolverConfig()
    backend = backend or get_backend("highs")
    model = full_service_model(problem)
    everything = None
    all_arcs = range(len(problem.network.arcs))
    if graphs.is_circulation(problem.network, all_arcs):
        everything = np.zeros(model.num_vars)
        for col in model.groups["x"].values():
            everything[col] = 1.0
        paths, _, _ = design_from_installed(problem, all_arcs)
        for pair, path in paths.items():
            for a in path:
                everything[model.groups["f"][a, pair]] = 1.0
    result = backend.optimize(model, config, everything)
    if result.status == "infeasible":
        # possible only when the arc set itself is not a circulation
        raise ValidationError("no circulation routes every OD pair along a shortest path; "
                              "the budget range is undefined for this network")
    if result.values is None:
        raise SolverError(f"full-service model returned no solution ({result.status})")
    installed = [a for a, col in model.groups["x"].items() if result.values[col] > 0.5]
    return problem.network.total_cost(installed)


def max_floor(problem: DesignProblem, config: SolverConfig | None = None,
              backend: MilpBackend | None = None) -> float:
    """Largest achievable ``min (1 - p) u`` over all pairs at the problem's budget."""
    model = build_model(problem, pure_floor=True)
    design = solve(model, config, backend=backend)
    return float(design.floor)


def min_budget_positive_floor(
    problem: DesignProblem,
    grid_step: float,
    config: SolverConfig | None = None,
    backend: MilpBackend | None = None,
    b_max: float | None = None,
) -> float:
    """Smallest grid budget in ``[0, B_max]`` at which every pair gets positive utility."""
    if not 0.0 < grid_step <= 1.0:
        raise ValueError(f"grid_step must lie in (0, 1], got {grid_step}")
    if b_max is None:
        b_max = min_cost_full_service(problem, config, backend)
    steps = math.ceil(1.0 / grid_step - 1e-9)

    def budget(i: int) -> float:
        return b_max if i >= steps else i * grid_step * b_max

    def positive(i: int) -> bool:
        return max_floor(problem.with_budget(budget(i)), config, backend) > SERVED_TOL

    if not positive(steps):
        raise SolverError("no budget on the grid yields a positive floor")
    lo, hi = -1, steps  # positive(lo) is False by convention, positive(hi) is True
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if positive(mid):
            hi = mid
        else:
            lo = mid
    return budget(hi)
