"""Budget sweeps, per-group metrics and plot-ready CSV output."""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from equitransit.milp import (
    MilpBackend,
    NetworkDesign,
    SolverConfig,
    WarmStartError,
    build_model,
    check_warm_start,
    min_cost_full_service,
    solve,
)
from equitransit.network import DesignProblem, Pair, PriorityProfile
from equitransit.welfare import LeximaxTrace, WelfareSpec

log = logging.getLogger(__name__)

SERVED_TOL = 1e-6


@dataclass(frozen=True)
class GroupMetrics:
    avg_utility: tuple[float, ...]
    pct_served: tuple[float, ...]


def group_metrics(
    utilities: Mapping[Pair, float], groups: Mapping[Pair, int], demand: Mapping[Pair, int], k: int | None = None
) -> GroupMetrics:
    """Unweighted mean utility and demand-weighted percent served, per group.

    A group with no pairs reports a NaN mean; a group with no demand reports
    100 percent served.
    """
    k = max(groups.values(), default=0) if k is None else k
    avg, pct = [], []
    for g in range(1, k + 1):
        members = [pair for pair, label in groups.items() if label == g]
        avg.append(sum(utilities[pair] for pair in members) / len(members) if members else math.nan)
        total = sum(demand[pair] for pair in members)
        served = sum(demand[pair] for pair in members if utilities[pair] > SERVED_TOL)
        pct.append(100.0 * served / total if total > 0 else 100.0)
    return GroupMetrics(tuple(avg), tuple(pct))


@dataclass(frozen=True)
class SweepRow:
    budget_fraction: float
    budget: float
    objective: float
    gap: float
    avg_utility: tuple[float, ...]
    pct_served: tuple[float, ...]
    solve_time: float = 0.0
    warm_started: bool = False
    design: NetworkDesign | None = field(default=None, compare=False, repr=False)


@dataclass
class SweepResult:
    k: int
    rows: list[SweepRow] = field(default_factory=list)
    b_max: float = math.nan
    b_min: float | None = None
    error: str | None = None

    @property
    def complete(self) -> bool:
        return self.error is None


def _validate_fractions(fractions: Sequence[float]) -> list[float]:
    fractions = [float(f) for f in fractions]
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"budget fractions must lie in (0, 1], got {f}")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("budget fractions must be strictly increasing")
    return fractions


def run_sweep(
    problem: DesignProblem,
    spec: WelfareSpec,
    fractions: Sequence[float],
    config: SolverConfig | None = None,
    backend: MilpBackend | None = None,
    *,
    b_max: float | None = None,
    min_budget: float | None = None,
    groups: Mapping[Pair, int] | None = None,
    k: int | None = None,
) -> SweepResult:
    """Solve at ``fraction * B_max`` for each fraction, warm-starting upward.

    Fractions whose budget falls below ``min_budget`` are skipped.  ``groups``
    defaults to the problem's own priority groups; pass the priority-aware
    labels when sweeping an equal-priority baseline so the two line up.
    """
    fractions = _validate_fractions(fractions)
    if spec.kind == "leximax":
        raise ValueError("sweeps run utilitarian or trade-off specs; use solve_leximax for leximax")
    groups = problem.priority.group_of if groups is None else groups
    k = max(groups.values(), default=1) if k is None else k
    if b_max is None:
        b_max = min_cost_full_service(problem, config, backend)
    result = SweepResult(k=k, b_max=b_max, b_min=min_budget)
    previous: NetworkDesign | None = None
    for fraction in fractions:
        budget = fraction * b_max
        if min_budget is not None and budget < min_budget - 1e-9:
            continue
        instance = problem.with_budget(budget)
        model = build_model(instance, spec)
        start = None
        if previous is not None:
            try:
                check_warm_start(model, previous)
                start = previous
            except WarmStartError as exc:
                log.warning("warm start rejected at fraction %.4g: %s", fraction, exc)
        try:
            design = solve(model, config, start, backend)
        except Exception as exc:  # noqa: BLE001 - partial results are flagged, not lost
            result.error = f"fraction {fraction}: {exc}"
            log.error("sweep aborted: %s", result.error)
            return result
        metrics = group_metrics(design.utilities, groups, problem.demand, k)
        result.rows.append(
            SweepRow(fraction, budget, design.objective, design.gap, metrics.avg_utility,
                     metrics.pct_served, design.wall_time, start is not None, design)
        )
        previous = design
    return result


def equal_priority(problem: DesignProblem, value: float = 0.5) -> DesignProblem:
    """Same instance with every pair at one priority (the priority-agnostic baseline)."""
    return problem.with_priority(PriorityProfile.uniform(problem.pairs, value))


def utility_gain(aware: SweepResult, agnostic: SweepResult) -> list[tuple[float, float, tuple[float, ...]]]:
    """Per-budget, per-group difference in average utility (aware minus agnostic)."""
    other = {round(row.budget_fraction, 12): row for row in agnostic.rows}
    out = []
    for row in aware.rows:
        match = other.get(round(row.budget_fraction, 12))
        if match is None:
            continue
        out.append((row.budget_fraction, row.budget,
                    tuple(a - b for a, b in zip(row.avg_utility, match.avg_utility))))
    return out


def _fmt(value: float) -> str:
    return repr(float(value))


def sweep_header(k: int) -> list[str]:
    return (["budget_fraction", "budget", "objective", "gap"]
            + [f"avg_u_g{g}" for g in range(1, k + 1)]
            + [f"pct_served_g{g}" for g in range(1, k + 1)])


def emit_csv(result: SweepResult, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(sweep_header(result.k))
        for row in result.rows:
            writer.writerow([_fmt(row.budget_fraction), _fmt(row.budget), _fmt(row.objective), _fmt(row.gap)]
                            + [_fmt(v) for v in row.avg_utility] + [_fmt(v) for v in row.pct_served])
    return path


def read_csv(path: str | Path) -> SweepResult:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        k = (len(header) - 4) // 2
        if header != sweep_header(k):
            raise ValueError(f"{path}: not a sweep CSV")
        rows = []
        for rec in reader:
            values = [float(v) for v in rec]
            rows.append(SweepRow(values[0], values[1], values[2], values[3],
                                 tuple(values[4:4 + k]), tuple(values[4 + k:4 + 2 * k])))
    return SweepResult(k=k, rows=rows)


def emit_gain_csv(gain: list[tuple[float, float, tuple[float, ...]]], k: int, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["budget_fraction", "budget"] + [f"gain_g{g}" for g in range(1, k + 1)])
        for fraction, budget, values in gain:
            writer.writerow([_fmt(fraction), _fmt(budget)] + [_fmt(v) for v in values])
    return path


LEXIMAX_HEADER = ["iteration", "removed_pair", "floor", "objective", "avg_u_remaining", "avg_u_all"]


def emit_leximax_csv(trace: LeximaxTrace, path: str | Path) -> Path:
    """One row per iteration; ``floor`` is the priority-adjusted floor ``(1 - p) u``."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LEXIMAX_HEADER)
        for step in trace.steps:
            o, d = step.removed_pair
            writer.writerow([step.iteration, f"{o}->{d}", _fmt(step.floor), _fmt(step.objective),
                             _fmt(step.avg_u_remaining), _fmt(step.avg_u_all)])
    return path


def emit_design_csv(problem: DesignProblem, design: NetworkDesign, path: str | Path) -> Path:
    path = Path(path)
    net = problem.network
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["origin", "destination", "demand", "priority", "group", "served", "length", "utility", "path"])
        for pair in problem.pairs:
            path_nodes = ""
            if pair in design.served:
                path_nodes = " ".join([str(pair[0])] + [str(net.arcs[a].head) for a in design.paths[pair]])
            writer.writerow([pair[0], pair[1], problem.demand[pair], _fmt(problem.priority[pair]),
                             problem.priority.group_of[pair], int(pair in design.served),
                             _fmt(design.lengths[pair]), _fmt(design.utilities[pair]), path_nodes])
    return path


def demand_by_group(demand: Mapping[Pair, int], groups: Mapping[Pair, int], k: int) -> list[float]:
    """Fraction of total demand in each priority group."""
    total = sum(demand.values())
    return [sum(demand[p] for p, g in groups.items() if g == i) / total if total else 0.0
            for i in range(1, k + 1)]
