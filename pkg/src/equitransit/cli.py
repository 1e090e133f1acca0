"""Command-line harness: score, solve, sweep, leximax, oracle-check, budget-range, demo-city.

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 oracle disagreement.
"""

from __future__ import annotations

import argparse
import csv
import logging
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from equitransit import __version__
from equitransit.ingest import ProblemConfig, TractRecord, assemble_problem, load_config, load_tracts
from equitransit.milp import (
    SolverConfig,
    SolverError,
    certify_design,
    get_backend,
    min_budget_positive_floor,
    min_cost_full_service,
)
from equitransit.network import (
    PriorityProfile,
    ValidationError,
    welfare_tradeoff,
    welfare_utilitarian,
)
from equitransit.oracle import EnumerationBudget, brute_force_optimum, random_instance
from equitransit.priority import ScoringConfig, TractAttributes, od_priorities, raw_scores, tract_priority
from equitransit.sweep import (
    emit_csv,
    emit_design_csv,
    emit_gain_csv,
    emit_leximax_csv,
    equal_priority,
    run_sweep,
    utility_gain,
)
from equitransit.welfare import WelfareSpec, solve_leximax, solve_spec

log = logging.getLogger("equitransit")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_ORACLE = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value TOML file; flags override its values")
    p.add_argument("--alpha", type=float)
    p.add_argument("--k", type=int, help="number of priority groups")
    p.add_argument("--bins", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--gap", type=float)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--cost-rule")
    p.add_argument("--topology")
    p.add_argument("--od-pairs", choices=["all", "positive"])
    p.add_argument("--grid-step", type=float)
    p.add_argument("--backend", choices=["highs", "scipy"])
    p.add_argument("--fractions", type=lambda s: tuple(float(v) for v in s.split(",")),
                   help="comma-separated budget fractions of B_max")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tracts", required=True, help="tracts.csv")
    p.add_argument("--od", required=True, help="od.csv")


def _priority_args(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--priorities", help="od_priorities.csv written by `score`")
    group.add_argument("--equal-priorities", action="store_true", help="every pair at priority 0.5")


def _objective_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--objective", choices=["utilitarian", "rawlsian", "tradeoff"], default="utilitarian",
                   help="rawlsian is the trade-off objective at the configured gamma (default 0.01)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equitransit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="priority scores per tract and per OD pair")
    _inputs(p)
    _common(p)

    p = sub.add_parser("solve", help="solve one budget under one objective")
    _inputs(p)
    _common(p)
    _priority_args(p)
    _objective_args(p)
    budget = p.add_mutually_exclusive_group(required=True)
    budget.add_argument("--budget", type=float)
    budget.add_argument("--budget-fraction", type=float, help="fraction of B_max")
    p.add_argument("--lp", help="also write the model in LP format to this path")

    p = sub.add_parser("sweep", help="warm-started budget sweep with per-group metrics")
    _inputs(p)
    _common(p)
    _priority_args(p)
    _objective_args(p)
    p.add_argument("--compare-equal-priorities", action="store_true")
    p.add_argument("--from-zero", action="store_true",
                   help="trade-off sweeps normally start at B_min; keep every fraction instead")

    p = sub.add_parser("leximax", help="iterative leximax at one budget")
    _inputs(p)
    _common(p)
    _priority_args(p)
    p.add_argument("--budget-fraction", type=float, default=0.8)
    p.add_argument("--iterations", type=int, help="default: every OD pair")

    p = sub.add_parser("oracle-check", help="MILP vs brute force on random tiny instances")
    _common(p)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--nodes", default="4,5", help="comma-separated node counts to draw from")
    p.add_argument("--arcs", default="6,10", help="min,max arc count")
    _objective_args(p)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("budget-range", help="print B_min and B_max")
    _inputs(p)
    _common(p)
    _priority_args(p)

    p = sub.add_parser("demo-city", help="write the synthetic 10-tract two-cluster city")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args: argparse.Namespace) -> ProblemConfig:
    config = load_config(args.config)
    return config.updated(
        alpha=args.alpha, k=args.k, bins=args.bins, epsilon=args.epsilon, gamma=args.gamma,
        gap=args.gap, time_limit=args.time_limit, seed=args.seed, cost_rule=args.cost_rule,
        topology=args.topology, od_pairs=args.od_pairs, grid_step=args.grid_step,
        backend=args.backend, budget_fractions=args.fractions,
    )


def _solver(config: ProblemConfig) -> SolverConfig:
    return SolverConfig(gap=config.gap, time_limit=config.time_limit, seed=config.seed)


def _scoring(config: ProblemConfig) -> ScoringConfig:
    return ScoringConfig(bins=config.bins, epsilon=config.epsilon, p_floor=config.p_floor,
                         p_ceil=config.p_ceil, k=config.k)


def _attrs(tracts: list[TractRecord]) -> dict[str, TractAttributes]:
    return {t.tract_id: TractAttributes(t.median_income, t.vehicle_rate) for t in tracts}


def load_od_priorities(path: str | Path) -> PriorityProfile:
    values, groups = {}, {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pair = (row["origin"], row["destination"])
            values[pair] = float(row["priority"])
            groups[pair] = int(row["group"])
    return PriorityProfile(values, groups)


def _problem(args: argparse.Namespace, config: ProblemConfig):
    tracts = load_tracts(args.tracts)
    if getattr(args, "equal_priorities", False):
        priority = None
    elif getattr(args, "priorities", None):
        priority = load_od_priorities(args.priorities)
    else:
        priority = tract_priority(_attrs(tracts), _scoring(config))
    return assemble_problem(tracts, args.od, priority, config)


def _spec(args: argparse.Namespace, config: ProblemConfig) -> WelfareSpec:
    if args.objective == "utilitarian":
        return WelfareSpec.utilitarian()
    return WelfareSpec("tradeoff", config.gamma)


def _manifest(out: Path, name: str, args: argparse.Namespace, config: ProblemConfig, extra: dict) -> None:
    import highspy

    lines = [f"command = {args.command}", f"equitransit = {__version__}",
             f"backend = {config.backend}", f"highspy = {getattr(highspy, '__version__', 'unknown')}"]
    for key, value in sorted(vars(config).items()):
        lines.append(f"config.{key} = {value!r}")
    for key in ("tracts", "od", "priorities", "objective"):
        if getattr(args, key, None) is not None:
            lines.append(f"{key} = {getattr(args, key)}")
    for key, value in extra.items():
        lines.append(f"{key} = {value!r}")
    (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_score(args, config: ProblemConfig) -> int:
    tracts = load_tracts(args.tracts)
    scoring = _scoring(config)
    attrs = _attrs(tracts)
    raw = raw_scores(attrs, scoring) if len(attrs) > 1 else {t: float("nan") for t in attrs}
    tract_p = tract_priority(attrs, scoring)
    problem = assemble_problem(tracts, args.od, tract_p, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tract_priorities.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tract_id", "raw_score", "priority"])
        for t in attrs:
            writer.writerow([t, repr(raw[t]), repr(tract_p[t])])
    with open(out / "od_priorities.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["origin", "destination", "count", "priority", "group"])
        for pair in problem.pairs:
            writer.writerow([pair[0], pair[1], problem.demand[pair], repr(problem.priority[pair]),
                             problem.priority.group_of[pair]])
    _manifest(out, "score_manifest.txt", args, config, {"tracts_scored": len(attrs)})
    print(f"scored {len(attrs)} tracts and {len(problem.pairs)} OD pairs -> {out}")
    return EXIT_OK


def cmd_solve(args, config: ProblemConfig) -> int:
    from equitransit.milp import build_model

    problem = _problem(args, config)
    solver, backend = _solver(config), get_backend(config.backend)
    b_max = None
    if args.budget_fraction is not None:
        b_max = min_cost_full_service(problem, solver, backend)
        budget = args.budget_fraction * b_max
    else:
        budget = args.budget
    problem = problem.with_budget(budget)
    spec = _spec(args, config)
    if args.lp:
        Path(args.lp).write_text(build_model(problem, spec).to_lp(), encoding="utf-8")
    design = solve_spec(problem, spec, solver, backend=backend)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_design_csv(problem, design, out / "design.csv")
    _manifest(out, "solve_manifest.txt", args, config,
              {"budget": budget, "b_max": b_max, "objective": design.objective, "gap": design.gap,
               "installed_arcs": len(design.installed), "cost": design.cost})
    print(f"budget={budget:.6g} objective={design.objective:.6g} gap={design.gap:.3g} "
          f"arcs={len(design.installed)} served={len(design.served)}/{len(problem.pairs)}")
    return EXIT_OK


def cmd_sweep(args, config: ProblemConfig) -> int:
    problem = _problem(args, config)
    solver, backend = _solver(config), get_backend(config.backend)
    spec = _spec(args, config)
    b_max = min_cost_full_service(problem, solver, backend)
    b_min = None
    if spec.kind == "tradeoff" and not args.from_zero:
        b_min = min_budget_positive_floor(problem, config.grid_step, solver, backend, b_max=b_max)
    fractions = config.budget_fractions
    groups = problem.priority.group_of
    k = max(config.k, max(groups.values()))
    tag = "utilitarian" if spec.kind == "utilitarian" else "rawlsian"

    def sweep(instance):
        return run_sweep(instance, spec, fractions, solver, get_backend(config.backend),
                         b_max=b_max, min_budget=b_min, groups=groups, k=k)

    if args.compare_equal_priorities:
        with ThreadPoolExecutor(max_workers=2) as pool:
            aware_f = pool.submit(sweep, problem)
            agnostic_f = pool.submit(sweep, equal_priority(problem))
            aware, agnostic = aware_f.result(), agnostic_f.result()
    else:
        aware, agnostic = sweep(problem), None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(aware, out / f"sweep_{tag}.csv")
    extra = {"b_max": b_max, "b_min": b_min, "rows": len(aware.rows),
             "max_gap": max((r.gap for r in aware.rows), default=0.0)}
    if agnostic is not None:
        emit_csv(agnostic, out / f"sweep_{tag}_equal.csv")
        emit_gain_csv(utility_gain(aware, agnostic), k, out / f"gain_{tag}.csv")
        extra["equal_max_gap"] = max((r.gap for r in agnostic.rows), default=0.0)
    _manifest(out, f"sweep_{tag}_manifest.txt", args, config, extra)
    failed = [r for r in (aware, agnostic) if r is not None and not r.complete]
    for r in failed:
        print(f"sweep incomplete: {r.error}", file=sys.stderr)
    print(f"B_max={b_max:.6g}" + (f" B_min={b_min:.6g}" if b_min is not None else "")
          + f" rows={len(aware.rows)} -> {out}")
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_leximax(args, config: ProblemConfig) -> int:
    problem = _problem(args, config)
    solver, backend = _solver(config), get_backend(config.backend)
    b_max = min_cost_full_service(problem, solver, backend)
    budget = args.budget_fraction * b_max
    trace = solve_leximax(problem.with_budget(budget), config.gamma, args.iterations, solver, backend)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_leximax_csv(trace, out / "leximax.csv")
    _manifest(out, "leximax_manifest.txt", args, config,
              {"b_max": b_max, "budget": budget, "iterations": len(trace),
               "max_gap": max((s.design.gap for s in trace.steps), default=0.0)})
    if trace.error:
        print(f"leximax stopped early: {trace.error}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"budget={budget:.6g} iterations={len(trace)} -> {out / 'leximax.csv'}")
    return EXIT_OK


def _oracle_case(index: int, seed: int, nodes: list[int], arcs: tuple[int, int], objective: str,
                 gamma: float, solver: SolverConfig, backend_name: str) -> dict:
    rng = random.Random(f"{seed}:{index}")
    n = rng.choice(nodes)
    m = rng.randint(max(arcs[0], n), min(arcs[1], n * (n - 1)))
    problem = random_instance(rng, n, m)
    if objective == "utilitarian":
        spec = WelfareSpec.utilitarian()

        def welfare(u):
            return welfare_utilitarian(u, problem.demand, problem.priority)
    else:
        spec = WelfareSpec("tradeoff", gamma)

        def welfare(u):
            return welfare_tradeoff(u, problem.demand, problem.priority, gamma)
    design = solve_spec(problem, spec, solver, backend=get_backend(backend_name))
    caps = EnumerationBudget(max_arcs=max(12, m), max_nodes=max(6, n))
    value, _ = brute_force_optimum(problem, welfare, caps)
    issues = certify_design(problem, design)
    raw_err = max(abs(design.solver_utilities[p] - design.utilities[p]) for p in problem.pairs)
    agree = abs(design.objective - value) <= 1e-6 + solver.gap * abs(value)
    return {"instance": index, "nodes": n, "arcs": m, "budget": problem.budget, "milp": design.objective,
            "oracle": value, "agree": agree and not issues and raw_err <= 1e-6,
            "utility_error": raw_err, "issues": len(issues)}


def cmd_oracle_check(args, config: ProblemConfig) -> int:
    solver = _solver(config)
    nodes = [int(v) for v in args.nodes.split(",")]
    lo, hi = (int(v) for v in args.arcs.split(","))
    jobs = [(i, config.seed, nodes, (lo, hi), args.objective, config.gamma, solver, config.backend)
            for i in range(args.instances)]
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda job: _oracle_case(*job), jobs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"oracle_{args.objective}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(results[0]) if results else ["instance"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(results)
    for r in results:
        print(f"instance {r['instance']:3d}: {'PASS' if r['agree'] else 'FAIL'} "
              f"milp={r['milp']:.9g} oracle={r['oracle']:.9g}")
    failures = sum(not r["agree"] for r in results)
    _manifest(out, f"oracle_{args.objective}_manifest.txt", args, config,
              {"instances": len(results), "failures": failures})
    print(f"{len(results) - failures}/{len(results)} instances agree")
    return EXIT_ORACLE if failures else EXIT_OK


def cmd_budget_range(args, config: ProblemConfig) -> int:
    problem = _problem(args, config)
    solver, backend = _solver(config), get_backend(config.backend)
    b_max = min_cost_full_service(problem, solver, backend)
    b_min = min_budget_positive_floor(problem, config.grid_step, solver, backend, b_max=b_max)
    print(f"B_min = {b_min!r}")
    print(f"B_max = {b_max!r}")
    return EXIT_OK


def cmd_demo_city(args, config: ProblemConfig) -> int:
    from equitransit.synthetic import DEFAULT_SEED, two_cluster_city

    tracts, od = two_cluster_city(args.out, DEFAULT_SEED if args.seed is None else args.seed)
    print(f"wrote {tracts} and {od}")
    return EXIT_OK


COMMANDS = {
    "score": cmd_score,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "leximax": cmd_leximax,
    "oracle-check": cmd_oracle_check,
    "budget-range": cmd_budget_range,
    "demo-city": cmd_demo_city,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ProblemConfig() if args.command == "demo-city" else _config(args)
        return COMMANDS[args.command](args, config)
    except (ValidationError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
