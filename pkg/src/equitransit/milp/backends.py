"""MILP engine adapters.

A backend takes a :class:`MilpModel`, a :class:`SolverConfig` and an optional
start vector, and returns a :class:`BackendResult`.  HiGHS (through
``highspy``) is the default because it accepts MIP starts; the SciPy adapter
drives the same engine through ``scipy.optimize.milp`` and ignores starts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import scipy.sparse as sp

from equitransit.milp.model import MilpModel


@dataclass(frozen=True)
class SolverConfig:
    gap: float = 1e-4
    time_limit: float = 600.0
    seed: int = 0
    verbose: bool = False
    threads: int = 1

    def __post_init__(self) -> None:
        if self.gap < 0:
            raise ValueError("gap must be nonnegative")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass(frozen=True)
class BackendResult:
    status: str  # "optimal", "feasible", "infeasible", "no_solution", "error"
    values: np.ndarray | None
    objective: float
    bound: float
    gap: float
    runtime: float


class SolverError(RuntimeError):
    """The engine failed to produce a usable incumbent."""


class MilpBackend(Protocol):
    name: str

    def optimize(self, model: MilpModel, config: SolverConfig,
                 start: np.ndarray | None = None) -> BackendResult: ...


def _matrix(model: MilpModel) -> tuple[sp.csc_matrix, np.ndarray, np.ndarray]:
    rows, cols, vals = [], [], []
    for r, con in enumerate(model.constraints):
        for c, v in con.coeffs.items():
            rows.append(r)
            cols.append(c)
            vals.append(v)
    a = sp.csc_matrix((vals, (rows, cols)), shape=(model.num_constraints, model.num_vars))
    a.sort_indices()
    lo = np.array([con.lb for con in model.constraints], dtype=float)
    hi = np.array([con.ub for con in model.constraints], dtype=float)
    return a, lo, hi


def _costs(model: MilpModel) -> np.ndarray:
    cost = np.zeros(model.num_vars)
    for col, c in model.objective.items():
        cost[col] = c
    return cost


class HighsBackend:
    name = "highs"

    def optimize(self, model: MilpModel, config: SolverConfig,
                 start: np.ndarray | None = None) -> BackendResult:
        import highspy

        h = highspy.Highs()
        h.setOptionValue("output_flag", bool(config.verbose))
        h.setOptionValue("mip_rel_gap", float(config.gap))
        h.setOptionValue("mip_abs_gap", 1e-9)
        h.setOptionValue("time_limit", float(config.time_limit))
        h.setOptionValue("random_seed", int(config.seed))
        h.setOptionValue("threads", int(config.threads))

        a, lo, hi = _matrix(model)
        lb = np.array([v.lb for v in model.variables], dtype=float)
        ub = np.array([v.ub for v in model.variables], dtype=float)
        integrality = np.array([1 if v.integer else 0 for v in model.variables], dtype=np.int32)
        h.passModel(
            model.num_vars, model.num_constraints, a.nnz, 1,
            -1 if model.maximize else 1, 0.0,
            _costs(model), lb, ub, lo, hi,
            a.indptr.astype(np.int32), a.indices.astype(np.int32), a.data.astype(float),
            integrality,
        )
        if start is not None:
            idx = np.arange(model.num_vars, dtype=np.int32)
            h.setSolution(model.num_vars, idx, np.asarray(start, dtype=float))

        t0 = time.perf_counter()
        h.run()
        runtime = time.perf_counter() - t0

        status = h.getModelStatus()
        info = h.getInfo()
        has_solution = info.primal_solution_status == 2
        if status in (highspy.HighsModelStatus.kInfeasible, highspy.HighsModelStatus.kUnboundedOrInfeasible):
            return BackendResult("infeasible", None, float("nan"), float("nan"), float("inf"), runtime)
        if not has_solution:
            return BackendResult("no_solution", None, float("nan"), float("nan"), float("inf"), runtime)
        values = np.array(h.getSolution().col_value, dtype=float)
        objective = float(info.objective_function_value)
        bound = float(info.mip_dual_bound)
        gap = float(info.mip_gap) if np.isfinite(info.mip_gap) else float("inf")
        label = "optimal" if status == highspy.HighsModelStatus.kOptimal else "feasible"
        return BackendResult(label, values, objective, bound, gap, runtime)


class ScipyBackend:
    """``scipy.optimize.milp``; starts are accepted but not used."""

    name = "scipy-milp"

    def optimize(self, model: MilpModel, config: SolverConfig,
                 start: np.ndarray | None = None) -> BackendResult:
        from scipy.optimize import Bounds, LinearConstraint, milp

        a, lo, hi = _matrix(model)
        sign = -1.0 if model.maximize else 1.0
        lb = np.array([v.lb for v in model.variables], dtype=float)
        ub = np.array([v.ub for v in model.variables], dtype=float)
        integrality = np.array([1 if v.integer else 0 for v in model.variables])
        constraints = [LinearConstraint(a, lo, hi)] if model.num_constraints else []
        t0 = time.perf_counter()
        res = milp(
            sign * _costs(model),
            integrality=integrality,
            bounds=Bounds(lb, ub),
            constraints=constraints,
            options={"mip_rel_gap": config.gap, "time_limit": config.time_limit,
                     "disp": bool(config.verbose)},
        )
        runtime = time.perf_counter() - t0
        if res.status == 2:
            return BackendResult("infeasible", None, float("nan"), float("nan"), float("inf"), runtime)
        if res.x is None:
            return BackendResult("no_solution", None, float("nan"), float("nan"), float("inf"), runtime)
        objective = sign * float(res.fun)
        bound = sign * float(getattr(res, "mip_dual_bound", res.fun))
        gap = float(getattr(res, "mip_gap", 0.0))
        return BackendResult("optimal" if res.status == 0 else "feasible", np.asarray(res.x),
                             objective, bound, gap, runtime)


BACKENDS: dict[str, type] = {"highs": HighsBackend, "scipy": ScipyBackend}


def get_backend(name: str = "highs") -> MilpBackend:
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}") from None
