from equitransit.milp.backends import (
    BackendResult,
    HighsBackend,
    MilpBackend,
    ScipyBackend,
    SolverConfig,
    SolverError,
    get_backend,
)
from equitransit.milp.builder import (
    NetworkDesign,
    WarmStartError,
    build_model,
    certify_design,
    check_warm_start,
    design_start,
    max_floor,
    min_budget_positive_floor,
    min_cost_full_service,
    solve,
)
from equitransit.milp.model import Constraint, MilpModel, Variable

__all__ = [
    "BackendResult", "Constraint", "HighsBackend", "MilpBackend", "MilpModel", "NetworkDesign",
    "ScipyBackend", "SolverConfig", "SolverError", "Variable", "WarmStartError", "build_model",
    "certify_design", "check_warm_start", "design_start", "get_backend", "max_floor",
    "min_budget_positive_floor", "min_cost_full_service", "solve",
]
