"""A small, solver-agnostic MILP container: variables, linear rows, objective."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

INF = math.inf


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float
    ub: float
    integer: bool


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: dict[int, float]
    lb: float
    ub: float


@dataclass
class MilpModel:
    """Variable registry plus linear constraints and a linear objective.

    ``groups`` maps a family name ("x", "y", "f", "l", "u", "z") to a dict from
    the family's key (arc id, OD pair, ``(arc, pair)``, or ``None``) to the
    variable's column index.  ``context`` carries whatever the builder needs to
    turn a solution back into a design.
    """

    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    maximize: bool = True
    groups: dict[str, dict[Any, int]] = field(default_factory=dict)
    context: dict[str, Any] = field(default_factory=dict)

    def add_var(self, family: str, key: Any, name: str, lb: float = 0.0, ub: float = INF,
                integer: bool = False) -> int:
        col = len(self.variables)
        self.variables.append(Variable(name, lb, ub, integer))
        self.groups.setdefault(family, {})[key] = col
        return col

    def add_binary(self, family: str, key: Any, name: str) -> int:
        return self.add_var(family, key, name, 0.0, 1.0, integer=True)

    def add_constraint(self, coeffs: dict[int, float], lb: float = -INF, ub: float = INF,
                       name: str = "") -> int:
        n = len(self.variables)
        for col in coeffs:
            if not 0 <= col < n:
                raise IndexError(f"constraint {name!r} references unregistered column {col}")
        row = len(self.constraints)
        self.constraints.append(Constraint(name or f"c{row}", dict(coeffs), lb, ub))
        return row

    def set_objective(self, coeffs: dict[int, float], maximize: bool = True) -> None:
        self.objective = {col: c for col, c in coeffs.items() if c != 0.0}
        self.maximize = maximize

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def count(self, family: str) -> int:
        return len(self.groups.get(family, {}))

    def col(self, family: str, key: Any = None) -> int:
        return self.groups[family][key]

    def objective_value(self, values: np.ndarray) -> float:
        return float(sum(c * values[col] for col, c in self.objective.items()))

    def violations(self, values: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Names of bounds, integrality or rows violated by ``values`` beyond ``tol``."""
        bad = []
        for col, var in enumerate(self.variables):
            v = values[col]
            if v < var.lb - tol or v > var.ub + tol:
                bad.append(f"bound:{var.name}")
            elif var.integer and abs(v - round(v)) > tol:
                bad.append(f"integrality:{var.name}")
        for con in self.constraints:
            act = sum(c * values[col] for col, c in con.coeffs.items())
            if act < con.lb - tol or act > con.ub + tol:
                bad.append(con.name)
        return bad

    def to_lp(self) -> str:
        """Render in CPLEX LP text format (for debugging)."""
        names = [v.name for v in self.variables]

        def expr(coeffs: dict[int, float]) -> str:
            if not coeffs:
                return "0"
            parts = []
            for col, c in sorted(coeffs.items()):
                sign = "-" if c < 0 else "+"
                parts.append(f"{sign} {abs(c):.12g} {names[col]}")
            text = " ".join(parts)
            return text[2:] if text.startswith("+ ") else text

        out = io.StringIO()
        out.write("Maximize\n" if self.maximize else "Minimize\n")
        out.write(f" obj: {expr(self.objective)}\n")
        out.write("Subject To\n")
        for con in self.constraints:
            body = expr(con.coeffs)
            if con.lb == con.ub:
                out.write(f" {con.name}: {body} = {con.lb:.12g}\n")
                continue
            if con.lb > -INF:
                out.write(f" {con.name}_lo: {body} >= {con.lb:.12g}\n")
            if con.ub < INF:
                out.write(f" {con.name}{'_hi' if con.lb > -INF else ''}: {body} <= {con.ub:.12g}\n")
        out.write("Bounds\n")
        for var in self.variables:
            if var.integer and var.lb == 0 and var.ub == 1:
                continue
            ub = "+inf" if var.ub == INF else f"{var.ub:.12g}"
            out.write(f" {var.lb:.12g} <= {var.name} <= {ub}\n")
        binaries = [v.name for v in self.variables if v.integer and v.lb == 0 and v.ub == 1]
        if binaries:
            out.write("Binary\n")
            for i in range(0, len(binaries), 8):
                out.write(" " + " ".join(binaries[i:i + 8]) + "\n")
        generals = [v.name for v in self.variables if v.integer and not (v.lb == 0 and v.ub == 1)]
        if generals:
            out.write("General\n " + " ".join(generals) + "\n")
        out.write("End\n")
        return out.getvalue()
