"""Energy-aware infrastructure sharing among cellular operators."""

from .economics import AffineProfit, Profit, Tariffs
from .geometry import AreaSpec, Assignment, Coverage, Point, UserDistribution, assign_users, build_grid
from .lp import LinearProgram, LpOutcome, solve
from .molpp import EquilibriumResult, solve_equilibrium
from .power import PowerModel
from .scenario import Scenario, ScenarioError, bundled_scenario, load_scenario, parse_scenario
from .sleeping import (
    Baseline,
    CollaborationOutcome,
    ScenarioInfeasible,
    exhaustive_search,
    optimize_collab,
    optimize_noncollab,
)

__version__ = "0.1.0"

__all__ = [
    "AffineProfit",
    "AreaSpec",
    "Assignment",
    "Baseline",
    "CollaborationOutcome",
    "Coverage",
    "EquilibriumResult",
    "LinearProgram",
    "LpOutcome",
    "Point",
    "PowerModel",
    "Profit",
    "Scenario",
    "ScenarioError",
    "ScenarioInfeasible",
    "Tariffs",
    "UserDistribution",
    "assign_users",
    "build_grid",
    "bundled_scenario",
    "exhaustive_search",
    "load_scenario",
    "optimize_collab",
    "optimize_noncollab",
    "parse_scenario",
    "solve",
    "solve_equilibrium",
]
