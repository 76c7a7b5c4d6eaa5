"""Lattice dynamic programming for Pareto fronts of multiobjective optimal control."""

from .lattice import LatticeVec, ball_lattice_points, snap, to_real
from .metrics import ConvergenceRow, convergence_table, hausdorff
from .oracle import analytic_front, objective_curve
from .pareto import ParetoFront, check_external_stability, dominates, incremental_filter, pareto_filter
from .problem import ConfigError, ControlProblem, Polynomial, load_problem
from .solver import (
    GridPlan,
    PlanError,
    SolverError,
    ValueFunction,
    backward_solve,
    brute_force_reference,
    build_domains,
    plan_grid,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "LatticeVec",
    "snap",
    "to_real",
    "ball_lattice_points",
    "ParetoFront",
    "dominates",
    "pareto_filter",
    "incremental_filter",
    "check_external_stability",
    "ConfigError",
    "ControlProblem",
    "Polynomial",
    "load_problem",
    "GridPlan",
    "PlanError",
    "SolverError",
    "ValueFunction",
    "plan_grid",
    "build_domains",
    "backward_solve",
    "brute_force_reference",
    "solve",
    "analytic_front",
    "objective_curve",
    "hausdorff",
    "convergence_table",
    "ConvergenceRow",
]
