from .bnb import SolveLimits, SolveResult, is_feasible_point, solve_lp, solve_milp
from .lpfile import export_lp_file, lp_text, read_solution, write_solution
from .model import MilpModel
from .simplex import NumericalError, simplex

__all__ = [
    "MilpModel", "SolveLimits", "SolveResult", "solve_lp", "solve_milp", "is_feasible_point", "simplex", "NumericalError",
    "export_lp_file", "lp_text", "read_solution", "write_solution",
]
