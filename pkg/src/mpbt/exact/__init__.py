"""Exact solvers: the integer program, its LP-file form and tree search."""
from .lpformat import export_lp, format_lp, format_solution, parse_lp, read_lp, read_solution
from .milp import (
    MilpModel,
    MilpSolution,
    build_milp,
    check_solution,
    reachability_matrix,
    solution_from_tree,
    solve_milp,
    tree_from_milp_solution,
)
from .search import brute_force_optimum, solve_exact

__all__ = [
    "MilpModel", "MilpSolution", "build_milp", "check_solution", "reachability_matrix",
    "solution_from_tree", "solve_milp", "tree_from_milp_solution", "export_lp", "format_lp",
    "format_solution", "parse_lp", "read_lp", "read_solution", "brute_force_optimum", "solve_exact",
]
