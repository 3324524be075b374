"""Ground-state search: exhaustive oracle and simulated annealing."""

from app.solver.anneal import ResolvedSchedule, auto_betas, exact_report, resolve_schedule, solve_sa
from app.solver.exact import connected_components, solve_exact
from app.solver.metrics import success_probability, tts
from app.solver.report import RunReport, SpinSolution, read_report, write_report

__all__ = [
    "ResolvedSchedule",
    "RunReport",
    "SpinSolution",
    "auto_betas",
    "connected_components",
    "exact_report",
    "read_report",
    "resolve_schedule",
    "solve_exact",
    "solve_sa",
    "success_probability",
    "tts",
    "write_report",
]
