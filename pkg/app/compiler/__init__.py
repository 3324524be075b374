"""QCBO to QUBO lowering: penalties, order reduction and the compile pipeline."""

from app.compiler.penalty import LambdaPolicy, PenaltyConfig, derive_rho, penalize
from app.compiler.pipeline import CompiledProblem, compile_problem, write_artifacts
from app.compiler.qubo import QuboInstance, read_qubo, write_qubo
from app.compiler.rosenberg import (
    ReductionRecord,
    ReductionTrace,
    quadratize,
    read_trace,
    reduce_order,
    rosenberg_poly,
    write_trace,
)

__all__ = [
    "CompiledProblem",
    "LambdaPolicy",
    "PenaltyConfig",
    "QuboInstance",
    "ReductionRecord",
    "ReductionTrace",
    "compile_problem",
    "derive_rho",
    "penalize",
    "quadratize",
    "read_qubo",
    "read_trace",
    "reduce_order",
    "rosenberg_poly",
    "write_artifacts",
    "write_qubo",
    "write_trace",
]
