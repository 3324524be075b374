"""End-to-end lowering of a training problem into a QUBO instance.

registry -> constraints -> loss -> penalty -> order reduction -> integer QUBO.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Union

from app.compiler.penalty import PenaltyConfig, derive_rho, penalize
from app.compiler.qubo import QuboInstance, write_qubo
from app.compiler.rosenberg import ReductionTrace, reduce_order, write_trace
from app.config import settings
from app.data.dataset import QuantizedDataset
from app.encoding.manifest import write_manifest
from app.encoding.registry import VariableRegistry, build_registry
from app.poly.polynomial import PseudoBooleanPoly
from app.poly.textio import format_rational
from app.topology.constraints import ConstraintSet, build_constraints
from app.topology.losses import SnapSummary, build_loss, snap_labels
from app.topology.network import NetworkSpec, with_input_statistics

LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class CompiledProblem:
    """Everything produced by one compilation, kept together for decode and audit."""

    net: NetworkSpec
    dataset: QuantizedDataset
    registry: VariableRegistry
    constraints: ConstraintSet
    objective: PseudoBooleanPoly
    penalized: PseudoBooleanPoly
    qubo: QuboInstance
    trace: ReductionTrace
    rho: Fraction
    snap: SnapSummary
    meta: Dict[str, str] = field(default_factory=dict)

    @property
    def num_original_bits(self) -> int:
        return self.registry.num_original_bits

    @property
    def num_auxiliary_bits(self) -> int:
        return len(self.trace)


def _run_meta(
    net: NetworkSpec,
    dataset: QuantizedDataset,
    config: PenaltyConfig,
    rho: Fraction,
    registry: VariableRegistry,
    constraints: ConstraintSet,
    trace: ReductionTrace,
    snap: SnapSummary,
) -> Dict[str, str]:
    meta = {
        "net.layers": str(net.layers),
        "net.hidden": str(net.hidden),
        "net.inputs": str(net.inputs),
        "net.outputs": str(net.outputs),
        "net.input_bits": str(net.input_bits),
        "net.activation": net.hidden_activation.value,
        "net.loss": net.loss.value,
        "samples": str(dataset.size),
        "constraints": str(len(constraints)),
        "rho": format_rational(rho),
        "rho_source": "override" if config.rho is not None else "derived",
        "lambda_policy": str(config.lambda_policy),
        "lambda_max": format_rational(max((r.lam for r in trace), default=Fraction(0))),
        "aux_bits": str(len(trace)),
        "total_bits": str(registry.num_bits),
        "snapped_labels": str(snap.snapped),
        "snap_max_distance": format_rational(snap.max_distance),
        "default_restarts": str(settings.default_restarts),
        "sweeps_per_var": str(settings.sweeps_per_var),
        "hot_acceptance": str(settings.hot_acceptance),
        "cold_acceptance": str(settings.cold_acceptance),
        "exact_max_vars": str(settings.exact_max_vars),
    }
    for key in sorted(dataset.provenance):
        meta[f"data.{key}"] = dataset.provenance[key].replace(" ", "_")
    return meta


def compile_problem(
    net: NetworkSpec,
    dataset: QuantizedDataset,
    config: Optional[PenaltyConfig] = None,
) -> CompiledProblem:
    """Compile the training problem of ``net`` on ``dataset`` into a QUBO."""

    config = config or PenaltyConfig()
    net = with_input_statistics(net, dataset.inputs)
    dataset, snap = snap_labels(dataset, net.hidden)
    registry = build_registry(net, dataset.size)
    constraints = build_constraints(net, registry, dataset)
    loss = build_loss(net.loss, registry, dataset)
    rho = config.rho if config.rho is not None else derive_rho(constraints, dataset.size, net.outputs)
    LOGGER.info("Penalty weight rho=%s (%s)", rho, "override" if config.rho is not None else "derived")
    penalized = penalize(loss.objective, constraints, rho)
    qubo, trace = reduce_order(penalized, config, first_aux=registry.num_original_bits)
    registry = registry.with_auxiliaries(len(trace))
    meta = _run_meta(net, dataset, config, rho, registry, constraints, trace, snap)
    LOGGER.info(
        "Compiled QUBO: %s original + %s auxiliary = %s variables",
        registry.num_original_bits,
        len(trace),
        qubo.num_vars,
    )
    return CompiledProblem(
        net=net,
        dataset=dataset,
        registry=registry,
        constraints=constraints,
        objective=loss.objective,
        penalized=penalized,
        qubo=qubo,
        trace=trace,
        rho=rho,
        snap=snap,
        meta=meta,
    )


def write_artifacts(problem: CompiledProblem, out_dir: PathLike) -> Dict[str, Path]:
    """Write ``problem.qubo``, ``problem.manifest`` and ``problem.trace`` into ``out_dir``."""

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "qubo": out / "problem.qubo",
        "manifest": out / "problem.manifest",
        "trace": out / "problem.trace",
    }
    write_qubo(problem.qubo, paths["qubo"])
    write_manifest(problem.registry, paths["manifest"], problem.meta)
    write_trace(problem.trace, paths["trace"])
    LOGGER.info("Wrote compile artifacts to %s", out)
    return paths
