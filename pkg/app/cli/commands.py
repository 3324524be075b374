"""Sub-command implementations.

Every command takes the parsed ``argparse`` namespace, writes its artifacts
and returns the in-memory result so tests can inspect it without re-reading
files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from app.compiler.penalty import LambdaPolicy, PenaltyConfig
from app.compiler.pipeline import CompiledProblem, compile_problem, write_artifacts
from app.compiler.qubo import read_qubo
from app.data.dataset import QuantizedDataset, read_dataset, write_dataset
from app.data.mnist import fetch_mnist, load_mnist_split, preprocess_mnist, select_training_subset
from app.data.moons import two_moon
from app.encoding.budget import complexity_term, total_spins
from app.encoding.registry import build_registry
from app.errors import ConfigError
from app.model.canonical import canonicalize
from app.model.evaluation import EvalReport, evaluate_model, write_confusion_csv, write_eval_report
from app.model.params import DecodedParameters, decode, write_params
from app.poly.textio import parse_rational
from app.schemas.data import MnistConfig, TwoMoonConfig
from app.schemas.reports import SpinBudgetReport, SpinBudgetRow
from app.schemas.run import AnnealSchedule, RunConfig
from app.solver.anneal import exact_report, solve_sa
from app.solver.exact import solve_exact
from app.solver.report import RunReport, write_report
from app.topology.netfile import read_network
from app.topology.network import LayerType, NetworkSpec

LOGGER = logging.getLogger(__name__)


def _penalty_config(args) -> PenaltyConfig:
    rho: Optional[Fraction] = None
    if getattr(args, "rho", None):
        try:
            rho = parse_rational(args.rho)
        except ValueError as exc:
            raise ConfigError(f"--rho: {exc}") from exc
    return PenaltyConfig(rho=rho, lambda_policy=LambdaPolicy.parse(getattr(args, "lambda_policy", None) or "auto"))


def _schedule(args) -> AnnealSchedule:
    fields = {
        "sweeps": getattr(args, "sweeps", None),
        "restarts": getattr(args, "restarts", None),
        "seed": getattr(args, "seed", None),
        "time_budget_ms": getattr(args, "time_budget", None),
    }
    try:
        return AnnealSchedule(**{key: value for key, value in fields.items() if value is not None})
    except ValidationError as exc:
        raise ConfigError(f"Invalid annealing schedule: {exc}") from exc


def _solve(qubo, args) -> RunReport:
    if getattr(args, "exact", False):
        return exact_report(solve_exact(qubo), qubo)
    return solve_sa(qubo, _schedule(args))


def cmd_compile(args) -> CompiledProblem:
    net = read_network(args.net)
    dataset = read_dataset(args.data)
    problem = compile_problem(net, dataset, _penalty_config(args))
    write_artifacts(problem, args.out)
    print(
        f"original_bits {problem.num_original_bits}\n"
        f"auxiliary_bits {problem.num_auxiliary_bits}\n"
        f"total_bits {problem.qubo.num_vars}\n"
        f"constraints {len(problem.constraints)}\n"
        f"rho {problem.rho}"
    )
    return problem


def cmd_solve(args) -> RunReport:
    qubo = read_qubo(args.qubo)
    report = _solve(qubo, args)
    out = Path(args.out)
    if out.suffix == "":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "report.txt"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, out)
    print(f"best_energy {report.best.energy}\np_s {float(report.success_probability()):.4f}\ntts {report.tts():.4f}")
    return report


def _task(dataset: QuantizedDataset) -> str:
    binary = all(value in (1, -1) for row in dataset.labels for value in row)
    return "binary_classification" if binary else "regression"


def _dense_only(net: NetworkSpec) -> bool:
    return all(spec.kind == LayerType.DENSE for spec in net.layer_kinds)


@dataclass
class TrainResult:
    problem: CompiledProblem
    report: RunReport
    params: DecodedParameters
    train: EvalReport
    test: Optional[EvalReport] = None
    best_restart_accuracy: Optional[Fraction] = None


def _best_restart_accuracy(problem: CompiledProblem, report: RunReport, task: str) -> Optional[Fraction]:
    if task != "binary_classification" or not report.states:
        return None
    accuracies = [
        evaluate_model(decode(state, problem.registry, problem.net), problem.dataset, task).accuracy
        for state in report.states
    ]
    return max(accuracies)


def cmd_train(args) -> TrainResult:
    try:
        config = RunConfig(
            net_path=args.net,
            data_path=args.data,
            test_data_path=getattr(args, "test_data", None),
            out_dir=args.out,
            rho=getattr(args, "rho", None),
            lambda_policy=getattr(args, "lambda_policy", None) or "auto",
            schedule=_schedule(args),
            exact=bool(getattr(args, "exact", False)),
        )
    except ValidationError as exc:
        raise ConfigError(f"Invalid run configuration: {exc}") from exc

    net = read_network(config.net_path)
    dataset = read_dataset(config.data_path)
    problem = compile_problem(net, dataset, _penalty_config(args))
    out = Path(config.out_dir)
    write_artifacts(problem, out)

    if config.exact:
        report = exact_report(solve_exact(problem.qubo), problem.qubo)
    else:
        report = solve_sa(problem.qubo, config.schedule)
    write_report(report, out / "report.txt")

    params = decode(report.best.assignment, problem.registry, problem.net)
    if _dense_only(problem.net):
        params = canonicalize(params)
    write_params(params, out / "params.txt")

    task = _task(problem.dataset)
    train = evaluate_model(params, problem.dataset, task)
    reports = [("train", train)]
    if train.confusion is not None:
        write_confusion_csv(train, out / "confusion_train.csv")
    test: Optional[EvalReport] = None
    if config.test_data_path is not None:
        test_set = read_dataset(config.test_data_path)
        test = evaluate_model(params, test_set, _task(test_set))
        reports.append(("test", test))
        if test.confusion is not None:
            write_confusion_csv(test, out / "confusion_test.csv")
    write_eval_report(reports, out / "eval.txt")

    best_restart = _best_restart_accuracy(problem, report, task)
    LOGGER.info("Training done: train mse %s, p_s %s", train.mse, float(report.success_probability()))
    print(f"train_mse {train.mse}")
    if train.accuracy is not None:
        print(f"train_accuracy {float(train.accuracy):.4f}")
    if best_restart is not None:
        print(f"best_restart_accuracy {float(best_restart):.4f}")
    if test is not None and test.accuracy is not None:
        print(f"test_accuracy {float(test.accuracy):.4f}")
    print(f"p_s {float(report.success_probability()):.4f}")
    return TrainResult(problem, report, params, train, test, best_restart)


def spin_budget(base: NetworkSpec, hidden: List[int], layers: List[int], samples: List[int]) -> SpinBudgetReport:
    """Registry bit counts over an (H, L, N) grid with the closed-form prediction alongside."""

    rows = []
    for h in hidden:
        for depth in layers:
            net = replace(base, hidden=h, layers=depth, layer_kinds=())
            for n in samples:
                registry = build_registry(net, n)
                counts: Dict[str, int] = registry.bit_counts()
                closed = total_spins(net, n) if net.is_reference and net.loss.value == "mse" else registry.num_bits
                term = complexity_term(h, depth, n)
                rows.append(
                    SpinBudgetRow(
                        hidden=h,
                        layers=depth,
                        samples=n,
                        counts=counts,
                        total=registry.num_bits,
                        closed_form=closed,
                        complexity=term,
                        ratio=registry.num_bits / term if term else float("inf"),
                    )
                )
    return SpinBudgetReport(rows=rows)


def cmd_count_spins(args) -> SpinBudgetReport:
    if args.net:
        base = read_network(args.net)
    else:
        base = NetworkSpec(layers=2, hidden=1, inputs=args.inputs, input_bits=args.input_bits)
    hidden = args.hidden or [base.hidden]
    layers = args.layers or [base.layers]
    samples = args.samples or [4]
    report = spin_budget(base, hidden, layers, samples)
    print(report.render())
    lo, hi = report.ratio_bounds
    print(f"ratio_range {lo:.4f} {hi:.4f}")
    return report


def cmd_preprocess_mnist(args) -> QuantizedDataset:
    try:
        cfg = MnistConfig(
            digits=tuple(args.digits),
            binarize_threshold=args.threshold,
            tri_level_low=args.t1,
            tri_level_high=args.t2,
        )
    except ValidationError as exc:
        raise ConfigError(f"Invalid MNIST configuration: {exc}") from exc
    if args.fetch:
        fetch_mnist(args.data_dir)
    images, labels = load_mnist_split(args.data_dir, args.split)
    dataset = preprocess_mnist(images, labels, cfg, source=f"mnist-{args.split}")
    if args.per_class:
        dataset = select_training_subset(dataset, args.per_class, args.seed)
    write_dataset(dataset, args.out)
    print(f"samples {dataset.size}")
    return dataset


def cmd_gen_two_moon(args) -> QuantizedDataset:
    try:
        cfg = TwoMoonConfig(n_samples=args.samples, noise=args.noise, seed=args.seed, input_bits=args.input_bits)
    except ValidationError as exc:
        raise ConfigError(f"Invalid two-moon configuration: {exc}") from exc
    dataset = two_moon(cfg.n_samples, cfg.noise, cfg.seed, cfg.input_bits)
    write_dataset(dataset, args.out)
    print(f"samples {dataset.size}")
    return dataset
