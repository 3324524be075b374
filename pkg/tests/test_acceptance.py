"""End-to-end properties of the compile, solve and decode chain."""

from fractions import Fraction

import numpy as np
import pytest

from app.compiler import compile_problem, write_artifacts
from app.compiler.qubo import QuboInstance
from app.compiler.rosenberg import quadratize
from app.config import settings
from app.data.dataset import QuantizedDataset
from app.data.mnist import load_mnist_split, mnist_available, preprocess_mnist, select_training_subset
from app.data.moons import two_moon
from app.encoding import VariableKey, VariableKind, build_registry
from app.model.baseline import enumerate_optimal_parameters
from app.model.canonical import canonicalize
from app.model.evaluation import evaluate_model
from app.model.forward import forward, honest_assignment, loss_value
from app.model.params import DecodedParameters, decode
from app.poly import PseudoBooleanPoly
from app.schemas.run import AnnealSchedule
from app.solver import metrics
from app.solver.anneal import solve_sa
from app.solver.exact import solve_exact
from app.solver.report import dumps_report
from app.topology.network import NetworkSpec

F = Fraction


def _all_rows(size):
    indices = np.arange(1 << size, dtype=np.int64)
    return ((indices[:, None] >> np.arange(size)[None, :]) & 1).astype(np.int8)


def _random_poly(rng, num_bits, num_terms, max_degree):
    terms = {}
    for _ in range(num_terms):
        size = int(rng.integers(1, max_degree + 1))
        bits = tuple(int(b) for b in rng.choice(num_bits, size=size, replace=False))
        terms[bits] = int(rng.integers(-9, 10))
    return PseudoBooleanPoly(terms)


class TestReductionEquivalence:
    def test_small_polynomials_exhaustively(self):
        # three terms of degree <= 5 need at most nine auxiliaries
        rng = np.random.default_rng(2024)
        num_bits = 7
        originals = _all_rows(num_bits)
        for _ in range(40):
            poly = _random_poly(rng, num_bits, 3, 5)
            reduced, _, num_vars = quadratize(poly, first_aux=num_bits)
            assert num_vars <= num_bits + 9
            numerators, denominator = poly.evaluate_batch(originals)
            original_min = F(int(numerators.min()), denominator)

            qubo = QuboInstance.from_poly(reduced, num_vars=num_vars)
            rows = _all_rows(num_vars)
            energies = qubo.energies(rows)
            assert qubo.rescale(int(energies.min())) == original_min

            ground = rows[energies == energies.min()][:, :num_bits]
            ground_numerators, _ = poly.evaluate_batch(ground)
            assert np.all(ground_numerators == numerators.min())

    def test_fourteen_bit_polynomials(self):
        rng = np.random.default_rng(14)
        num_bits = 14
        originals = _all_rows(num_bits)
        for _ in range(200):
            poly = _random_poly(rng, num_bits, 8, 5)
            reduced, trace, num_vars = quadratize(poly, first_aux=num_bits)
            qubo = QuboInstance.from_poly(reduced, num_vars=num_vars)
            numerators, denominator = poly.evaluate_batch(originals)
            qubo_denominator = qubo.global_scale.denominator

            honest = np.zeros((originals.shape[0], num_vars), dtype=np.int8)
            honest[:, :num_bits] = originals
            for record in trace:
                honest[:, record.v] = honest[:, record.u1] & honest[:, record.u2]
            energies = qubo.energies(honest)
            shifted = energies + qubo.constant_offset
            np.testing.assert_array_equal(shifted * denominator, numerators * qubo_denominator)

            sampled = rng.integers(0, 2, size=(4096, num_vars), dtype=np.int8)
            sampled_numerators, _ = poly.evaluate_batch(sampled[:, :num_bits])
            sampled_energies = qubo.energies(sampled) + qubo.constant_offset
            assert np.all(sampled_energies * denominator >= sampled_numerators * qubo_denominator)
            assert qubo.rescale(int(energies.min())) == F(int(numerators.min()), denominator)


@pytest.fixture(scope="module")
def tiny_ground_state():
    net = NetworkSpec(layers=2, hidden=1, inputs=1)
    dataset = QuantizedDataset(((1,),), ((F(1, 2),),), 0)
    problem = compile_problem(net, dataset)
    solution = solve_exact(problem.qubo, max_vars=problem.qubo.num_vars)
    return problem, solution


class TestPenaltySoundness:
    def test_ground_state_is_feasible(self, tiny_ground_state):
        problem, solution = tiny_ground_state
        original = list(solution.assignment[: problem.num_original_bits])
        for tag, phi in problem.constraints:
            assert phi.evaluate(original) == 0, tag
        assert problem.trace.dishonest(solution.assignment) == []

    def test_ground_energy_is_the_enumerated_optimum(self, tiny_ground_state):
        problem, solution = tiny_ground_state
        baseline = enumerate_optimal_parameters(problem.net, problem.dataset, build_registry(problem.net, 1))
        assert baseline.loss == F(1, 4)
        assert solution.rescaled_energy == baseline.loss
        params = decode(solution.assignment, problem.registry, problem.net)
        assert loss_value(params, problem.dataset) == baseline.loss
        assert canonicalize(params).key() in {optimum.key() for optimum in baseline.optima}

    def test_decoded_forward_matches_prediction_bits(self, tiny_ground_state):
        problem, solution = tiny_ground_state
        params = decode(solution.assignment, problem.registry, problem.net)
        values = problem.registry.decode(solution.assignment)
        for i, x in enumerate(problem.dataset.inputs):
            predicted = values[VariableKey(VariableKind.PREDICTION, problem.net.layers, i, (0,))]
            assert forward(params, x) == (predicted,)


def _fitted(net):
    return DecodedParameters(
        net,
        weights={1: ((F(-1), F(-1), F(1), F(1)),), 2: ((F(1),),)},
        biases={1: (F(0),), 2: (F(0),)},
    )


class TestMnistInstance:
    def test_spin_accounting(self, mnist_net, six_nine_train):
        first = compile_problem(mnist_net, six_nine_train)
        second = compile_problem(mnist_net, six_nine_train)
        assert first.num_original_bits == 84
        assert first.num_auxiliary_bits == second.num_auxiliary_bits > 0
        assert first.meta["aux_bits"] == str(first.num_auxiliary_bits)

    def test_zero_loss_parameters_reach_zero_energy(self, mnist_net, six_nine_train):
        problem = compile_problem(mnist_net, six_nine_train)
        params = _fitted(mnist_net)
        bits = honest_assignment(params, problem.dataset, problem.registry)
        assert bits is not None
        full = problem.trace.complete(bits)
        assert problem.qubo.rescale(problem.qubo.energy(full)) == 0

    @pytest.mark.slow
    def test_annealing_success_probability(self, mnist_net, six_nine_train):
        problem = compile_problem(mnist_net, six_nine_train)
        report = solve_sa(problem.qubo, AnnealSchedule(restarts=100, seed=0))
        assert report.hits >= 50
        assert metrics.tts(report.success_probability(), report.t_com) > 0
        params = decode(report.best.assignment, problem.registry, problem.net)
        assert loss_value(params, problem.dataset) == 0

    @pytest.mark.slow
    @pytest.mark.skipif(
        not (mnist_available(settings.data_dir, "train") and mnist_available(settings.data_dir, "test")),
        reason="MNIST IDX files not present in the data directory",
    )
    def test_test_set_accuracy(self, mnist_net):
        images, labels = load_mnist_split(settings.data_dir, "train")
        train = select_training_subset(preprocess_mnist(images, labels), per_class=2, seed=0)
        problem = compile_problem(mnist_net, train)
        report = solve_sa(problem.qubo, AnnealSchedule(restarts=100, seed=0))
        params = canonicalize(decode(report.best.assignment, problem.registry, problem.net))
        test_images, test_labels = load_mnist_split(settings.data_dir, "test")
        test = preprocess_mnist(test_images, test_labels, source="mnist-test")
        assert evaluate_model(params, test).accuracy >= F(95, 100)


class TestTwoMoon:
    @pytest.mark.slow
    def test_some_restart_separates_the_moons(self):
        dataset = two_moon(20, noise=0.1, seed=0, input_bits=1)
        net = NetworkSpec(layers=2, hidden=3, inputs=2, input_bits=1)
        problem = compile_problem(net, dataset)
        report = solve_sa(problem.qubo, AnnealSchedule(restarts=200, seed=0))
        accuracies = [
            evaluate_model(decode(state, problem.registry, net), problem.dataset).accuracy for state in report.states
        ]
        assert max(accuracies) >= F(9, 10)


class TestDeterminism:
    def test_artifacts_are_byte_identical(self, tmp_path, mnist_net, six_nine_train):
        first = write_artifacts(compile_problem(mnist_net, six_nine_train), tmp_path / "a")
        second = write_artifacts(compile_problem(mnist_net, six_nine_train), tmp_path / "b")
        for name in first:
            assert first[name].read_bytes() == second[name].read_bytes(), name

    def test_reports_are_identical(self, tiny_net, tiny_dataset):
        problem = compile_problem(tiny_net, tiny_dataset)
        schedule = AnnealSchedule(restarts=5, seed=11, sweeps=30)
        assert dumps_report(solve_sa(problem.qubo, schedule)) == dumps_report(solve_sa(problem.qubo, schedule))
