"""Decoding, exact inference, canonical forms, evaluation and the enumeration baseline."""

from fractions import Fraction

import numpy as np
import pytest

from app.encoding import build_registry
from app.errors import ConfigError, FormatError, SolverCapError
from app.model.baseline import enumerate_optimal_parameters
from app.model.canonical import canonicalize, permute_hidden, same_parameters
from app.model.evaluation import (
    evaluate_model,
    dumps_eval_report,
    write_confusion_csv,
    write_eval_report,
)
from app.model.forward import forward, forward_trace, loss_value, sign
from app.model.params import DecodedParameters, decode, dumps_params, loads_params, read_params, write_params
from app.topology.network import LayerSpec, LayerType, NetworkSpec

F = Fraction


def _params(net, w1, b1, wl, bl):
    return DecodedParameters(
        net,
        weights={1: tuple(tuple(F(v) for v in row) for row in w1), 2: tuple(tuple(F(v) for v in row) for row in wl)},
        biases={1: tuple(F(v) for v in b1), 2: tuple(F(v) for v in bl)},
    )


def _deep(net, weights, biases):
    return DecodedParameters(
        net,
        weights={k: tuple(tuple(F(v) for v in row) for row in rows) for k, rows in enumerate(weights, start=1)},
        biases={k: tuple(F(v) for v in values) for k, values in enumerate(biases, start=1)},
    )


@pytest.fixture
def fitted(mnist_net):
    return _params(mnist_net, [(-1, -1, 1, 1)], (0,), [(1,)], (0,))


class TestDecode:
    def test_all_zero_bits(self, tiny_net):
        registry = build_registry(tiny_net, 1)
        params = decode([0] * registry.num_bits, registry, tiny_net)
        assert params.weights == {1: ((-1,),), 2: ((-1,),)}
        assert params.biases == {1: (0,), 2: (-1,)}
        assert params.scales["W1"] == 2
        assert params.scales["W2"] == 1

    def test_auxiliary_bits_ignored(self, tiny_net):
        registry = build_registry(tiny_net, 1)
        plain = decode([1] * 19, registry, tiny_net)
        extended = decode([1] * 22, registry.with_auxiliaries(3), tiny_net)
        assert plain == extended
        assert plain.weights[1] == ((1,),)
        assert plain.biases[1] == (3,)


class TestForward:
    def test_sign_of_zero_is_positive(self):
        assert sign(F(0)) == 1
        assert sign(F(-1, 3)) == -1

    def test_tiny_network(self, tiny_net, tiny_dataset):
        params = _params(tiny_net, [(1,)], (0,), [(1,)], (0,))
        assert forward(params, (1,)) == (1,)
        assert loss_value(params, tiny_dataset) == F(1, 4)

    def test_zero_preactivation_fires(self, tiny_net):
        params = _params(tiny_net, [(-1,)], (1,), [(1,)], (-1,))
        trace = forward_trace(params, (1,))
        assert trace.layers[0].preact == [0]
        assert trace.layers[0].postact == [1]
        assert trace.outputs == (0,)

    def test_fitted_patches(self, fitted, six_nine_train):
        outputs = [forward(fitted, x)[0] for x in six_nine_train.inputs]
        assert outputs == [1, 1, -1, -1]
        assert loss_value(fitted, six_nine_train) == 0


class TestParamsFile:
    def test_roundtrip(self, tmp_path, mnist_net):
        registry = build_registry(mnist_net, 4)
        params = decode([1, 0] * 42, registry, mnist_net)
        path = tmp_path / "params.txt"
        write_params(params, path)
        loaded = read_params(path, mnist_net)
        assert loaded == params
        assert loaded.scales == params.scales

    def test_frozen_middle_bias_written(self):
        net = NetworkSpec(layers=3, hidden=2, inputs=2)
        registry = build_registry(net, 1)
        params = decode([0] * registry.num_bits, registry, net)
        text = dumps_params(params)
        assert "b2.0=1/1" in text
        assert text.startswith("# params")
        assert loads_params(text.splitlines(), net) == params

    def test_unknown_key(self, mnist_net):
        with pytest.raises(FormatError):
            loads_params(["Z1=3"], mnist_net)

    def test_missing_parameter(self, mnist_net):
        with pytest.raises(FormatError):
            loads_params(["W1.0.0=1"], mnist_net)


class TestCanonical:
    def test_neuron_exchange(self):
        net = NetworkSpec(layers=2, hidden=2, inputs=2)
        first = _params(net, [(1, -1), (-1, 1)], (0, 1), [(F(1, 2), -1)], (0,))
        swapped = _params(net, [(-1, 1), (1, -1)], (1, 0), [(-1, F(1, 2))], (0,))
        assert same_parameters(first, swapped)
        assert canonicalize(first) == canonicalize(swapped)
        for x in ((1, 0), (-1, 1), (0, 0), (1, 1)):
            assert forward(first, x) == forward(swapped, x)

    def test_different_functions(self):
        net = NetworkSpec(layers=2, hidden=2, inputs=2)
        first = _params(net, [(1, -1), (-1, 1)], (0, 1), [(F(1, 2), -1)], (0,))
        other = _params(net, [(1, -1), (-1, 1)], (0, 1), [(-1, F(1, 2))], (0,))
        assert not same_parameters(first, other)

    def test_swap_in_middle_layer(self):
        net = NetworkSpec(layers=3, hidden=2, inputs=2)
        first = _deep(net, [[(1, 1), (1, 1)], [(1, 0), (0, 1)], [(1, -1)]], [(0, 0), (0, 0), (0,)])
        swapped = _deep(net, [[(1, 1), (1, 1)], [(0, 1), (1, 0)], [(-1, 1)]], [(0, 0), (0, 0), (0,)])
        assert same_parameters(first, swapped)
        assert canonicalize(canonicalize(first)) == canonicalize(first)

    def test_random_permutations_of_deep_nets(self):
        rng = np.random.default_rng(7)
        net = NetworkSpec(layers=4, hidden=3, inputs=2)
        inputs = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
        for _ in range(30):
            weights = [
                rng.choice([-1, 1], size=(3, 2)).tolist(),
                rng.choice([-1, 1], size=(3, 3)).tolist(),
                rng.choice([-1, 1], size=(3, 3)).tolist(),
                rng.integers(-2, 3, size=(1, 3)).tolist(),
            ]
            biases = [rng.integers(-1, 2, size=3).tolist(), (0, 0, 0), (0, 0, 0), (0,)]
            params = _deep(net, weights, biases)
            shuffled = params
            for layer in (1, 2, 3):
                shuffled = permute_hidden(shuffled, layer, [int(e) for e in rng.permutation(3)])
            canonical = canonicalize(params)
            assert canonicalize(shuffled) == canonical
            assert canonicalize(canonical) == canonical
            for x in inputs:
                assert forward(canonical, x) == forward(params, x) == forward(shuffled, x)

    def test_permute_rejects_output_layer(self):
        net = NetworkSpec(layers=2, hidden=2, inputs=2)
        params = _params(net, [(1, -1), (-1, 1)], (0, 1), [(1, -1)], (0,))
        with pytest.raises(ConfigError):
            permute_hidden(params, 2, [1, 0])

    def test_structured_layers_rejected(self):
        net = NetworkSpec(
            layers=2,
            hidden=1,
            inputs=4,
            input_shape=(2, 2),
            layer_kinds=(LayerSpec(kind=LayerType.CONV2D, kernel=(2, 2)),),
        )
        with pytest.raises(ConfigError):
            canonicalize(DecodedParameters(net, weights={}, biases={}))


class TestEvaluation:
    def test_perfect_fit(self, fitted, six_nine_train):
        report = evaluate_model(fitted, six_nine_train)
        assert report.mse == 0
        assert report.accuracy == 1
        assert report.confusion == ((2, 0), (0, 2))

    def test_zero_prediction_is_positive(self, mnist_net, six_nine_train):
        params = _params(mnist_net, [(-1, -1, 1, 1)], (0,), [(0,)], (0,))
        report = evaluate_model(params, six_nine_train)
        assert report.confusion == ((2, 0), (2, 0))
        assert report.accuracy == F(1, 2)
        assert report.mse == 1
        assert report.hinge == 1

    def test_regression_has_no_confusion(self, fitted, six_nine_train, tmp_path):
        report = evaluate_model(fitted, six_nine_train, task="regression")
        assert report.accuracy is None
        with pytest.raises(ConfigError):
            write_confusion_csv(report, tmp_path / "confusion.csv")

    def test_unknown_task(self, fitted, six_nine_train):
        with pytest.raises(ConfigError):
            evaluate_model(fitted, six_nine_train, task="ranking")

    def test_report_files(self, fitted, six_nine_train, tmp_path):
        report = evaluate_model(fitted, six_nine_train)
        text = dumps_eval_report(report, "test")
        assert "test.samples 4" in text
        assert "test.accuracy 1.000000" in text
        assert "test.confusion 2 0 0 2" in text

        write_eval_report([("train", report), ("test", report)], tmp_path / "eval.txt")
        lines = (tmp_path / "eval.txt").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "train.samples 4"
        assert "test.samples 4" in lines

        write_confusion_csv(report, tmp_path / "confusion.csv")
        rows = (tmp_path / "confusion.csv").read_text(encoding="utf-8").splitlines()
        assert rows == ["true\\predicted,positive,negative", "positive,2,0", "negative,0,2"]


class TestBaseline:
    def test_tiny_network_optimum(self, tiny_net, tiny_dataset):
        registry = build_registry(tiny_net, 1)
        result = enumerate_optimal_parameters(tiny_net, tiny_dataset, registry)
        assert result.loss == F(1, 4)
        assert result.evaluated == 2 * 4 * 4 * 4
        assert 0 < result.representable <= result.evaluated
        assert result.optima
        for params in result.optima:
            assert loss_value(params, tiny_dataset) == F(1, 4)

    def test_cap(self, tiny_net, tiny_dataset):
        registry = build_registry(tiny_net, 1)
        with pytest.raises(SolverCapError):
            enumerate_optimal_parameters(tiny_net, tiny_dataset, registry, max_bits=6)
