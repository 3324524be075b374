"""Network files, layer plans and the constraint builders."""

from fractions import Fraction

import numpy as np
import pytest

from app.compiler import compile_problem
from app.data.dataset import QuantizedDataset
from app.encoding import VariableKey, VariableKind, build_registry
from app.errors import ConfigError, DataError, FormatError, UnsupportedModuleError
from app.model.forward import forward, forward_trace, honest_assignment
from app.model.params import DecodedParameters, decode
from app.topology import netfile
from app.topology.constraints import (
    build_activation_constraints,
    build_constraints,
    build_structured_layer_constraints,
)
from app.topology.losses import build_loss, snap_labels
from app.topology.network import (
    ActivationKind,
    LayerSpec,
    LayerType,
    LossKind,
    NetworkSpec,
    ValueRange,
    plan_network,
    with_input_statistics,
)

F = Fraction


def _dataset(rows, labels, input_bits=0):
    return QuantizedDataset(tuple(rows), tuple((F(y),) for y in labels), input_bits)


def _params(net, weights, biases, slopes=None):
    return DecodedParameters(
        net=net,
        weights={k: tuple(tuple(F(v) for v in row) for row in rows) for k, rows in weights.items()},
        biases={k: tuple(F(v) for v in values) for k, values in biases.items()},
        slopes={k: F(v) for k, v in (slopes or {}).items()},
    )


def _assert_honest(net, params, dataset):
    registry = build_registry(net, dataset.size)
    constraints = build_constraints(net, registry, dataset)
    bits = honest_assignment(params, dataset, registry)
    assert bits is not None
    assert constraints.violations(bits) == []
    return registry, constraints, bits


class TestNetworkFile:
    def test_minimal(self):
        net = netfile.parse_network(["layers=2", "hidden=1", "inputs=4"])
        assert net == NetworkSpec(layers=2, hidden=1, inputs=4)
        assert net.is_reference

    def test_read_shipped_config(self, fixtures_dir):
        net = netfile.read_network(fixtures_dir / "mnist69.net")
        assert (net.layers, net.hidden, net.inputs, net.input_bits) == (2, 1, 4, 0)
        assert net.loss == LossKind.MSE

    def test_roundtrip_with_structured_layers(self):
        text = "\n".join(
            [
                "layers=3",
                "hidden=2",
                "inputs=9",
                "input_shape=3x3",
                "layer.1=conv2d:2x2",
                "activation.1=relu",
                "leaky_alpha=1/8",
            ]
        )
        net = netfile.parse_network(text.splitlines())
        assert net.layer(1).kind == LayerType.CONV2D
        assert net.activation(1) == ActivationKind.RELU
        assert net.activation(2) == ActivationKind.SIGN
        assert netfile.parse_network(netfile.dumps_network(net).splitlines()) == net

    def test_unknown_key(self):
        with pytest.raises(FormatError):
            netfile.parse_network(["layers=2", "hidden=1", "inputs=1", "depth=3"])

    def test_missing_required(self):
        with pytest.raises(FormatError):
            netfile.parse_network(["layers=2", "hidden=1"])

    @pytest.mark.parametrize(
        "line",
        ["activation=tanh", "activation=sigmoid", "loss=cross_entropy", "layer.1=maxpool:2x2"],
    )
    def test_unsupported_modules(self, line):
        with pytest.raises(UnsupportedModuleError):
            netfile.parse_network(["layers=2", "hidden=1", "inputs=4", "input_shape=2x2", line])

    def test_override_outside_hidden_layers(self):
        with pytest.raises(ConfigError):
            netfile.parse_network(["layers=2", "hidden=1", "inputs=1", "activation.2=relu"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            netfile.read_network(tmp_path / "absent.net")


class TestNetworkSpec:
    def test_needs_two_layers(self):
        with pytest.raises(ConfigError):
            NetworkSpec(layers=1, hidden=1, inputs=1)

    def test_input_shape_must_match(self):
        with pytest.raises(ConfigError):
            NetworkSpec(layers=2, hidden=1, inputs=4, input_shape=(3, 3))

    def test_value_range_grid(self):
        with pytest.raises(ConfigError):
            ValueRange(F(0), F(1, 3), F(1, 2))
        assert ValueRange(F(-1), F(1), F(1, 2)).contains(F(1, 2))


class TestPlan:
    def test_conv_and_pool_shapes(self):
        net = NetworkSpec(
            layers=3,
            hidden=1,
            inputs=9,
            input_shape=(3, 3),
            layer_kinds=(LayerSpec(LayerType.CONV2D, kernel=(2, 2)), LayerSpec(LayerType.AVGPOOL, window=(2, 2))),
        )
        plan = plan_network(net)
        conv, pool = plan.hidden
        assert conv.out_shape == (2, 2)
        assert conv.weight_shape == (1, 4)
        assert pool.out_shape == (1, 1)
        assert pool.activation == ActivationKind.NONE
        assert pool.preact.quantum == F(1, 4)
        assert plan.output.in_width == 1

    def test_kernel_larger_than_input(self):
        net = NetworkSpec(
            layers=2,
            hidden=1,
            inputs=4,
            input_shape=(2, 2),
            layer_kinds=(LayerSpec(LayerType.CONV2D, kernel=(3, 3)),),
        )
        with pytest.raises(ConfigError):
            plan_network(net)

    def test_middle_layer_parity(self):
        plan = plan_network(NetworkSpec(layers=3, hidden=3, inputs=2))
        assert plan.layer(1).needs_sign_slack
        assert not plan.layer(2).needs_sign_slack
        assert plan.layer(2).frozen_bias == 2


class TestReferenceConstraints:
    def test_counts_for_mnist_layout(self, mnist_net, six_nine_train):
        registry = build_registry(mnist_net, six_nine_train.size)
        constraints = build_constraints(mnist_net, registry, six_nine_train)
        assert constraints.count_by_kind() == {"linear": 8, "sign_product": 4, "sign_slack": 4}
        assert constraints.min_quantum() == F(1, 2)
        assert constraints.max_degree == 2

    def test_honest_forward_pass_satisfies_all(self, mnist_net, six_nine_train):
        params = _params(mnist_net, {1: [[-1, -1, 1, 1]], 2: [[1]]}, {1: [0], 2: [0]})
        registry, constraints, bits = _assert_honest(mnist_net, params, six_nine_train)
        prediction = registry.get(VariableKind.PREDICTION, 2, 0, (0,))
        flipped = list(bits)
        flipped[prediction.bits[0]] ^= 1
        assert constraints.violations(flipped)

    def test_sign_of_zero_is_positive(self):
        net = NetworkSpec(layers=2, hidden=1, inputs=2)
        dataset = _dataset([(1, -1)], [1])
        params = _params(net, {1: [[1, 1]], 2: [[1]]}, {1: [0], 2: [0]})
        _assert_honest(net, params, dataset)

    def test_deep_reference_network(self):
        net = NetworkSpec(layers=3, hidden=2, inputs=2)
        dataset = _dataset([(1, 0), (-1, 1)], [1, 0])
        params = _params(net, {1: [[1, 1], [1, -1]], 2: [[1, -1], [-1, 1]], 3: [[1, 0]]}, {1: [0, 1], 2: [1, 1], 3: [0]})
        _assert_honest(net, params, dataset)


class TestOtherActivations:
    def test_relu(self):
        net = NetworkSpec(layers=2, hidden=1, inputs=2, hidden_activation=ActivationKind.RELU)
        dataset = _dataset([(1, 0), (0, 1)], [0, -1])
        params = _params(net, {1: [[1, -1]], 2: [[1]]}, {1: [0], 2: [-1]})
        _, constraints, _ = _assert_honest(net, params, dataset)
        assert constraints.count_by_kind()["relu_mean"] == 2

    def test_leaky_relu(self):
        net = NetworkSpec(layers=2, hidden=1, inputs=2, hidden_activation=ActivationKind.LEAKY_RELU)
        dataset = _dataset([(1, 0), (0, 1)], [1, F(-1, 2)])
        params = _params(net, {1: [[1, -1]], 2: [[2]]}, {1: [0], 2: [0]})
        _assert_honest(net, params, dataset)

    def test_prelu_slope_is_learned(self):
        net = NetworkSpec(layers=2, hidden=1, inputs=2, hidden_activation=ActivationKind.PRELU)
        dataset = _dataset([(1, 0), (0, 1)], [1, F(-1, 2)])
        params = _params(net, {1: [[1, -1]], 2: [[1]]}, {1: [0], 2: [0]}, slopes={1: F(1, 2)})
        registry, constraints, _ = _assert_honest(net, params, dataset)
        assert registry.keys_of(VariableKind.SLOPE)
        assert constraints.max_degree == 3

    def test_abs(self):
        net = NetworkSpec(layers=2, hidden=1, inputs=2, hidden_activation=ActivationKind.ABS)
        dataset = _dataset([(1, 0), (0, 1)], [0, 0])
        params = _params(net, {1: [[1, -1]], 2: [[1]]}, {1: [0], 2: [-1]})
        _, constraints, _ = _assert_honest(net, params, dataset)
        assert constraints.count_by_kind()["abs_product"] == 2

    def test_activation_builder_filters_layers(self, mnist_net, six_nine_train):
        registry = build_registry(mnist_net, six_nine_train.size)
        assert len(build_activation_constraints("relu", mnist_net, registry, six_nine_train)) == 0
        assert len(build_activation_constraints("sign", mnist_net, registry, six_nine_train)) == 8


class TestStructuredLayers:
    def test_conv(self):
        net = NetworkSpec(
            layers=2,
            hidden=1,
            inputs=4,
            input_shape=(2, 2),
            layer_kinds=(LayerSpec(LayerType.CONV2D, kernel=(1, 2)),),
        )
        dataset = _dataset([(1, 0, 0, 1)], [1])
        params = _params(net, {1: [[1, -1]], 2: [[1, 0]]}, {2: [0]})
        _, constraints, _ = _assert_honest(net, params, dataset)
        assert constraints.count_by_kind()["conv"] == 2

    def test_full_kernel_conv_is_a_dense_neuron(self):
        kernel = [1, -1, 1, 0, 1, -1, -1, 0, 1]
        conv_net = NetworkSpec(
            layers=2,
            hidden=1,
            inputs=9,
            input_shape=(3, 3),
            layer_kinds=(LayerSpec(LayerType.CONV2D, kernel=(3, 3)),),
        )
        dense_net = NetworkSpec(layers=2, hidden=1, inputs=9)
        conv = _params(conv_net, {1: [kernel], 2: [[1]]}, {2: [0]})
        dense = _params(dense_net, {1: [kernel], 2: [[1]]}, {1: [0], 2: [0]})
        assert plan_network(conv_net).layer(1).width == 1
        rng = np.random.default_rng(3)
        rows = [tuple(int(v) for v in rng.integers(-1, 2, size=9)) for _ in range(25)]
        for x in rows:
            assert forward_trace(conv, x).layers[0].preact == forward_trace(dense, x).layers[0].preact
            assert forward(conv, x) == forward(dense, x)
        _assert_honest(conv_net, conv, _dataset(rows[:3], [1, -1, 1]))

    def test_avgpool(self):
        net = NetworkSpec(
            layers=2,
            hidden=1,
            inputs=4,
            input_shape=(2, 2),
            layer_kinds=(LayerSpec(LayerType.AVGPOOL, window=(2, 1)),),
        )
        dataset = _dataset([(1, 0, 1, 1)], [1])
        params = _params(net, {2: [[1, 0]]}, {2: [0]})
        _, constraints, _ = _assert_honest(net, params, dataset)
        assert constraints.count_by_kind() == {"linear": 1, "avgpool": 2}

    def test_batchnorm(self):
        net = NetworkSpec(
            layers=2,
            hidden=1,
            inputs=2,
            layer_kinds=(LayerSpec(LayerType.BATCHNORM, mean=(0,), std=(1,)),),
        )
        dataset = _dataset([(1, -1)], [0])
        params = _params(net, {2: [[1, 1]]}, {2: [0]})
        _assert_honest(net, params, dataset)

    def test_out_of_scope_layer_kind(self, mnist_net, six_nine_train):
        registry = build_registry(mnist_net, six_nine_train.size)
        with pytest.raises(UnsupportedModuleError):
            build_structured_layer_constraints("maxpool", mnist_net, registry, six_nine_train)


class TestDatasetChecks:
    def test_input_width_mismatch(self, mnist_net):
        dataset = _dataset([(1, 0, 1)], [1])
        registry = build_registry(mnist_net, 1)
        with pytest.raises(DataError):
            build_constraints(mnist_net, registry, dataset)

    def test_input_outside_grid(self):
        net = NetworkSpec(layers=2, hidden=1, inputs=1)
        dataset = _dataset([(2,)], [1], input_bits=1)
        registry = build_registry(net, 1)
        with pytest.raises(DataError):
            build_constraints(net, registry, dataset)


class TestLosses:
    def test_snap_labels(self):
        dataset = _dataset([(0,), (0,), (0,)], [F(3, 10), F(-1, 4), 1])
        snapped, summary = snap_labels(dataset, hidden=1)
        assert [row[0] for row in snapped.labels] == [F(1, 2), F(-1, 2), 1]
        assert summary.snapped == 2
        assert summary.max_distance == F(1, 4)
        assert summary.grid == F(1, 2)

    def test_mse_objective(self, tiny_net, tiny_dataset):
        registry = build_registry(tiny_net, 1)
        loss = build_loss("mse", registry, tiny_dataset)
        assert len(loss.constraints) == 0
        prediction = registry.get(VariableKind.PREDICTION, 2, 0, (0,))
        for value in prediction.values():
            bits = [0] * registry.num_bits
            for bit, b in zip(prediction.bits, prediction.encode(value)):
                bits[bit] = b
            assert loss.objective.evaluate(bits) == (value - F(1, 2)) ** 2

    def test_hinge(self):
        net = NetworkSpec(layers=2, hidden=1, inputs=2, loss=LossKind.HINGE)
        dataset = _dataset([(1, 0), (0, 1)], [1, -1])
        params = _params(net, {1: [[1, -1]], 2: [[1]]}, {1: [0], 2: [0]})
        _, constraints, _ = _assert_honest(net, params, dataset)
        assert constraints.count_by_kind()["hinge"] == 2

    def test_hinge_needs_binary_labels(self):
        net = NetworkSpec(layers=2, hidden=1, inputs=1, loss=LossKind.HINGE)
        registry = build_registry(net, 1)
        with pytest.raises(DataError):
            build_loss(LossKind.HINGE, registry, _dataset([(1,)], [F(1, 2)]))


class TestInputStatistics:
    def _net(self, spec):
        return NetworkSpec(layers=2, hidden=1, inputs=3, layer_kinds=(spec,))

    def test_fills_missing_batchnorm_statistics(self):
        net = self._net(LayerSpec(LayerType.BATCHNORM))
        inputs = [(1, 1, 1), (-1, 1, 0), (1, 1, 1), (-1, 1, 0)]
        layer = with_input_statistics(net, inputs).layer(1)
        assert layer.mean == (0, 1, F(1, 2))
        assert layer.std == (1, 1, F(1, 2))

    def test_configured_statistics_are_kept(self):
        net = self._net(LayerSpec(LayerType.BATCHNORM, mean=(0,), std=(2,)))
        assert with_input_statistics(net, [(1, 1, 1)]) is net
        dense = NetworkSpec(layers=2, hidden=1, inputs=3)
        assert with_input_statistics(dense, [(1, 1, 1)]) is dense

    def test_empty_inputs(self):
        with pytest.raises(ConfigError):
            with_input_statistics(self._net(LayerSpec(LayerType.BATCHNORM)), [])


class TestZeroResidualAssignments:
    def test_every_feasible_assignment_is_a_forward_pass(self, tiny_net, tiny_dataset):
        problem = compile_problem(tiny_net, tiny_dataset)
        size = problem.num_original_bits
        indices = np.arange(1 << size, dtype=np.uint32)
        rows = ((indices[:, None] >> np.arange(size, dtype=np.uint32)[None, :]) & 1).astype(np.int8)
        feasible = np.ones(rows.shape[0], dtype=bool)
        for _, phi in problem.constraints:
            numerators, _ = phi.evaluate_batch(rows)
            feasible &= numerators == 0
        assert feasible.any()

        for row in rows[feasible]:
            bits = [int(bit) for bit in row]
            params = decode(bits, problem.registry, tiny_net)
            values = problem.registry.decode(bits)
            for i, x in enumerate(tiny_dataset.inputs):
                predicted = values[VariableKey(VariableKind.PREDICTION, tiny_net.layers, i, (0,))]
                assert forward(params, x) == (predicted,)
