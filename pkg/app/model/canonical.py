"""Canonical forms of parameters under hidden-neuron exchange.

Exchanging two neurons of a hidden layer (their incoming rows, biases and
outgoing columns together) leaves the network function unchanged.  The
canonical form is the smallest ``DecodedParameters.key()`` among the
neuron orders reached by colour refinement: every hidden neuron is coloured
by its bias and by the multisets of (neighbour colour, weight) on both
sides until the colouring is stable.  Ties left after refinement are broken
by individualising each candidate in turn and keeping the smallest result;
neurons that are exact twins (same bias, same incoming row, same outgoing
column) are tried once.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from app.errors import ConfigError
from app.model.params import DecodedParameters, Matrix
from app.topology.network import LayerType

Node = Tuple[int, int]
Coloring = Dict[Node, int]


class _Canonicalizer:
    def __init__(self, params: DecodedParameters) -> None:
        self.params = params
        self.layers = params.net.layers
        self.weights = params.weights
        self.biases = params.biases
        self.nodes: List[Node] = [
            (k, e) for k in range(1, self.layers) for e in range(len(self.weights[k]))
        ]

    def _source_color(self, color: Coloring, k: int, j: int) -> int:
        # inputs and outputs never move, so they keep their index as identity
        return color[(k - 1, j)] if k > 1 else -(j + 1)

    def _target_color(self, color: Coloring, k: int, t: int) -> int:
        return color[(k + 1, t)] if k + 1 < self.layers else -(t + 1)

    def _signature(self, color: Coloring, node: Node) -> tuple:
        k, e = node
        incoming = tuple(
            sorted((self._source_color(color, k, j), w) for j, w in enumerate(self.weights[k][e]))
        )
        outgoing = tuple(
            sorted((self._target_color(color, k, t), row[e]) for t, row in enumerate(self.weights[k + 1]))
        )
        return color[node], incoming, outgoing

    @staticmethod
    def _relabel(signatures: Dict[Node, tuple]) -> Coloring:
        ranks = {sig: rank for rank, sig in enumerate(sorted(set(signatures.values())))}
        return {node: ranks[sig] for node, sig in signatures.items()}

    def initial(self) -> Coloring:
        return self._relabel({(k, e): (k, self.biases[k][e]) for k, e in self.nodes})

    def refine(self, color: Coloring) -> Coloring:
        count = len(set(color.values()))
        while True:
            color = self._relabel({node: self._signature(color, node) for node in self.nodes})
            refined = len(set(color.values()))
            if refined == count:
                return color
            count = refined

    def _twin_key(self, node: Node) -> tuple:
        k, e = node
        return k, self.biases[k][e], tuple(self.weights[k][e]), tuple(row[e] for row in self.weights[k + 1])

    def _leaf(self, color: Coloring) -> DecodedParameters:
        params = self.params
        for k in range(1, self.layers):
            order = sorted(range(len(self.weights[k])), key=lambda e: color[(k, e)])
            params = permute_hidden(params, k, order)
        return params

    def search(self, color: Coloring) -> DecodedParameters:
        color = self.refine(color)
        classes: Dict[int, List[Node]] = {}
        for node in self.nodes:
            classes.setdefault(color[node], []).append(node)
        tied = [members for _, members in sorted(classes.items()) if len(members) > 1]
        if not tied:
            return self._leaf(color)

        candidates: Dict[tuple, Node] = {}
        for node in tied[0]:
            candidates.setdefault(self._twin_key(node), node)
        best: Optional[DecodedParameters] = None
        for chosen in candidates.values():
            split = {node: 2 * c + (0 if node == chosen else 1) for node, c in color.items()}
            leaf = self.search(split)
            if best is None or leaf.key() < best.key():
                best = leaf
        assert best is not None
        return best


def canonicalize(params: DecodedParameters) -> DecodedParameters:
    net = params.net
    if any(spec.kind != LayerType.DENSE for spec in net.layer_kinds):
        raise ConfigError("Neuron exchange is defined for dense hidden layers only")
    if net.layers < 2:
        return params
    canonicalizer = _Canonicalizer(params)
    return canonicalizer.search(canonicalizer.initial())


def same_parameters(first: DecodedParameters, second: DecodedParameters) -> bool:
    """True when the two parameter sets differ only by hidden-neuron exchange."""

    return canonicalize(first).key() == canonicalize(second).key()


def permute_hidden(params: DecodedParameters, layer: int, order: List[int]) -> DecodedParameters:
    """Reorder the neurons of one hidden layer; ``order[i]`` is the old index placed at ``i``."""

    if not 1 <= layer < params.net.layers:
        raise ConfigError(f"Layer {layer} is not a hidden layer")
    weights: Dict[int, Matrix] = dict(params.weights)
    biases: Dict[int, Tuple[Fraction, ...]] = dict(params.biases)
    weights[layer] = tuple(params.weights[layer][e] for e in order)
    biases[layer] = tuple(params.biases[layer][e] for e in order)
    weights[layer + 1] = tuple(tuple(row[e] for e in order) for row in params.weights[layer + 1])
    return replace(params, weights=weights, biases=biases)
