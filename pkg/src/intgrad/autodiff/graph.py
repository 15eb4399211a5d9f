"""Define-then-run computation graphs with named parameter stores."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from ..errors import GraphError, ShapeError
from .ops import OPS

LEAF_OPS = ("input", "param")


@dataclass(frozen=True)
class Node:
    name: str
    op: str
    inputs: tuple[str, ...] = ()
    attrs: Mapping[str, Any] = field(default_factory=dict)


def _frozen(array) -> np.ndarray:
    a = np.array(array, dtype=np.float64)
    a.setflags(write=False)
    return a


class Network:
    """An immutable, topologically ordered graph plus its parameter tensors.

    ``outputs`` maps public output names to node names. ``meta`` carries the
    builder's architecture descriptor and conventions such as ``target`` (the
    default scalar-or-vector output attributions are taken of).
    """

    def __init__(self, nodes, params, outputs, meta=None):
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.params: Mapping[str, np.ndarray] = MappingProxyType({k: _frozen(v) for k, v in params.items()})
        self.outputs: Mapping[str, str] = MappingProxyType(dict(outputs))
        self.meta: Mapping[str, Any] = MappingProxyType(dict(meta or {}))
        self._validate()
        self.index = {n.name: i for i, n in enumerate(self.nodes)}
        self.shapes = self._infer_shapes()

    def _validate(self):
        seen = set()
        for node in self.nodes:
            if node.name in seen:
                raise GraphError(f"duplicate node name {node.name!r}")
            if node.op not in LEAF_OPS and node.op not in OPS:
                raise GraphError(f"unknown op {node.op!r} in node {node.name!r}")
            for src in node.inputs:
                if src not in seen:
                    raise GraphError(f"node {node.name!r} references {src!r} before it is defined")
            if node.op == "param" and node.name not in self.params:
                raise GraphError(f"parameter {node.name!r} missing from the store")
            if node.op == "input" and "shape" not in node.attrs:
                raise GraphError(f"input {node.name!r} declares no shape")
            arity = OPS[node.op].arity if node.op in OPS else 0
            if arity is not None and len(node.inputs) != arity:
                raise GraphError(f"{node.op} expects {arity} inputs, node {node.name!r} has {len(node.inputs)}")
            seen.add(node.name)
        for alias, target in self.outputs.items():
            if target not in seen:
                raise GraphError(f"output {alias!r} refers to unknown node {target!r}")
        if not self.outputs:
            raise GraphError("network declares no outputs")

    def _infer_shapes(self):
        from .engine import evaluate

        zeros = {n.name: np.zeros(n.attrs["shape"]) for n in self.input_nodes}
        return {k: v.shape for k, v in evaluate(self, zeros).items()}

    @property
    def input_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.op == "input"]

    @property
    def input_shapes(self) -> dict[str, tuple[int, ...]]:
        return {n.name: tuple(n.attrs["shape"]) for n in self.input_nodes}

    @property
    def input_name(self) -> str:
        """Name of the single graph input; attribution needs exactly one."""
        names = [n.name for n in self.input_nodes]
        if len(names) != 1:
            raise GraphError(f"expected a single input, network has {names}")
        return names[0]

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.input_shapes[self.input_name]

    def node(self, name: str) -> Node:
        try:
            return self.nodes[self.index[name]]
        except KeyError:
            raise GraphError(f"unknown node {name!r}") from None

    def resolve(self, name: str) -> str:
        """Map an output alias or node name to a node name."""
        if name in self.outputs:
            return self.outputs[name]
        if name in self.index:
            return name
        raise GraphError(f"unknown output or node {name!r}")

    @property
    def target(self) -> str:
        return self.meta.get("target") or next(iter(self.outputs))

    def with_params(self, params: Mapping[str, np.ndarray]) -> "Network":
        merged = dict(self.params)
        for k, v in params.items():
            if k not in merged:
                raise GraphError(f"unknown parameter {k!r}")
            if np.shape(v) != merged[k].shape:
                raise ShapeError(f"parameter {k!r}: shape {np.shape(v)} != {merged[k].shape}")
            merged[k] = v
        return Network(self.nodes, merged, self.outputs, self.meta)

    def __call__(self, x, output=None):
        from .engine import forward

        name = output or self.target
        return forward(self, {self.input_name: x}, outputs=[name])[name]

    def __repr__(self):
        return f"Network({len(self.nodes)} nodes, inputs={self.input_shapes}, outputs={list(self.outputs)})"


class NetworkBuilder:
    """Append-only graph construction; every op in the catalog is a method.

    >>> b = NetworkBuilder()
    >>> x = b.input("x", (2,))
    >>> y = b.relu(x)
    >>> b.output("y", y)
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, np.ndarray] = {}
        self.outputs: dict[str, str] = {}
        self._names: set[str] = set()
        self._counter = 0

    def _fresh(self, stem):
        self._counter += 1
        name = f"{stem}_{self._counter}"
        while name in self._names:
            self._counter += 1
            name = f"{stem}_{self._counter}"
        return name

    def _add(self, node):
        if node.name in self._names:
            raise GraphError(f"duplicate node name {node.name!r}")
        self._names.add(node.name)
        self.nodes.append(node)
        return node.name

    def input(self, name, shape):
        return self._add(Node(name, "input", (), {"shape": tuple(int(s) for s in shape)}))

    def param(self, name, value):
        self.params[name] = np.array(value, dtype=np.float64)
        return self._add(Node(name, "param"))

    def apply(self, op, *inputs, name=None, **attrs):
        if op not in OPS:
            raise GraphError(f"unknown op {op!r}")
        return self._add(Node(name or self._fresh(op), op, tuple(inputs), attrs))

    def __getattr__(self, op):
        if op in OPS:
            return partial(self.apply, op)
        raise AttributeError(op)

    def lstm_cell(self, x, h, c, weights, prefix):
        """One LSTM step from primitives; ``weights`` maps gate -> (W, b) param names."""
        z = self.concat(x, h, name=f"{prefix}_xh")
        gate = {}
        for g, act in (("i", "sigmoid"), ("f", "sigmoid"), ("g", "tanh"), ("o", "sigmoid")):
            w, b = weights[g]
            pre = self.dense(z, w, b, name=f"{prefix}_{g}_pre")
            gate[g] = self.apply(act, pre, name=f"{prefix}_{g}")
        keep = self.multiply(gate["f"], c, name=f"{prefix}_fc")
        write = self.multiply(gate["i"], gate["g"], name=f"{prefix}_ig")
        c_new = self.add(keep, write, name=f"{prefix}_c")
        h_new = self.multiply(gate["o"], self.tanh(c_new, name=f"{prefix}_tc"), name=f"{prefix}_h")
        return h_new, c_new

    def output(self, alias, node):
        self.outputs[alias] = node
        return node

    def build(self, meta=None) -> Network:
        return Network(self.nodes, self.params, self.outputs, meta)
